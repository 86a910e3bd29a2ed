"""Command-line front end for the car-following case study.

Subcommands::

    uqtube offline  --config cfg.toml --out artifact.json
    uqtube run      --artifact artifact.json --out-dir results/ [--seed 3 --n0 100 ...]
    uqtube campaign --artifact artifact.json --out-dir results/ --realisations 50
    uqtube regions  --out-dir results/ --grid 40
    uqtube quantify --samples samples.csv --out quantified.json

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 run failure.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .errors import DomainError, SolverError, StructurallyInfeasible, UnboundedOmega, UqTubeError
from .poly import area_2d, vertices_2d
from .sim import CaseStudyConfig, ConfigError, default_config, offline_artifacts, region_report, run_campaign, simulate
from .tube import TubeArtifacts
from .uq import DisturbanceLog, quantify_batch, quantify_recursive, sample_complexity

log = logging.getLogger("uqtube")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_RUN = 0, 2, 3, 4

# command-line flag -> config key
OVERRIDES = {
    "seed": "seed", "n0": "n0", "epsilon": "epsilon", "gamma": "gamma",
    "horizon": "steps", "mode": "mode", "backup_index": "backup_disturbance_index",
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=1, sort_keys=True))
        fh.write("\n")


def load_config(args):
    """Config file (or the shipped defaults) with command-line overrides applied."""
    try:
        cfg = CaseStudyConfig.load(args.config) if args.config else default_config()
        changes = {key: getattr(args, flag) for flag, key in OVERRIDES.items()
                   if getattr(args, flag, None) is not None}
        if getattr(args, "x0", None) is not None:
            changes["x0"] = list(args.x0)
        return cfg.replace(**changes) if changes else cfg
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_CONFIG) from exc
    except (ConfigError, DomainError) as exc:
        raise CliError(f"invalid config: {exc}", EXIT_CONFIG) from exc


def load_artifacts(args, cfg):
    if getattr(args, "artifact", None):
        try:
            with open(args.artifact, encoding="utf-8") as fh:
                ta = TubeArtifacts.from_json(fh.read())
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot load artifact {args.artifact}: {exc}", EXIT_CONFIG) from exc
        if ta.gs.N != cfg.N:
            raise CliError(f"artifact was built with N={ta.gs.N}, config has N={cfg.N}", EXIT_CONFIG)
        return ta
    return offline_artifacts(cfg)


def _out_dir(args):
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def cmd_offline(args):
    cfg = load_config(args)
    ta = offline_artifacts(cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(ta.to_json())
        fh.write("\n")
    print(json.dumps(ta.summary(), sort_keys=True))
    return EXIT_OK


def cmd_run(args):
    cfg = load_config(args)
    ta = load_artifacts(args, cfg)
    needed = sample_complexity(cfg.epsilon, cfg.gamma, ta.gs.nx)
    if cfg.n0 < needed:
        log.warning("n0=%d is below the %d samples required for eps=%g, gamma=%g",
                    cfg.n0, needed, cfg.epsilon, cfg.gamma)
    record, _ = simulate(cfg, ta, np.random.default_rng(cfg.seed))
    out = _out_dir(args)
    record.to_csv(os.path.join(out, "run.csv"))
    summary = record.summary()
    summary.update(seed=cfg.seed, n0=cfg.n0, mode=cfg.mode, x0=cfg.initial_state.tolist())
    _dump_json(summary, os.path.join(out, "summary.json"))
    print(json.dumps({k: summary[k] for k in ("success", "steps", "backups", "final_alpha")}, sort_keys=True))
    return EXIT_OK if record.success else EXIT_RUN


def cmd_campaign(args):
    cfg = load_config(args)
    ta = load_artifacts(args, cfg)
    result = run_campaign(cfg, ta, n_realisations=args.realisations, steps=cfg.steps,
                          workers=args.workers)
    out = _out_dir(args)
    W_area = area_2d(ta.W)
    _dump_json(result.to_dict(W_area), os.path.join(out, "campaign.json"))
    with open(os.path.join(out, "campaign.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "success", "steps", "backups", "final_alpha", "failure"])
        for i, s in enumerate(result.summaries):
            writer.writerow([i, int(s["success"]), s["steps"], s["backups"],
                             repr(s["final_alpha"]), s["failure"] or ""])
    print(json.dumps({"mode": result.mode, "n0": result.n0, "realisations": result.n,
                      "success_rate": result.success_rate, "interrupted": result.interrupted},
                     sort_keys=True))
    log.info("campaign finished in %.1f s", result.elapsed)
    return EXIT_RUN if result.interrupted else EXIT_OK


def cmd_regions(args):
    cfg = load_config(args)
    ta = load_artifacts(args, cfg)
    report = region_report(cfg, ta, n_grid=args.grid)
    out = _out_dir(args)
    _dump_json(report, os.path.join(out, "regions.json"))
    print(json.dumps(report["volumes"], sort_keys=True))
    return EXIT_OK


def cmd_quantify(args):
    cfg = load_config(args)
    W = cfg.W
    try:
        samples = DisturbanceLog.from_csv(args.samples, W)
    except OSError as exc:
        raise CliError(f"cannot read samples: {exc}", EXIT_CONFIG) from exc
    except (ValueError, UqTubeError) as exc:
        raise CliError(f"invalid samples: {exc}", EXIT_CONFIG) from exc
    if len(samples) == 0:
        raise CliError("the sample file is empty", EXIT_CONFIG)
    if args.recursive:
        sol = quantify_batch(samples.samples[:1], W)
        for w in samples.samples[1:]:
            sol = quantify_recursive(sol, w, W)
    else:
        sol = quantify_batch(samples, W)
    qs = sol.qset(W)
    result = {
        "samples": len(samples),
        "alpha": float(sol.alpha),
        "v": sol.v.tolist(),
        "y": sol.y.tolist(),
        "beta": float(sol.beta),
        "vertices": [p.tolist() for p in vertices_2d(qs.as_polytope())],
        "volume": area_2d(qs.as_polytope()),
        "required_samples": sample_complexity(cfg.epsilon, cfg.gamma, W.dim),
    }
    result["guarantee"] = result["samples"] >= result["required_samples"]
    _dump_json(result, args.out)
    print(json.dumps({k: result[k] for k in ("samples", "alpha", "volume", "guarantee")}, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="uqtube", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, artifact=True):
        p.add_argument("--config", help="case-study TOML file (default: shipped case study)")
        if artifact:
            p.add_argument("--artifact", help="offline artifact JSON (recomputed when omitted)")
        p.add_argument("--seed", type=int)
        p.add_argument("--n0", type=int, help="size of the initial disturbance log")
        p.add_argument("--epsilon", type=float, help="violation level for the sample bound")
        p.add_argument("--gamma", type=float, help="confidence parameter for the sample bound")
        p.add_argument("--horizon", type=int, help="number of closed-loop steps")
        p.add_argument("--mode", choices=["UQ-RMPC", "RMPC"])
        p.add_argument("--backup-index", dest="backup_index", choices=["k-2", "k-1"],
                       help="disturbance used for the backup prediction")
        p.add_argument("--x0", type=float, nargs=2, metavar=("P", "V"), help="initial relative state")

    p = sub.add_parser("offline", help="compute and store the offline tube artifacts")
    common(p, artifact=False)
    p.add_argument("--out", required=True, help="artifact JSON path")
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("run", help="one closed-loop realisation")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("campaign", help="Monte-Carlo realisations")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--realisations", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("regions", help="disturbance sets and feasible-region areas")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--grid", type=int, help="grid points per axis")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("quantify", help="quantify a CSV of disturbance samples")
    common(p, artifact=False)
    p.add_argument("--samples", required=True, help="CSV with one sample per row")
    p.add_argument("--recursive", action="store_true", help="process the samples one at a time")
    p.add_argument("--out", required=True, help="result JSON path")
    p.set_defaults(func=cmd_quantify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("realisations", "workers", "grid"):
        val = getattr(args, name, None)
        if val is not None and val < 1:
            print(f"uqtube: --{name} must be positive", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except CliError as exc:
        print(f"uqtube: {exc}", file=sys.stderr)
        return exc.code
    except (StructurallyInfeasible, UnboundedOmega, SolverError) as exc:
        print(f"uqtube: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
