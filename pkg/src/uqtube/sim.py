"""Car-following case study: configuration, disturbance model and experiments."""
import copy
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from .errors import BackupInfeasible, BackupUnavailable
from .mpc import Controller, ControllerOptions, RunRecord, region_bounding_box, region_member
from .poly import Polytope, area_2d, contains, convex_hull_2d, from_vertices_2d, minkowski_sum_2d, vertices_2d
from .qtube import conservative_tube, quantified_tube
from .tube import build_artifacts
from .uq import DisturbanceLog, quantify_batch, quantify_recursive, sample_complexity

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

log = logging.getLogger(__name__)

VIOLATION_TOL = 1e-9

# (section, key) for every configurable field
_LAYOUT = {
    "T": "plant", "L": "plant",
    "Q": "cost", "R": "cost",
    "F": "constraints", "G": "constraints",
    "rho": "tube", "N": "tube",
    "W_vertices": "disturbance", "xi_ev_vertices": "disturbance",
    "xi_lv_vertices": "disturbance", "u_lv": "disturbance",
    "x_ev": "initial", "x_lv": "initial", "x0": "initial",
    "seed": "run", "n0": "run", "steps": "run", "mode": "run", "backup": "run",
    "backup_disturbance_index": "run", "include_origin": "run",
    "eager_quantification": "run", "epsilon": "run", "gamma": "run",
    "n_realisations": "campaign", "workers": "campaign", "n_grid": "campaign",
}


class ConfigError(ValueError):
    pass


@dataclass
class CaseStudyConfig:
    T: float = 0.5
    L: float = 35.0
    Q: list = field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0]])
    R: list = field(default_factory=lambda: [[0.1]])
    F: list = field(default_factory=lambda: [[1 / 15, 0.0], [-1 / 15, 0.0], [0.0, 0.0], [0.0, 0.0]])
    G: list = field(default_factory=lambda: [[0.0], [0.0], [-0.5], [0.5]])
    rho: float = 0.01
    N: int = 10
    W_vertices: list = field(default_factory=lambda: [[-0.5, -0.2], [0.5, -0.2], [0.5, 0.2], [-0.5, 0.2]])
    xi_ev_vertices: list = field(default_factory=lambda: [[-0.0586, -0.0197], [0.061, -0.0102],
                                                          [0.008, 0.0257], [-0.0119, 0.0241]])
    xi_lv_vertices: list = field(default_factory=lambda: [[-0.0586, -0.0197], [0.061, -0.0102],
                                                          [0.008, 0.0257], [-0.0119, 0.0241]])
    u_lv: list = field(default_factory=lambda: [-1 / 20, 1 / 16])
    x_ev: list = field(default_factory=lambda: [53.0, 15.0])
    x_lv: list = field(default_factory=lambda: [100.0, 10.0])
    x0: list = None
    seed: int = 0
    n0: int = 100
    steps: int = 20
    mode: str = "UQ-RMPC"
    backup: str = "resolve"
    backup_disturbance_index: str = "k-2"
    include_origin: bool = False
    eager_quantification: bool = False
    epsilon: float = 0.1
    gamma: float = 0.05
    n_realisations: int = 50
    workers: int = 1
    n_grid: int = 40

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("rho must lie in (0, 1)")
        if self.N < 1 or self.steps < 0 or self.n0 < 0 or self.n_realisations < 0:
            raise ConfigError("N must be >= 1; steps, n0 and n_realisations non-negative")
        if self.workers < 1 or self.n_grid < 1:
            raise ConfigError("workers and n_grid must be positive")
        if not (0.0 < self.epsilon < 1.0 and 0.0 < self.gamma < 1.0):
            raise ConfigError("epsilon and gamma must lie in (0, 1)")
        if self.mode not in ("UQ-RMPC", "RMPC"):
            raise ConfigError(f"mode must be UQ-RMPC or RMPC, got {self.mode!r}")
        if self.backup not in ("resolve", "shift"):
            raise ConfigError("backup must be 'resolve' or 'shift'")
        if self.backup_disturbance_index not in ("k-2", "k-1"):
            raise ConfigError("backup_disturbance_index must be 'k-2' or 'k-1'")
        if len(self.u_lv) != 2 or self.u_lv[0] > self.u_lv[1]:
            raise ConfigError("u_lv must be an interval [lo, hi]")

    # derived model -------------------------------------------------------
    @property
    def A(self):
        return np.array([[1.0, self.T], [0.0, 1.0]])

    @property
    def B(self):
        return np.array([[0.0], [self.T]])

    @property
    def W(self):
        return from_vertices_2d(self.W_vertices)

    @property
    def initial_state(self):
        if self.x0 is not None:
            return np.asarray(self.x0, dtype=float)
        x_des = np.array([-self.L, 0.0])
        return np.asarray(self.x_ev, dtype=float) - np.asarray(self.x_lv, dtype=float) - x_des

    def w_true_vertices(self):
        """Vertices of ``Xi_EV + (-Xi_LV) + (-B U_LV)``."""
        b = self.B[:, 0]
        return minkowski_sum_2d(np.asarray(self.xi_ev_vertices),
                                -np.asarray(self.xi_lv_vertices),
                                np.array([-b * u for u in self.u_lv]))

    def controller_options(self, **overrides):
        opts = dict(mode=self.mode, backup=self.backup,
                    backup_disturbance_index=self.backup_disturbance_index,
                    eager_quantification=self.eager_quantification)
        opts.update(overrides)
        return ControllerOptions(**opts)

    def replace(self, **changes):
        new = copy.deepcopy(self)
        for k, v in changes.items():
            if k not in _LAYOUT:
                raise ConfigError(f"unknown config key {k!r}")
            setattr(new, k, v)
        new.validate()
        return new

    # serialisation -------------------------------------------------------
    def to_toml_dict(self):
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            out.setdefault(_LAYOUT[f.name], {})[f.name] = val
        return out

    def to_toml(self):
        return tomli_w.dumps(self.to_toml_dict())

    @classmethod
    def from_toml_dict(cls, data):
        flat = {}
        for section, body in data.items():
            if not isinstance(body, dict):
                raise ConfigError(f"top-level key {section!r} must be a table")
            for key, val in body.items():
                if _LAYOUT.get(key) != section:
                    raise ConfigError(f"unknown key {section}.{key}")
                flat[key] = val
        try:
            return cls(**flat)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, text):
        try:
            return cls.from_toml_dict(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_toml(fh.read())


def default_config():
    return CaseStudyConfig.from_toml(resources.files("uqtube").joinpath("data/casestudy.toml").read_text())


def offline_artifacts(cfg, W=None):
    """Offline tube pipeline for the case study (``W`` defaults to the conservative set)."""
    return build_artifacts(cfg.A, cfg.B, np.asarray(cfg.Q, float), np.asarray(cfg.R, float),
                           np.asarray(cfg.F, float), np.asarray(cfg.G, float),
                           cfg.W if W is None else W, cfg.N, cfg.rho)


# disturbance model -------------------------------------------------------

def uniform_in_polygon(verts, rng, n):
    """``n`` uniform samples from a convex polygon (point and segment allowed)."""
    hull = np.array(convex_hull_2d(verts))
    if len(hull) == 1:
        return np.repeat(hull, n, axis=0)
    if len(hull) == 2:
        s = rng.uniform(size=(n, 1))
        return hull[0] + s * (hull[1] - hull[0])
    lo, hi = hull.min(axis=0), hull.max(axis=0)
    edges = np.roll(hull, -1, axis=0) - hull
    out = np.empty((0, 2))
    while len(out) < n:
        p = rng.uniform(lo, hi, size=(max(2 * (n - len(out)), 16), 2))
        rel = p[:, None, :] - hull[None, :, :]
        inside = np.all(edges[None, :, 0] * rel[:, :, 1] - edges[None, :, 1] * rel[:, :, 0] >= 0, axis=1)
        out = np.vstack([out, p[inside]])
    return out[:n]


def sample_disturbances(cfg, rng, n):
    """``n`` i.i.d. draws of ``xi_EV - xi_LV - B u_LV``."""
    xi_ev = uniform_in_polygon(cfg.xi_ev_vertices, rng, n)
    xi_lv = uniform_in_polygon(cfg.xi_lv_vertices, rng, n)
    u = rng.uniform(cfg.u_lv[0], cfg.u_lv[1], size=n)
    return xi_ev - xi_lv - np.outer(u, cfg.B[:, 0])


def sample_disturbance(cfg, rng):
    return sample_disturbances(cfg, rng, 1)[0]


def optimal_quantified_set(cfg):
    """Smallest homothet of ``W`` covering the true disturbance set."""
    return quantify_batch(np.array(cfg.w_true_vertices()), cfg.W)


def w_true_inside_w(cfg):
    W = cfg.W
    return all(contains(W, v) for v in cfg.w_true_vertices())


# closed loop --------------------------------------------------------------

def initial_log(cfg, rng, n0):
    samples = sample_disturbances(cfg, rng, n0) if n0 else np.zeros((0, 2))
    log0 = DisturbanceLog(cfg.W, samples)
    if cfg.include_origin:
        log0.append(np.zeros(2))
    return log0


def simulate(cfg, ta, rng, n0=None, x0=None, steps=None, options=None):
    """One closed-loop realisation; returns ``(RunRecord, Controller)``."""
    n0 = cfg.n0 if n0 is None else n0
    steps = cfg.steps if steps is None else steps
    x = cfg.initial_state if x0 is None else np.asarray(x0, dtype=float)
    options = options or cfg.controller_options()
    F, G = np.asarray(cfg.F, float), np.asarray(cfg.G, float)
    A, B = cfg.A, cfg.B
    log0 = initial_log(cfg, rng, n0)
    ctrl = Controller(ta, log0, options)
    record = RunRecord()
    for k in range(steps):
        try:
            u, info = ctrl.step(x)
        except (BackupUnavailable, BackupInfeasible) as exc:
            record.failure = f"{type(exc).__name__}: {exc}"
            record.append(k=k, x=x.tolist(), u=None, w=None, alpha=ctrl.qset.alpha if ctrl.qset else 1.0,
                          nu=None, branch="failed", feasible=False, backup=False,
                          status="Infeasible", violation=False, s0=None)
            break
        violation = bool(np.any(F @ x + G @ u > 1.0 + VIOLATION_TOL))
        w = sample_disturbance(cfg, rng)
        record.append(k=k, x=x.tolist(), u=u.tolist(), w=w.tolist(), alpha=info["alpha"],
                      nu=info["nu"], branch=info["branch"], feasible=True, backup=info["backup"],
                      status=info["status"], violation=violation,
                      s0=None if info["s0"] is None else info["s0"].tolist())
        x = A @ x + B @ u + w
    return record, ctrl


@dataclass
class CampaignResult:
    mode: str
    n0: int
    x0: list
    summaries: list = field(default_factory=list)
    alpha_series: list = field(default_factory=list)
    interrupted: bool = False
    elapsed: float = 0.0

    @property
    def n(self):
        return len(self.summaries)

    @property
    def successes(self):
        return sum(s["success"] for s in self.summaries)

    @property
    def success_rate(self):
        return self.successes / self.n if self.n else float("nan")

    def volume_stats(self, W_area):
        """Mean and std of ``vol(W_k)`` per step over realisations."""
        if not self.alpha_series:
            return [], []
        length = max(len(a) for a in self.alpha_series)
        padded = np.array([a + [a[-1]] * (length - len(a)) for a in self.alpha_series if a])
        vol = padded ** 2 * W_area
        return vol.mean(axis=0).tolist(), vol.std(axis=0).tolist()

    def to_dict(self, W_area=None):
        d = {"mode": self.mode, "n0": self.n0, "x0": self.x0, "realisations": self.n,
             "successes": self.successes, "success_rate": self.success_rate,
             "backups": sum(s["backups"] for s in self.summaries),
             "interrupted": self.interrupted, "runs": self.summaries}
        if W_area is not None:
            mean, std = self.volume_stats(W_area)
            d["volume_mean"], d["volume_std"] = mean, std
        return d


def _campaign_worker(args):
    cfg, ta, seed_seq, n0, x0, steps, options = args
    record, _ = simulate(cfg, ta, np.random.default_rng(seed_seq), n0, x0, steps, options)
    return record.summary(), record.column("alpha")


def run_campaign(cfg, ta, mode=None, n_realisations=None, steps=None, n0=None, x0=None,
                 seed=None, workers=None):
    """Independent seeded realisations of the closed loop."""
    mode = mode or cfg.mode
    n_realisations = cfg.n_realisations if n_realisations is None else n_realisations
    n0 = cfg.n0 if n0 is None else n0
    x0 = cfg.initial_state if x0 is None else np.asarray(x0, dtype=float)
    seed = cfg.seed if seed is None else seed
    workers = workers or cfg.workers
    options = cfg.controller_options(mode=mode)
    children = np.random.SeedSequence(seed).spawn(n_realisations)
    jobs = [(cfg, ta, c, n0, x0, steps, options) for c in children]
    result = CampaignResult(mode, n0, np.asarray(x0).tolist())
    t0 = time.perf_counter()
    try:
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                for summary, alphas in pool.map(_campaign_worker, jobs):
                    result.summaries.append(summary)
                    result.alpha_series.append(alphas)
        else:
            for job in jobs:
                summary, alphas = _campaign_worker(job)
                result.summaries.append(summary)
                result.alpha_series.append(alphas)
    except KeyboardInterrupt:
        result.interrupted = True
    result.elapsed = time.perf_counter() - t0
    return result


# set and region studies ----------------------------------------------------

def initial_volume_study(cfg, sizes, n_seeds=30, seed=0):
    """``{size: (mean, std)}`` of ``vol(W_0)`` over seeded initial sample sets."""
    W = cfg.W
    out = {}
    for size in sizes:
        vols = []
        for child in np.random.SeedSequence([seed, size]).spawn(n_seeds):
            rng = np.random.default_rng(child)
            sol = quantify_batch(sample_disturbances(cfg, rng, size), W)
            vols.append(area_2d(sol.qset(W).as_polytope()))
        out[size] = (float(np.mean(vols)), float(np.std(vols)))
    return out


def online_volume_series(cfg, n0, steps, n_seeds=30, seed=0):
    """Per-realisation ``vol(W_k)`` under recursive updates, one new sample per step.

    Disturbances do not depend on the controller, so the series is generated
    from the sample stream alone.
    """
    W = cfg.W
    area_W = area_2d(W)
    series = []
    for child in np.random.SeedSequence(seed).spawn(n_seeds):
        rng = np.random.default_rng(child)
        sol = quantify_batch(sample_disturbances(cfg, rng, n0), W)
        stream = sample_disturbances(cfg, rng, steps)
        vols = [sol.alpha ** 2 * area_W]
        for w in stream:
            sol = quantify_recursive(sol, w, W)
            vols.append(sol.alpha ** 2 * area_W)
        series.append(vols)
    return np.array(series)


def region_volume_estimate(ta, qt, bbox, n_grid):
    """Grid estimate of the feasible-region area inside ``bbox = (lo, hi)``."""
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    xs = lo[0] + (np.arange(n_grid) + 0.5) * (hi[0] - lo[0]) / n_grid
    ys = lo[1] + (np.arange(n_grid) + 0.5) * (hi[1] - lo[1]) / n_grid
    hits = sum(region_member(ta, qt, np.array([x, y])) for x in xs for y in ys)
    return hits / n_grid ** 2 * float(np.prod(hi - lo))


def region_report(cfg, ta, n0=None, seed=None, n_grid=None, ta_true=None):
    """Sets and feasible-region areas for ``W``, ``W_true``, the optimal homothet and ``W_0``."""
    n0 = cfg.n0 if n0 is None else n0
    seed = cfg.seed if seed is None else seed
    n_grid = n_grid or cfg.n_grid
    W = cfg.W
    rng = np.random.default_rng(seed)
    sol0 = quantify_batch(initial_log(cfg, rng, n0), W)
    sol_opt = optimal_quantified_set(cfg)
    if ta_true is None:
        ta_true = offline_artifacts(cfg, from_vertices_2d(cfg.w_true_vertices()))
    tubes = {
        "F_MPC": (ta, conservative_tube(ta)),
        "F_true": (ta_true, conservative_tube(ta_true)),
        "F_opt": (ta, quantified_tube(ta, sol_opt.qset(W))),
        "F_0": (ta, quantified_tube(ta, sol0.qset(W))),
    }
    boxes = [region_bounding_box(t, q) for t, q in tubes.values()]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    volumes = {name: region_volume_estimate(t, q, (lo, hi), n_grid) for name, (t, q) in tubes.items()}
    return {
        "n0": n0, "seed": seed, "n_grid": n_grid, "bbox": [lo.tolist(), hi.tolist()],
        "sets": {
            "W": [p.tolist() for p in vertices_2d(W)],
            "W_true": [p.tolist() for p in cfg.w_true_vertices()],
            "W_opt": [p.tolist() for p in vertices_2d(sol_opt.qset(W).as_polytope())],
            "W_0": [p.tolist() for p in vertices_2d(sol0.qset(W).as_polytope())],
        },
        "alpha": {"W_opt": sol_opt.alpha, "W_0": sol0.alpha},
        "volumes": volumes,
    }
