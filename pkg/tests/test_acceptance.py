"""Acceptance criteria for the case study, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
(see ``conftest.py``) and asserts at the stated tolerance.
"""
import time

import numpy as np
import pytest

from uqtube.lp import LpStatus, feasible_point, solve_lp
from uqtube.poly import QuantifiedSet, area_2d, convex_hull_2d, minkowski_sum_2d, quantified_contains, support
from uqtube.qp import KKT_TOL, QuadraticProgram, kkt_residuals, solve_qp
from uqtube.qtube import quantified_tube, tightening_hstar, update_tube
from uqtube.sim import (initial_volume_study, optimal_quantified_set, region_report, run_campaign,
                        sample_disturbances, simulate)
from uqtube.tube import admissible
from uqtube.uq import quantify_batch, sample_complexity

from test_lp import kkt_stationarity, random_lp
from test_qp import random_qp

W_VERTS = np.array([(-0.5, -0.2), (0.5, -0.2), (0.5, 0.2), (-0.5, 0.2)])

pytestmark = pytest.mark.acceptance


def random_qsets(W, n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield QuantifiedSet(W, rng.uniform([-0.5, -0.2], [0.5, 0.2]), float(rng.uniform()))


def check(report, number, ok, detail):
    report(number, ok, detail)
    assert ok, detail


def test_c01_rpi_property(ta, report):
    t0 = time.perf_counter()
    tube, Phi = ta.tube, ta.gs.Phi
    theta = 2 * np.pi * np.arange(64) / 64
    worst = -np.inf
    for f in np.column_stack([np.cos(theta), np.sin(theta)]):
        worst = max(worst, tube.support(Phi.T @ f) + support(ta.W, f) - tube.support(f))
    elapsed = time.perf_counter() - t0
    check(report, 1, worst <= 1e-8 and elapsed < 1.0,
          f"max slack h(PhiS+W)-h(S) = {worst:.3e} over 64 directions, {elapsed:.2f} s")


def test_c02_quantified_invariance(ta, report):
    t0 = time.perf_counter()
    Phi, W = ta.gs.Phi, ta.W
    s_verts = ta.tube.scale * np.array(minkowski_sum_2d(*[W_VERTS @ P.T for P in ta.tube.generators]))
    worst = -np.inf
    for qs in random_qsets(W, 100, seed=20):
        qt = update_tube(ta, qs)
        S_hat = np.array(convex_hull_2d(qs.alpha * s_verts + qt.t))
        W_hat = (1 - qs.alpha) * qs.v + qs.alpha * W_VERTS
        image = np.array(minkowski_sum_2d(S_hat @ Phi.T, W_hat))
        if len(S_hat) < 3:
            worst = max(worst, np.abs(image - S_hat).max())
            continue
        edges = np.roll(S_hat, -1, axis=0) - S_hat
        for n in np.column_stack([edges[:, 1], -edges[:, 0]]):
            n = n / np.linalg.norm(n)
            worst = max(worst, (image @ n).max() - (S_hat @ n).max())
    elapsed = time.perf_counter() - t0
    check(report, 2, worst <= 1e-8 and elapsed < 10.0,
          f"max slack {worst:.3e} over 100 random (v, alpha), {elapsed:.2f} s")


def test_c03_closed_form_tightening(ta, report):
    from uqtube.lp import LinearProgram
    tube, FK, V = ta.tube, ta.gs.FK, ta.W.V
    r = tube.r
    A_ub = np.kron(np.eye(r), V)
    worst = 0.0
    for qs in random_qsets(ta.W, 100, seed=30):
        qt = update_tube(ta, qs)
        h = tightening_hstar(ta, qt)
        for j, row in enumerate(FK):
            c = np.concatenate([qs.alpha * tube.scale * (P.T @ row) for P in tube.generators])
            if not np.any(c):
                direct = row @ qt.t
            else:
                res = solve_lp(LinearProgram(c, A_ub, np.ones(A_ub.shape[0])))
                assert res.status is LpStatus.OPTIMAL
                direct = res.value + row @ qt.t
            worst = max(worst, abs(h[j] - direct))
    check(report, 3, worst <= 1e-8, f"max |h* closed form - lifted LP| = {worst:.3e} on 100 sets")


def test_c04_horizon_sufficiency(ta, report):
    gs = ta.gs
    bad = []
    for i, qs in enumerate(random_qsets(ta.W, 20, seed=40)):
        qt = quantified_tube(ta, qs)
        if qt.nu < ta.nu_s or not admissible(gs.Psi, gs.Fbar, qt.h_star, qt.nu):
            bad.append(i)
    check(report, 4, not bad, f"{20 - len(bad)}/20 horizons admissible and >= nu_s={ta.nu_s}")


def test_c05_scenario_risk_bound(cfg, report):
    t0 = time.perf_counter()
    eps, gamma = 0.1, 0.05
    n_train = sample_complexity(eps, gamma, 2)
    W = cfg.W
    good = 0
    freqs = []
    for child in np.random.SeedSequence(50).spawn(100):
        rng = np.random.default_rng(child)
        sol = quantify_batch(sample_disturbances(cfg, rng, n_train), W)
        test = sample_disturbances(cfg, rng, 100_000)
        rhs = sol.qset(W).rhs
        freq = float(np.mean(np.any(test @ W.V.T > rhs + 1e-8, axis=1)))
        freqs.append(freq)
        good += freq <= eps
    elapsed = time.perf_counter() - t0
    check(report, 5, good >= 95 and elapsed < 120,
          f"N={n_train}: {good}/100 trials with violation <= {eps} (max {max(freqs):.4f}), {elapsed:.1f} s")


def test_c06_quantification_convergence(cfg, report):
    t0 = time.perf_counter()
    sizes = [5, 50, 500, 2000]
    study = initial_volume_study(cfg, sizes, n_seeds=30, seed=60)
    means = [float(study[s][0]) for s in sizes]
    v_opt = float(area_2d(optimal_quantified_set(cfg).qset(cfg.W).as_polytope()))
    monotone = all(a <= b for a, b in zip(means, means[1:]))
    bounded = max(means) <= v_opt + 1e-9
    ratio = means[-1] / v_opt
    elapsed = time.perf_counter() - t0
    detail = (f"mean vol ratios {[round(m / v_opt, 3) for m in means]} for |I0|={sizes}, "
              f"monotone={monotone}, bounded={bounded}, ratio@2000={ratio:.3f} (need >= 0.90), {elapsed:.1f} s")
    check(report, 6, monotone and bounded and ratio >= 0.9 and elapsed < 300, detail)


TABLE_ROWS = [(10, 6.815, 0.80), (100, 6.582, 0.95), (500, 6.401, 1.0), (2000, 6.249, 1.0)]


def test_c07_table_success_rates(cfg, ta, report):
    t0 = time.perf_counter()
    rates = {}
    for n0, v0, _ in TABLE_ROWS:
        res = run_campaign(cfg, ta, mode="UQ-RMPC", n_realisations=50, steps=20, n0=n0, x0=[-14.9, v0],
                           seed=cfg.seed)
        rates[n0] = res.success_rate
    ok = all(rates[n0] >= need for n0, _, need in TABLE_ROWS)
    elapsed = time.perf_counter() - t0
    check(report, 7, ok and elapsed < 600, f"success rates {rates} over 50 realisations, {elapsed:.1f} s")


def test_c08_region_gap(cfg, ta, report):
    small = region_report(cfg, ta, n0=500, seed=cfg.seed, n_grid=40)
    large = region_report(cfg, ta, n0=20000, seed=cfg.seed, n_grid=40)
    v = small["volumes"]
    factor = v["F_0"] / v["F_MPC"]
    rel = abs(large["volumes"]["F_0"] - large["volumes"]["F_opt"]) / large["volumes"]["F_opt"]
    check(report, 8, factor >= 1.5 and rel <= 0.05,
          f"vol(F_0|500)/vol(F_MPC) = {factor:.2f}, |vol(F_0|20000) - vol(F_opt)|/vol(F_opt) = {rel:.3f}")


def _in_cross_section(ta, qt, x):
    tube, V = ta.tube, ta.W.V
    r = tube.r
    A_eq = np.hstack([qt.alpha * tube.scale * P for P in tube.generators])
    return feasible_point(np.kron(np.eye(r), V), np.ones(r * len(V)), A_eq, x - qt.t, n=2 * r) is not None


def test_c09_closed_loop(cfg, ta, report):
    record, ctrl = simulate(cfg, ta, np.random.default_rng(cfg.seed), n0=100, x0=[-12.0, 5.0], steps=40)
    # terminal quantified tube from every sample seen by the end of the run
    qt = quantified_tube(ta, quantify_batch(ctrl.log, ta.W))
    inside = [_in_cross_section(ta, qt, np.asarray(x)) for x in record.states()[-10:]]
    u_max = float(np.abs(record.inputs()).max())
    check(report, 9, record.success and all(inside) and u_max <= 2.0,
          f"{sum(inside)}/10 final states in the terminal tube (alpha={qt.alpha:.3f}), max |u| = {u_max:.4f}")


def test_c10_equivalence_gate(cfg, ta, report):
    x0 = [-3.0, 1.0]
    a, _ = simulate(cfg, ta, np.random.default_rng(100), n0=100, x0=x0, steps=50,
                    options=cfg.controller_options(force_alpha_one=True))
    b, _ = simulate(cfg, ta, np.random.default_rng(100), n0=100, x0=x0, steps=50,
                    options=cfg.controller_options(mode="RMPC"))
    diff = float(np.abs(a.inputs() - b.inputs()).max()) if len(a) == len(b) == 50 else np.inf
    check(report, 10, a.success and b.success and diff <= 1e-10, f"max input difference {diff:.3e} over 50 steps")


def test_c11_solver_suites(report):
    lp_bad = qp_bad = 0
    for seed in range(100):
        lp = random_lp(np.random.default_rng(seed), seed)
        res = solve_lp(lp)
        if res.optimal and kkt_stationarity(lp, res.x) > 1e-7:
            lp_bad += 1
        qp = random_qp(seed)
        qres = solve_qp(qp)
        if qres.optimal and max(kkt_residuals(qp, qres)) > KKT_TOL:
            qp_bad += 1
        elif not qres.optimal and feasible_point(qp.A_ub, qp.b_ub, qp.A_eq, qp.b_eq, n=qp.n) is not None:
            qp_bad += 1
    check(report, 11, lp_bad == 0 and qp_bad == 0,
          f"LP KKT failures {lp_bad}/100, QP KKT failures {qp_bad}/100 (oracle agreement in test_lp/test_qp)")


def test_soft_step_time(cfg, ta, report):
    record, ctrl = simulate(cfg, ta, np.random.default_rng(1), n0=100, steps=1)
    t0 = time.perf_counter()
    record, _ = simulate(cfg, ta, np.random.default_rng(1), n0=100, steps=40)
    mean = (time.perf_counter() - t0) / 40
    check(report, "timing", mean < 0.05, f"mean time per closed-loop step {1000 * mean:.1f} ms (soft limit 50 ms)")
