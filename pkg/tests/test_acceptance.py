"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected by conftest.py and shown in the terminal summary.
"""
import math
import time

import mpmath as mp
import numpy as np

import oracles
from conftest import ACCEPTANCE_LINES
from korteweg_lab import experiments as ex
from korteweg_lab.lagrangian import AdvectingVelocity, integrate_flow, jacobian_det
from korteweg_lab.nonlinear import PressureLaw, convergence_study, linear_trajectory_order, symbol_gap_order
from korteweg_lab.params import (
    PhysicalParams,
    bracket_chain_holds,
    detect_eps0,
    solve_a,
    solve_x_eps,
)
from korteweg_lab.propagator import (
    DEGENERATE,
    REAL,
    matrix_A,
    mode_symbol,
    propagator_entries,
    velocity_identity_check,
)
from korteweg_lab.spectral import PeriodicGrid, random_band_limited


def _report(n, ok, detail, elapsed, budget):
    ok_time = elapsed < budget
    status = "PASS" if (ok and ok_time) else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {n}: {status} {detail} [{elapsed:.1f} s, budget {budget:g} s]")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail
    assert ok_time, f"runtime {elapsed:.1f} s exceeds {budget} s"


def test_criterion_01_threshold_asymptotics():
    t0 = time.perf_counter()
    x_lim = solve_x_eps(PhysicalParams.from_nu(2.0, 0.5, 1.0, 1e-3))
    x_br = solve_x_eps(PhysicalParams.from_nu(2.0, 1.0, 1.0, 0.01))
    pq = PhysicalParams.from_nu(1.0, 1.0, 1.0, 1e-3)
    e2x = pq.epsilon ** 2 * solve_x_eps(pq)
    lo, hi = oracles.REFERENCE_BRACKET
    checks = [
        abs(x_lim - oracles.REFERENCE_X_LIMIT) <= 0.01 * oracles.REFERENCE_X_LIMIT,
        lo < x_br < hi,
        abs(e2x - oracles.REFERENCE_A_QUARTER) <= 0.01 * oracles.REFERENCE_A_QUARTER,
        abs(solve_a(0.25) - oracles.A_QUARTER) <= 1e-9,
        abs(x_br - oracles.X_EPS_P1_NU2_K1_E001) <= 1e-9 * x_br,
    ]
    detail = f"x_eps(1e-3)={x_lim:.6f}, x_eps(0.01)={x_br:.3f}, eps^2 x_eps(M=1/4)={e2x:.5f}"
    _report(1, all(checks), detail, time.perf_counter() - t0, 1.0)


def test_criterion_02_bracket_chain():
    t0 = time.perf_counter()
    bad = []
    for p in (0.5, 1.0, 2.0):
        for nu in (1.0, 2.0, 4.0):
            for kappa in (0.25, 1.0, 4.0):
                pr = PhysicalParams.from_nu(nu, kappa, p, 1.0)
                e0 = detect_eps0(pr)
                for e in np.logspace(-4, math.log10(e0), 12):
                    if not bracket_chain_holds(pr.with_eps(float(e))):
                        bad.append((p, nu, kappa, float(e)))
    _report(2, not bad, f"27 parameter sets, violations={len(bad)}", time.perf_counter() - t0, 1.0)


def _mp_expm(A, t):
    mp.mp.dps = 40
    M = mp.matrix([[mp.mpf(float(A[0, 0])), mp.mpf(float(A[0, 1]))],
                   [mp.mpf(float(A[1, 0])), mp.mpf(float(A[1, 1]))]]) * mp.mpf(t)
    E = mp.expm(M)
    return np.array([[float(E[0, 0]), float(E[0, 1])], [float(E[1, 0]), float(E[1, 1])]])


def _propagator_samples(n=200, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    sets = [(2.0, 0.5, 1.0), (2.0, 1.0, 1.0), (1.0, 1.0, 1.0), (1.0, 0.2, 2.0), (3.0, 1.5, 0.5)]
    for i in range(n):
        nu, kappa, p = sets[i % len(sets)]
        eps = float(10 ** rng.uniform(-2, 0))
        pr = PhysicalParams.from_nu(nu, kappa, p, eps)
        if i % 4 == 0:
            # neighbourhood of the discriminant zero at xi^2 = x_eps
            xi2 = solve_x_eps(pr) * (1.0 + float(rng.choice([-1, 1])) * 10 ** rng.uniform(-13, -5))
        else:
            xi2 = float(10 ** rng.uniform(-3, 5))
        t = float(10 ** rng.uniform(-3, 1))
        out.append((pr, math.sqrt(xi2), t))
    return out


def test_criterion_03_propagator_exactness():
    t0 = time.perf_counter()
    worst, worst_deg, n_deg, n_real = 0.0, 0.0, 0, 0
    for pr, xi, t in _propagator_samples():
        sym = mode_symbol(xi, pr)
        E = np.array([float(x) for x in propagator_entries(xi, sym.a, pr.nu, t)]).reshape(2, 2)
        ref = _mp_expm(matrix_A(xi, pr), t)
        err = np.max(np.abs(E - ref)) / max(1.0, np.max(np.abs(ref)))
        if sym.regime == DEGENERATE:
            worst_deg = max(worst_deg, err)
            n_deg += 1
        else:
            worst = max(worst, err)
            n_real += sym.regime == REAL
    ok = worst <= 1e-10 and worst_deg <= 1e-8
    detail = f"max error {worst:.2e} (degenerate window {worst_deg:.2e}, {n_deg} samples; {n_real} real)"
    _report(3, ok, detail, time.perf_counter() - t0, 5.0)


def test_criterion_04_velocity_identity():
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    for pr, xi, t in _propagator_samples():
        sym = mode_symbol(xi, pr)
        if sym.regime == REAL:
            worst = max(worst, velocity_identity_check(sym))
            count += 1
    _report(4, count > 0 and worst <= 1e-12, f"{count} real-regime samples, max residual {worst:.2e}",
            time.perf_counter() - t0, 5.0)


def test_criterion_05_hybrid_norm_equivalence():
    t0 = time.perf_counter()
    cfg = ex.validate_config({"experiment": "norm_equivalence", "seed": 5})
    res = ex.run(cfg)
    widths = res.table.column("width")
    drifts = res.table.column("drift")
    ok = max(widths) <= 20.0 and max(drifts) <= 2.0 and len(res.table) == 12
    _report(5, ok, f"max width {max(widths):.3g}, max half-to-half drift {max(drifts):.3g}",
            time.perf_counter() - t0, 30.0)


CANONICAL_SETS = [(2.0, 0.5, 1.0), (2.0, 1.0, 1.0), (1.0, 1.0, 1.0)]  # (nu, kappa, p): M = 2, 1, 1/4


def test_criterion_06_estimate_verifiers():
    t0 = time.perf_counter()
    failed = []
    summary = []
    for nu, kappa, p in CANONICAL_SETS:
        raw = {"experiment": "propagator_verify", "params": {"nu": nu, "kappa": kappa, "p": p, "epsilon": 0.1}}
        res = ex.run(ex.validate_config(raw))
        for c in res.checks:
            if not c.passed:
                failed.append(f"M={nu * nu / (4 * kappa):g}:{c.name}({c.detail})")
        worst = max(ex.variation(v) for v in _groups(res.table).values())
        summary.append(f"M={nu * nu / (4 * kappa):g} worst variation {worst:.3g}")
    detail = "; ".join(summary) + ("" if not failed else " | failing: " + ", ".join(failed))
    _report(6, not failed, detail, time.perf_counter() - t0, 60.0)


def _groups(table):
    g = {}
    for r in table.rows:
        g.setdefault((r["estimate"], r["regime"]), []).append(r["fitted_C"])
    return g


def test_criterion_07_jacobian_identity():
    t0 = time.perf_counter()
    grid = PeriodicGrid(2, 32)
    flows = {
        "constant": AdvectingVelocity.constant([0.3, -0.2]),
        "shear": AdvectingVelocity.shear(grid, 0.5),
        "rotation": AdvectingVelocity.rotation(0.7),
        "random": AdvectingVelocity.random(grid, 3, kmax=4.0, amplitude=0.3),
    }
    gaps = {}
    for name, v in flows.items():
        fl = integrate_flow(v, 0.5, 64, grid)
        det_fd, det_exp = jacobian_det(fl)
        gaps[name] = float(np.max(np.abs(det_fd - det_exp)))
    ok = max(gaps.values()) <= 1e-6
    _report(7, ok, ", ".join(f"{k} {g:.1e}" for k, g in gaps.items()), time.perf_counter() - t0, 10.0)


def test_criterion_08_commutator_bound():
    t0 = time.perf_counter()
    res = ex.run(ex.validate_config({"experiment": "flow_commutator"}))
    failed = [f"{c.name}({c.detail})" for c in res.checks if not c.passed]
    sums = res.table.column("sum_rho")
    detail = f"sum_rho range [{min(sums):.3g}, {max(sums):.3g}]; " + "; ".join(c.detail for c in res.checks if c.detail)
    _report(8, not failed, detail + ("" if not failed else " | failing: " + ", ".join(failed)),
            time.perf_counter() - t0, 120.0)


def test_criterion_09_linear_convergence():
    t0 = time.perf_counter()
    _, sym_order = symbol_gap_order([0.05, 0.025, 0.0125, 0.00625], kmax=4.0)
    grid = PeriodicGrid(1, 64)
    rng = np.random.default_rng(11)
    q0 = random_band_limited(grid, rng, kmax=4.0)
    u0 = random_band_limited(grid, rng, kmax=4.0)
    pr = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.1)
    _, traj_order = linear_trajectory_order(q0, u0, pr, [0.2, 0.1, 0.05, 0.025], 1.0, 20, 0.5)
    ok = abs(sym_order - 2.0) <= 0.05 and traj_order >= 1.9
    _report(9, ok, f"symbol gap order {sym_order:.4f}, trajectory order {traj_order:.3f}",
            time.perf_counter() - t0, 10.0)


def test_criterion_10_nonlinear_convergence():
    t0 = time.perf_counter()
    grid = PeriodicGrid(1, 64)
    rng = np.random.default_rng(0)
    q0 = random_band_limited(grid, rng, kmax=4.0, amplitude=1e-2)
    u0 = random_band_limited(grid, rng, kmax=4.0, amplitude=1e-2)
    pr = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.1)
    eps = [0.2, 0.1, 0.05, 0.025]
    table = convergence_study(q0, u0, pr, eps, 1.0, 0.5, 100, PressureLaw.gamma_law(2.0, 1.0))
    d = table.column("distance")
    order = table.rows[0]["observed_order"]
    mono = all(b < a for a, b in zip(d, d[1:]))
    _report(10, mono and order >= 0.9, "distances " + ", ".join(f"{x:.3g}" for x in d) + f"; order {order:.3f}",
            time.perf_counter() - t0, 300.0)


def test_criterion_11_apriori_inequality():
    t0 = time.perf_counter()
    res = ex.run(ex.validate_config({"experiment": "apriori_check"}))
    C = res.table.column("fitted_C")
    finite = all(math.isfinite(c) and c > 0 for c in C)
    var = ex.variation(C)
    detail = f"{len(C)} sweep points, fitted C in [{min(C):.3g}, {max(C):.3g}], variation {var:.3g}"
    _report(11, finite and var <= 5.0, detail, time.perf_counter() - t0, 300.0)
