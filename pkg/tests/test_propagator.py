import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from korteweg_lab.params import PhysicalParams, solve_x_eps
from korteweg_lab.propagator import (
    OSCILLATORY,
    REAL,
    LinearPropagator,
    ModeState,
    capillary_coefficient,
    duhamel_evolve,
    evolve_mode,
    high_frequency_damping,
    matrix_A,
    mode_symbol,
    propagator_entries,
    verify_pointwise_bounds,
    verify_time_estimates,
)
from korteweg_lab.spectral import PeriodicGrid, random_band_limited

pos = st.floats(min_value=0.2, max_value=5.0)


@st.composite
def params_st(draw):
    return PhysicalParams.from_nu(draw(pos), draw(pos), draw(pos), draw(st.floats(min_value=1e-2, max_value=1.0)))


@given(params_st())
def test_regime_switch_at_x_eps(pr):
    x = solve_x_eps(pr)
    assert mode_symbol(math.sqrt(x * (1 - 1e-6)), pr).regime == OSCILLATORY
    assert mode_symbol(math.sqrt(x * (1 + 1e-6)), pr).regime == REAL


@given(params_st(), st.floats(min_value=-3, max_value=4))
def test_strict_dissipativity(pr, lx):
    sym = mode_symbol(10 ** lx, pr)
    assert sym.lambda_plus.real < 0 and sym.lambda_minus.real < 0


@given(params_st())
def test_continuity_across_switch(pr):
    x = solve_x_eps(pr)
    xi = math.sqrt(x)
    a = float(capillary_coefficient(x, pr))
    t = 1.0 / (pr.nu * x)
    # move a so that the normalised discriminant is +-1e-8 on either side
    da = 1e-8 * pr.nu ** 2 * x / 4.0
    left = np.array(propagator_entries(xi, a + da, pr.nu, t))
    right = np.array(propagator_entries(xi, a - da, pr.nu, t))
    assert np.max(np.abs(left - right) / np.maximum(1.0, np.abs(left))) <= 1e-6


@given(params_st(), st.floats(min_value=-2, max_value=3), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_semigroup(pr, lx, t1, t2):
    sym = mode_symbol(10 ** lx, pr)
    s0 = ModeState(1.0 + 0.5j, -0.3 + 0.2j)
    a = evolve_mode(evolve_mode(s0, sym, t1), sym, t2)
    b = evolve_mode(s0, sym, t1 + t2)
    assert abs(a.q_hat - b.q_hat) <= 1e-10 * max(1, abs(b.q_hat)) + 1e-12
    assert abs(a.v_hat - b.v_hat) <= 1e-10 * max(1, abs(b.v_hat)) + 1e-12


def test_matches_scipy_expm():
    pr = PhysicalParams.from_nu(2.0, 1.0, 1.0, 0.1)
    for xi in (0.1, 1.0, math.sqrt(solve_x_eps(pr)) * 1.1, 30.0):
        for t in (0.01, 0.3, 2.0):
            sym = mode_symbol(xi, pr)
            E = np.array(propagator_entries(xi, sym.a, pr.nu, t)).reshape(2, 2)
            assert np.allclose(E, expm(matrix_A(xi, pr) * t), rtol=1e-9, atol=1e-12)


def test_energy_decay_sampled_modes():
    pr = PhysicalParams.from_nu(2.0, 0.5, 1.0, 0.1)
    ts = np.linspace(0, 5, 200)
    for xi in (0.3, 2.0, 20.0):
        sym = mode_symbol(xi, pr)
        s0 = ModeState(1.0, 0.0)
        # the symmetrised energy a|q|^2 + |v|^2 is a Lyapunov function of the mode system
        e = []
        for t in ts:
            s = evolve_mode(s0, sym, t)
            e.append(sym.a * abs(s.q_hat) ** 2 + abs(s.v_hat) ** 2)
        assert np.all(np.diff(e) <= 1e-12)


def test_local_limit_of_symbol():
    xi = 3.0
    base = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.1)
    loc = float(capillary_coefficient(xi ** 2, base, local=True))
    gaps = [abs(float(capillary_coefficient(xi ** 2, base.with_eps(e))) - loc) for e in (1e-2, 1e-3, 1e-4)]
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1] and gaps[2] < 1e-6


def test_field_propagator_keeps_mean_and_matches_modes():
    grid = PeriodicGrid(1, 32)
    pr = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.2)
    rng = np.random.default_rng(0)
    q = random_band_limited(grid, rng)
    u = random_band_limited(grid, rng)
    E = LinearPropagator(grid, pr, 0.1)
    q1, u1 = E.apply(q, u)
    q2, u2 = duhamel_evolve(q, u, pr, 0.2, 2)
    q3, u3 = E.apply(q1, u1)
    assert (q3 - q2.fields[-1]).norm() <= 1e-12
    assert (u3 - u2.fields[-1]).norm() <= 1e-12
    assert abs(q1.mean_coeff[0]) == 0


def test_duhamel_forcing_is_linear():
    grid = PeriodicGrid(1, 16)
    pr = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.3)
    zero = random_band_limited(grid, np.random.default_rng(1), kmax=3) * 0.0
    fq = random_band_limited(grid, np.random.default_rng(2), kmax=3)
    q1, u1 = duhamel_evolve(zero, zero, pr, 1.0, 10, F=lambda t: fq * math.cos(t))
    q2, u2 = duhamel_evolve(zero, zero, pr, 1.0, 10, F=lambda t: fq * (2 * math.cos(t)))
    assert q1.fields[-1].norm() > 0
    assert (q2.fields[-1] - q1.fields[-1] * 2.0).norm() <= 1e-13
    assert (u2.fields[-1] - u1.fields[-1] * 2.0).norm() <= 1e-13


def test_estimate_tables():
    pr = PhysicalParams.from_nu(2.0, 1.0, 1.0, 0.1)
    t = verify_pointwise_bounds(pr, range(-2, 5), n_xi=3)
    assert len(t) > 0 and set(t.column("regime")) <= {"low", "medium", "high"}
    assert all(math.isfinite(c) for c in t.column("fitted_C"))
    te = verify_time_estimates(pr, range(-2, 5), n_xi=3)
    assert set(te.column("regime")) <= {"low", "high"}
    assert len(verify_pointwise_bounds(pr, range(-2, 5), n_xi=0)) == 0


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_high_frequency_damping_envelope(eps):
    pr = PhysicalParams.from_nu(2.0, 0.5, 1.0, eps)
    measured, claimed = high_frequency_damping(pr, 50.0 / eps)
    assert measured >= claimed
