import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from korteweg_lab.params import (
    BracketError,
    PhysicalParams,
    bisect_increasing,
    bracket_chain_holds,
    detect_eps0,
    g_eps,
    gammas,
    h,
    h_inverse,
    m_value,
    solve_a,
    solve_x_eps,
    solve_y_eps,
    threshold_report,
    x_eps_asymptote,
)

pos = st.floats(min_value=0.1, max_value=10.0)
eps_st = st.floats(min_value=1e-3, max_value=2.0)


@st.composite
def params_st(draw):
    return PhysicalParams.from_nu(draw(pos), draw(pos), draw(pos), draw(eps_st))


def test_h_limits_and_values():
    assert h(0.0) == 1.0
    assert h(1e-12) == pytest.approx(1.0, abs=1e-12)
    assert h(1.0) == pytest.approx(1 - math.exp(-1), rel=1e-15)
    assert np.allclose(h(np.array([0.0, 2.0])), [1.0, (1 - math.exp(-2)) / 2])
    with pytest.raises(ValueError):
        h(-1.0)


@given(st.floats(min_value=0.0, max_value=500.0), st.floats(min_value=1e-6, max_value=50.0))
def test_h_strictly_decreasing(x, dx):
    assert h(x + dx) < h(x)


@given(st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_h_inverse_roundtrip(level):
    assert h(h_inverse(level)) == pytest.approx(level, rel=1e-9, abs=1e-12)


def test_frozen_roots():
    assert solve_a(0.25) == pytest.approx(oracles.A_QUARTER, rel=1e-11)
    assert h_inverse(0.5) == pytest.approx(oracles.A_HALF, rel=1e-11)
    pr = PhysicalParams.from_nu(2.0, 0.5, 1.0, 1e-3)
    assert solve_x_eps(pr) == pytest.approx(oracles.X_EPS_P1_NU2_K05_E0001, rel=1e-11)
    pq = PhysicalParams.from_nu(1.0, 1.0, 1.0, 1e-3)
    assert pq.epsilon ** 2 * solve_x_eps(pq) == pytest.approx(oracles.E2X_M_QUARTER_E0001, rel=1e-10)


@given(params_st())
def test_g_increasing_on_grid(pr):
    x = np.logspace(-4, 6, 400)
    assert np.all(np.diff(g_eps(x, pr)) > 0)


@given(params_st(), st.floats(min_value=1.01, max_value=10.0))
def test_threshold_monotone_in_eps(pr, factor):
    bigger = pr.with_eps(pr.epsilon * factor)
    x = np.logspace(-2, 4, 50)
    assert np.all(g_eps(x, bigger) > g_eps(x, pr))
    # the shift of the root can fall below the bisection tolerance when eps^2 x is tiny
    assert solve_x_eps(bigger) <= solve_x_eps(pr) * (1 + 1e-11)


@given(params_st())
def test_root_residual_small(pr):
    x = solve_x_eps(pr)
    dx = 1e-6 * x
    slope = (g_eps(x + dx, pr) - g_eps(x - dx, pr)) / (2 * dx)
    assert abs(g_eps(x, pr)) <= 1e-10 * max(1.0, slope * x)


def test_y_eps_level():
    for nu, kappa in ((2.0, 0.5), (1.0, 1.0)):
        pr = PhysicalParams.from_nu(nu, kappa, 1.0, 0.05)
        y = solve_y_eps(pr)
        assert math.sqrt(g_eps(y, pr)) == pytest.approx(m_value(pr.M), rel=1e-9)


@pytest.mark.parametrize("nu,kappa,p", [(2.0, 0.5, 1.0), (2.0, 1.0, 1.0), (1.0, 1.0, 1.0), (4.0, 0.25, 2.0)])
def test_chain_below_eps0(nu, kappa, p):
    pr = PhysicalParams.from_nu(nu, kappa, p, 1.0)
    e0 = detect_eps0(pr)
    assert e0 > 0
    for e in (1.0, 0.1, 0.01, 0.001):
        if e <= e0:
            assert bracket_chain_holds(pr.with_eps(e))


def test_asymptotes():
    # M > 1, M = 1, M < 1
    for nu, kappa in ((2.0, 0.5), (2.0, 1.0), (1.0, 1.0)):
        pr = PhysicalParams.from_nu(nu, kappa, 1.0, 1e-3)
        assert solve_x_eps(pr) == pytest.approx(x_eps_asymptote(pr), rel=0.01)


def test_report_and_gammas():
    rep = threshold_report(PhysicalParams.from_nu(2.0, 0.5, 1.0, 0.1))
    assert rep.a_M is None
    assert rep.gamma1 == pytest.approx(oracles.A_HALF, rel=1e-10)
    g1, g2 = gammas(0.25)
    assert g1 < g2
    assert set(rep.as_row()) == {"x_eps", "y_eps", "gamma1", "gamma2", "m", "a_M", "asymptote"}


def test_invalid_params():
    with pytest.raises(ValueError):
        PhysicalParams.from_nu(2.0, -1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        PhysicalParams(mu=1.0, lambda_=-3.0, kappa=1.0, p=1.0, epsilon=0.1)
    with pytest.raises(ValueError):
        PhysicalParams.from_nu(2.0, 1.0, 1.0, float("nan"))
    with pytest.raises(ValueError):
        solve_a(1.5)


def test_bisection_bracket_failure():
    with pytest.raises(BracketError):
        bisect_increasing(lambda x: -1.0)
    assert bisect_increasing(lambda x: x - 3.0) == pytest.approx(3.0, rel=1e-11)
