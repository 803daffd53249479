import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from korteweg_lab.lagrangian import (
    AdvectingVelocity,
    capillary_commutator_IIj,
    capillary_remainder_Ij,
    capillary_remainder_Rj,
    compose,
    exp_gap_bound_holds,
    flow_constant,
    flow_rate_ratio,
    flow_time_for_smallness,
    integrate_flow,
    jacobian_det,
    remainder_R3_chain_rule_1d,
    system_remainders,
    verify_commutator_bound,
)
from korteweg_lab.littlewood_paley import DyadicPartition
from korteweg_lab.params import PhysicalParams
from korteweg_lab.spectral import PeriodicGrid, apply_multiplier, gradient, random_band_limited


def _shift(f, a):
    """f(. + a) as an exact Fourier phase."""
    xi = f.grid.wavevectors()
    return apply_multiplier(f, np.exp(1j * np.tensordot(np.asarray(a), xi, axes=1)))


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_exp_gap_inequality(x, y):
    assert exp_gap_bound_holds(x, y)


def test_translation_flow_is_exact_shift():
    grid = PeriodicGrid(1, 32)
    f = random_band_limited(grid, np.random.default_rng(0))
    fl = integrate_flow(AdvectingVelocity.constant([0.4]), 1.0, 8, grid)
    assert (compose(f, fl) - _shift(f, [0.4])).norm() <= 1e-12


@pytest.mark.parametrize("name", ["constant", "shear", "wave", "rotation", "random"])
def test_jacobian_det_formula(name):
    grid = PeriodicGrid(2, 16)
    v = {
        "constant": AdvectingVelocity.constant([0.2, 0.1]),
        "shear": AdvectingVelocity.shear(grid, 0.4),
        "wave": AdvectingVelocity.wave(grid, 0.3),
        "rotation": AdvectingVelocity.rotation(0.5),
        "random": AdvectingVelocity.random(grid, 1, kmax=3.0, amplitude=0.3),
    }[name]
    fl = integrate_flow(v, 0.5, 48, grid)
    det_fd, det_exp = jacobian_det(fl)
    assert np.max(np.abs(det_fd - det_exp)) <= 1e-6
    if v.periodic:
        assert fl.roundtrip_error() <= 1e-6


def test_flow_bounds_and_rate_ratio():
    grid = PeriodicGrid(1, 32)
    v = AdvectingVelocity.wave(grid, 0.5)
    fl = integrate_flow(v, 0.4, 32)
    C = flow_constant(fl)
    assert 0 < C <= 2.0
    D = np.abs(fl.jacobian("forward")[0, 0])
    assert math.log(D.max()) / fl.V <= 2.0
    r = flow_rate_ratio(fl, 0.1, np.random.default_rng(1))
    assert r <= math.expm1(2 * C * fl.V) + 1e-9


def test_commutator_vanishes_for_translations():
    grid = PeriodicGrid(1, 32)
    f = random_band_limited(grid, np.random.default_rng(2))
    for c in (0.0, 0.7):
        fl = integrate_flow(AdvectingVelocity.constant([c]), 1.0, 4, grid)
        for j in DyadicPartition(grid).js:
            assert capillary_commutator_IIj(f, int(j), fl, 0.3).norm() <= 1e-10


def test_commutator_translation_covariance():
    grid = PeriodicGrid(1, 64)
    f = random_band_limited(grid, np.random.default_rng(3), kmax=8)
    fl = integrate_flow(AdvectingVelocity.shear(grid, 0.5), 0.2, 32)
    a = [0.37]
    shifted = fl.shifted(a)
    for j in (1, 2, 3):
        lhs = capillary_commutator_IIj(f, j, shifted, 0.3)
        rhs = capillary_commutator_IIj(_shift(f, a), j, fl, 0.3)
        assert (lhs - rhs).norm() <= 1e-8 * max(1.0, rhs.norm())


def test_remainder_identity():
    grid = PeriodicGrid(1, 64)
    q = random_band_limited(grid, np.random.default_rng(4), kmax=4)
    fl = integrate_flow(AdvectingVelocity.wave(grid, 0.2), 0.3, 32)
    for j in (0, 1, 2):
        R = capillary_remainder_Rj(q, j, fl, 0.3)
        I = capillary_remainder_Ij(q, j, fl, 0.3)
        II = capillary_commutator_IIj(gradient(q), j, fl, 0.3)
        assert (R - (I + II)).norm() <= 1e-8 * max(1.0, R.norm())


def test_viscous_remainder_chain_rule_1d():
    grid = PeriodicGrid(1, 64)
    u = random_band_limited(grid, np.random.default_rng(6), kmax=6)
    q = random_band_limited(grid, np.random.default_rng(7), kmax=6)
    pr = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.1)
    fl = integrate_flow(AdvectingVelocity.wave(grid, 0.3), 0.2, 64)
    R1, R2, R3 = system_remainders(u, q, fl, pr)
    chain = remainder_R3_chain_rule_1d(u, fl, pr)
    assert (R3 - chain).norm() <= 1e-6 * max(1.0, R3.norm())
    assert R1.norm() > 0 and R2.norm() > 0


def test_commutator_linear_in_time():
    grid = PeriodicGrid(1, 64)
    f = random_band_limited(grid, np.random.default_rng(8), kmax=8)
    v = AdvectingVelocity.shear(grid, 0.5).at_level(2)
    norms = [capillary_commutator_IIj(f, 2, integrate_flow(v, t, 16), 0.3).norm() for t in (1e-3, 1e-2, 1e-1)]
    slope = np.polyfit(np.log([1e-3, 1e-2, 1e-1]), np.log(norms), 1)[0]
    assert abs(slope - 1.0) <= 0.2


def test_verify_commutator_table():
    grid = PeriodicGrid(1, 32)
    f = random_band_limited(grid, np.random.default_rng(9), kmax=8)
    v = AdvectingVelocity.shear(grid, 0.5)
    t = flow_time_for_smallness(v, 1.0, grid)
    pr = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.3)
    tab = verify_commutator_bound(f, 0.5, pr, [("shear", v, t)])
    row = tab.rows[0]
    assert row["small"] and math.isfinite(row["sum_rho"]) and row["sum_rho"] > 0


def test_errors():
    grid = PeriodicGrid(1, 16)
    with pytest.raises(ValueError):
        integrate_flow(AdvectingVelocity.constant([1.0]), 1.0)  # affine field needs a grid
    with pytest.raises(ValueError):
        integrate_flow(AdvectingVelocity.wave(grid, 0.1), -1.0)
    fl = integrate_flow(AdvectingVelocity.wave(grid, 0.1), 0.1, 4)
    with pytest.raises(ValueError):
        capillary_commutator_IIj(random_band_limited(grid, np.random.default_rng(0)), 0, fl, 0.0)
