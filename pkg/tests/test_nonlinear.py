import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from korteweg_lab.nonlinear import (
    LOCAL,
    NONLOCAL,
    FluidState,
    InstabilityError,
    PressureLaw,
    VacuumError,
    convergence_study,
    integrate,
    nonlinear_terms,
    step,
)
from korteweg_lab.params import PhysicalParams
from korteweg_lab.propagator import duhamel_evolve
from korteweg_lab.spectral import PeriodicGrid, random_band_limited, transform

PARAMS = PhysicalParams.from_nu(1.0, 1.0, 1.0, 0.1)


def _data(grid, amplitude, seed=0, kmax=4.0):
    rng = np.random.default_rng(seed)
    q = random_band_limited(grid, rng, kmax=kmax, amplitude=amplitude)
    u = random_band_limited(grid, rng, components=grid.dim, kmax=kmax, amplitude=amplitude)
    return q, u


@given(st.floats(min_value=0.3, max_value=4.0), st.floats(min_value=-0.5, max_value=2.0))
def test_generic_K_matches_closed_form(gamma, q):
    law = PressureLaw.gamma_law(gamma, 1.5)
    assert float(law.K(q)) == pytest.approx(float(law.K_generic(q)), rel=1e-12, abs=1e-12)


def test_mass_conservation():
    grid = PeriodicGrid(1, 64)
    q, u = _data(grid, 0.1)
    q = q + transform(grid, np.full(64, 0.05))
    s0 = FluidState(q, u)
    s1, _, _ = integrate(s0, 0.5, 50, NONLOCAL, PARAMS, record=False)
    assert abs(s1.q_mean() - s0.q_mean()) <= 1e-10


def test_tiny_amplitude_matches_linear_propagator():
    grid = PeriodicGrid(1, 64)
    q, u = _data(grid, 1e-12)
    s1, _, _ = integrate(FluidState(q, u), 0.5, 50, NONLOCAL, PARAMS, record=False)
    ql, ul = duhamel_evolve(q, u, PARAMS, 0.5, 50)
    rel = math.hypot((s1.q - ql.fields[-1]).norm(), (s1.u - ul.fields[-1]).norm()) / math.hypot(q.norm(), u.norm())
    assert rel <= 1e-10


def test_quadratic_nonlinearity():
    grid = PeriodicGrid(1, 64)
    ratios = []
    for amp in (1e-3, 5e-4, 2.5e-4):
        q, u = _data(grid, amp)
        s1, _, _ = integrate(FluidState(q, u), 0.5, 50, NONLOCAL, PARAMS, record=False)
        ql, ul = duhamel_evolve(q, u, PARAMS, 0.5, 50)
        diff = math.hypot((s1.q - ql.fields[-1]).norm(), (s1.u - ul.fields[-1]).norm())
        ratios.append(diff / amp ** 2)
    assert max(ratios) / min(ratios) <= 1.2


def test_nonlinear_terms_dealiased():
    grid = PeriodicGrid(1, 64)
    q, u = _data(grid, 0.1, kmax=10)
    Fq, Fu = nonlinear_terms(FluidState(q, u), PressureLaw.gamma_law(1.4, 1.0), PARAMS)
    k = np.abs(grid.int_wavenumbers()[0])
    assert np.all(Fq.coeffs[0][k > 64 / 3] == 0) and np.all(Fu.coeffs[0][k > 64 / 3] == 0)


def test_two_dimensional_step_runs():
    grid = PeriodicGrid(2, 16)
    q, u = _data(grid, 0.01, kmax=3)
    s = step(FluidState(q, u), 0.01, LOCAL, PARAMS)
    assert math.isfinite(s.norm())


def test_vacuum_detected():
    grid = PeriodicGrid(1, 32)
    x = grid.coordinates()[0]
    q = transform(grid, -0.95 * np.cos(x))
    u = transform(grid, np.zeros(32))
    with pytest.raises(VacuumError):
        step(FluidState(q, u), 0.01, NONLOCAL, PARAMS)


def test_instability_detected():
    grid = PeriodicGrid(1, 32)
    q, u = _data(grid, 0.5, kmax=10)
    with pytest.raises((InstabilityError, VacuumError)):
        integrate(FluidState(q, u * 40.0), 5.0, 5, NONLOCAL, PARAMS, PressureLaw.gamma_law(1.0, 1.0))


def test_law_mismatch_and_bad_mode():
    grid = PeriodicGrid(1, 16)
    q, u = _data(grid, 0.01)
    with pytest.raises(ValueError):
        step(FluidState(q, u), 0.1, NONLOCAL, PARAMS, PressureLaw.gamma_law(2.0, 3.0))
    with pytest.raises(ValueError):
        step(FluidState(q, u), 0.1, "bogus", PARAMS)


def test_convergence_study_rows(tmp_path):
    grid = PeriodicGrid(1, 32)
    q, u = _data(grid, 1e-2)
    tab = convergence_study(q, u, PARAMS, [0.2, 0.1], 0.2, 0.5, 20)
    d = tab.column("distance")
    assert len(d) == 2 and d[1] < d[0]
    s1, _, _ = integrate(FluidState(q, u), 0.1, 2, LOCAL, PARAMS, record=False,
                         checkpoint_prefix=str(tmp_path / "ck"))
    assert any(p.name.startswith("ck_q") for p in tmp_path.iterdir())
