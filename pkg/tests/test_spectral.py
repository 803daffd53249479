import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from korteweg_lab.spectral import (
    PeriodicGrid,
    SpectralField,
    apply_multiplier,
    capillary_op,
    capillary_symbol,
    divergence,
    gradient,
    helmholtz,
    helmholtz_reconstruct,
    inverse,
    load_snapshot,
    multiply,
    random_band_limited,
    resample,
    save_snapshot,
    symmetric_difference,
    transform,
)

C0 = 0.75


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_parseval_and_roundtrip(seed, dim):
    grid = PeriodicGrid(dim, 16 if dim == 2 else 32)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(grid.shape)
    f = transform(grid, x)
    l2 = np.sqrt(np.sum(x ** 2) * grid.cell_volume)
    assert f.norm() == pytest.approx(l2, rel=1e-10)
    assert np.allclose(inverse(f)[0], x, atol=1e-12)


def test_derivative_of_sine():
    grid = PeriodicGrid(1, 32)
    x = grid.coordinates()[0]
    f = transform(grid, np.sin(3 * x))
    assert np.allclose(inverse(gradient(f))[0], 3 * np.cos(3 * x), atol=1e-12)


@given(st.floats(min_value=1e-3, max_value=2.0))
def test_capillary_symbol_envelope(eps):
    xi = np.logspace(-2, 3, 200)
    m = capillary_symbol(xi ** 2, eps)
    assert np.all(np.isreal(m)) and np.all(m <= 0)
    lower = (1 - np.exp(-C0 ** 2)) * np.minimum(eps ** -2, xi ** 2)
    assert np.all(-m >= lower * (1 - 1e-12))
    assert np.all(-m <= np.minimum(eps ** -2, xi ** 2) * (1 + 1e-12))


def test_capillary_commutes_with_multipliers():
    grid = PeriodicGrid(2, 16)
    f = random_band_limited(grid, np.random.default_rng(1))
    mult = np.exp(-grid.xi_norm())
    a = capillary_op(apply_multiplier(f, mult), 0.2)
    b = apply_multiplier(capillary_op(f, 0.2), mult)
    assert (a - b).norm() <= 1e-13
    y = np.array([0.3, -0.1])
    a = symmetric_difference(apply_multiplier(f, mult), y, 0.2)
    b = apply_multiplier(symmetric_difference(f, y, 0.2), mult)
    assert (a - b).norm() <= 1e-13


def test_helmholtz_roundtrip_and_divergence():
    grid = PeriodicGrid(2, 16)
    u = random_band_limited(grid, np.random.default_rng(2), components=2)
    v, w = helmholtz(u)
    assert (helmholtz_reconstruct(v, w) - u).norm() <= 1e-12
    # |v| carries exactly the divergence
    assert divergence(u).norm() == pytest.approx(apply_multiplier(v, grid.xi_norm()).norm(), rel=1e-12)


def test_multiply_dealiased_matches_pointwise():
    grid = PeriodicGrid(1, 64)
    x = grid.coordinates()[0]
    f = transform(grid, np.sin(2 * x))
    g = transform(grid, np.cos(3 * x))
    prod = multiply(f, g)
    assert np.allclose(inverse(prod)[0], np.sin(2 * x) * np.cos(3 * x), atol=1e-12)


def test_resample_preserves_band_limited():
    grid = PeriodicGrid(2, 16)
    f = random_band_limited(grid, np.random.default_rng(3))
    g = resample(resample(f, 32), 16)
    assert (g - f).norm() <= 1e-12
    assert resample(f, 32).norm() == pytest.approx(f.norm(), rel=1e-12)


def test_random_field_properties():
    grid = PeriodicGrid(1, 64)
    f = random_band_limited(grid, np.random.default_rng(4), kmax=5, amplitude=2.0)
    assert f.norm() == pytest.approx(2.0)
    assert f.is_real()
    assert abs(f.mean_coeff[0]) == 0
    k = np.abs(grid.int_wavenumbers()[0])
    assert np.all(np.abs(f.coeffs[0][k > 5]) == 0)


def test_snapshot_roundtrip(tmp_path):
    grid = PeriodicGrid(2, 8)
    f = random_band_limited(grid, np.random.default_rng(5), components=2)
    save_snapshot(tmp_path / "snap", f)
    g = load_snapshot(tmp_path / "snap")
    assert np.max(np.abs(g.coeffs - f.coeffs)) <= 1e-14


def test_shape_validation():
    grid = PeriodicGrid(1, 16)
    with pytest.raises(ValueError):
        SpectralField(grid, np.zeros(8))
    with pytest.raises(ValueError):
        PeriodicGrid(3, 8)
