"""Periodic grids, spectral fields and Fourier multipliers.

Normalization convention (used everywhere in the package)
---------------------------------------------------------
For a field ``f`` sampled on an ``n**dim`` grid of the torus ``[0, L)^dim``
the stored coefficients are

    c_k = fftn(f, norm="ortho") * sqrt(dx**dim) = |T|^{-1/2} * integral f(x) e^{-i xi_k . x} dx

(the integral is exact for band-limited fields).  With this choice
``sum |c_k|^2 == integral |f|^2`` (Parseval for the continuous L2 norm) and
the coefficients of a band-limited function do not depend on ``n``, so
changing resolution is a pure zero-padding or truncation.
"""
from __future__ import annotations

import os
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "PeriodicGrid",
    "SpectralField",
    "AliasingError",
    "transform",
    "inverse",
    "apply_multiplier",
    "helmholtz",
    "helmholtz_reconstruct",
    "capillary_symbol",
    "capillary_op",
    "symmetric_difference",
    "gradient",
    "divergence",
    "multiply",
    "resample",
    "random_band_limited",
    "save_snapshot",
    "load_snapshot",
]


class AliasingError(ValueError):
    """A product would not be exactly representable on the grid."""


@dataclass(frozen=True)
class PeriodicGrid:
    dim: int
    n: int
    L: float = 2 * math.pi

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def volume(self) -> float:
        return self.L ** self.dim

    @property
    def k1(self) -> float:
        """Fundamental wavenumber 2 pi / L."""
        return 2 * math.pi / self.L

    def int_wavenumbers(self) -> np.ndarray:
        """Integer wave indices, shape (dim,) + grid shape."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.array(np.meshgrid(*([k] * self.dim), indexing="ij"))

    def wavevectors(self) -> np.ndarray:
        """Physical wavevectors xi = 2 pi k / L, shape (dim,) + grid shape."""
        return self.k1 * self.int_wavenumbers()

    def xi_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.wavevectors() ** 2, axis=0))

    def band_mask(self, kmax: Optional[float] = None) -> np.ndarray:
        """Modes with radial integer index |k| <= kmax (default n/3)."""
        if kmax is None:
            kmax = self.n / 3.0
        kk = self.int_wavenumbers()
        return np.sqrt(np.sum(kk ** 2, axis=0)) <= kmax

    def coordinates(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        return np.array(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def with_n(self, n: int) -> "PeriodicGrid":
        return PeriodicGrid(self.dim, n, self.L)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable container for Fourier coefficients, shape (components,) + grid.shape."""

    grid: PeriodicGrid
    coeffs: np.ndarray
    zero_mean: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == self.grid.dim:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if self.zero_mean:
            c[(slice(None),) + (0,) * self.grid.dim] = 0.0
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    @property
    def mean_coeff(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + (0,) * self.grid.dim]

    def with_coeffs(self, coeffs, zero_mean: Optional[bool] = None) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.zero_mean if zero_mean is None else zero_mean)

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs[i : i + 1], self.zero_mean)

    def to_physical(self) -> np.ndarray:
        return inverse(self)

    def norm(self) -> float:
        """Continuous L2 norm on the torus (all components)."""
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def remove_mean(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs, True)

    def is_real(self, tol: float = 1e-12) -> bool:
        phys = np.fft.ifftn(self.coeffs, axes=tuple(range(1, self.grid.dim + 1)))
        scale = max(np.max(np.abs(phys)), 1e-300)
        return bool(np.max(np.abs(phys.imag)) <= tol * scale)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.zero_mean and other.zero_mean)

    def __radd__(self, other):
        # lets the builtin sum() start from 0
        if isinstance(other, (int, float)) and other == 0:
            return self
        return NotImplemented

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.zero_mean and other.zero_mean)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, self.zero_mean)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self * (-1.0)


def _check_same_grid(a: SpectralField, b: SpectralField):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    if a.components != b.components:
        raise ValueError(f"component mismatch: {a.components} vs {b.components}")


def _axes(grid: PeriodicGrid) -> tuple:
    return tuple(range(1, grid.dim + 1))


def transform(grid: PeriodicGrid, samples, zero_mean: bool = False) -> SpectralField:
    """Physical samples (grid shape, or (components,) + grid shape) to a SpectralField."""
    a = np.asarray(samples)
    if a.shape == grid.shape:
        a = a[None]
    if a.shape[1:] != grid.shape:
        raise ValueError(f"sample shape {np.shape(samples)} does not match grid {grid.shape}")
    c = np.fft.fftn(a, axes=_axes(grid), norm="ortho") * math.sqrt(grid.cell_volume)
    return SpectralField(grid, c, zero_mean)


def inverse(f: SpectralField, real: bool = True) -> np.ndarray:
    """Samples of ``f`` on the grid, shape (components,) + grid shape."""
    phys = np.fft.ifftn(f.coeffs, axes=_axes(f.grid), norm="ortho") / math.sqrt(f.grid.cell_volume)
    return phys.real.copy() if real else phys


MultiplierLike = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], float]


def _evaluate_multiplier(grid: PeriodicGrid, m: MultiplierLike, zero_value) -> np.ndarray:
    """Return multiplier values on the full grid: shape grid.shape or (co, ci) + grid.shape."""
    if callable(m):
        xi = grid.wavevectors()
        flat = xi.reshape(grid.dim, -1)
        nz = np.any(flat != 0, axis=0)
        vals_nz = np.asarray(m(flat[:, nz]))
        lead = vals_nz.shape[:-1]
        full = np.empty(lead + (flat.shape[1],), dtype=np.result_type(vals_nz, complex if np.iscomplexobj(zero_value) else float))
        full[..., nz] = vals_nz
        full[..., ~nz] = zero_value
        return full.reshape(lead + grid.shape)
    arr = np.asarray(m)
    if arr.ndim == 0:
        return np.full(grid.shape, arr)
    return arr


def apply_multiplier(f: SpectralField, m: MultiplierLike, zero_value=0.0) -> SpectralField:
    """Coefficient-wise product with a scalar or matrix symbol.

    ``m`` is an array on the grid, a constant, or a callable receiving the
    nonzero wavevectors as a (dim, K) array; the value at xi = 0 is then
    ``zero_value``.  A matrix symbol has shape (co, ci) + grid shape.
    """
    vals = _evaluate_multiplier(f.grid, m, zero_value)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier has non-finite values on the grid")
    gshape = f.grid.shape
    if vals.shape == gshape:
        out = f.coeffs * vals[None]
    elif vals.shape[2:] == gshape and vals.ndim == f.grid.dim + 2:
        if vals.shape[1] != f.components:
            raise ValueError("matrix multiplier does not match the number of components")
        out = np.einsum("ab...,b...->a...", vals, f.coeffs)
    else:
        raise ValueError(f"multiplier shape {vals.shape} incompatible with grid {gshape}")
    return SpectralField(f.grid, out, f.zero_mean)


def _require_zero_mean(f: SpectralField, what: str, rtol: float = 1e-12):
    if f.zero_mean:
        return
    m = np.max(np.abs(f.mean_coeff))
    if m > rtol * max(f.norm(), 1e-300) and m > 1e-300:
        raise ValueError(f"{what} requires a zero-mean field (mean coefficient {m:.3e})")


def helmholtz(u: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split a zero-mean vector field into v = Lambda^{-1} div u and w = Lambda^{-1} curl u.

    ``w`` is the antisymmetric tensor w_ij = Lambda^{-1}(d_i u^j - d_j u^i),
    stored with components indexed ``i * dim + j``.  With the divergence of a
    tensor taken over its last index, u = -Lambda^{-1} grad v + Lambda^{-1} div w.
    """
    grid = u.grid
    if u.components != grid.dim:
        raise ValueError("helmholtz expects a vector field with dim components")
    _require_zero_mean(u, "helmholtz")
    xi = grid.wavevectors()
    nrm = np.sqrt(np.sum(xi ** 2, axis=0))
    nrm_safe = np.where(nrm == 0, 1.0, nrm)
    c = u.coeffs
    v = 1j * np.sum(xi * c, axis=0) / nrm_safe
    d = grid.dim
    w = np.zeros((d * d,) + grid.shape, dtype=complex)
    for i in range(d):
        for j in range(d):
            if i != j:
                w[i * d + j] = 1j * (xi[i] * c[j] - xi[j] * c[i]) / nrm_safe
    return SpectralField(grid, v, True), SpectralField(grid, w, True)


def helmholtz_reconstruct(v: SpectralField, w: SpectralField) -> SpectralField:
    """Inverse of :func:`helmholtz`."""
    grid = v.grid
    xi = grid.wavevectors()
    nrm = np.sqrt(np.sum(xi ** 2, axis=0))
    nrm_safe = np.where(nrm == 0, 1.0, nrm)
    d = grid.dim
    u = np.zeros((d,) + grid.shape, dtype=complex)
    for j in range(d):
        u[j] = -1j * xi[j] * v.coeffs[0] / nrm_safe
        for i in range(d):
            u[j] += 1j * xi[i] * w.coeffs[j * d + i] / nrm_safe
    return SpectralField(grid, u, True)


def capillary_symbol(xi2, eps: float):
    """Symbol of (phi_eps * f - f) / eps^2, i.e. (e^{-eps^2 |xi|^2} - 1)/eps^2, computed stably."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    xi2 = np.asarray(xi2, dtype=float)
    return np.expm1(-eps * eps * xi2) / (eps * eps)


def capillary_op(f: SpectralField, eps: float) -> SpectralField:
    """L_eps f = (phi_eps * f - f) / eps^2 with the Gaussian kernel of symbol e^{-eps^2|xi|^2}."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    xi2 = np.sum(f.grid.wavevectors() ** 2, axis=0)
    return apply_multiplier(f, capillary_symbol(xi2, eps))


def symmetric_difference(f: SpectralField, y, eps: float) -> SpectralField:
    """f(. - eps y) + f(. + eps y) - 2 f, exactly, through the symbol 2(cos(eps xi.y) - 1)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xi = f.grid.wavevectors()
    phase = eps * np.tensordot(y, xi, axes=(0, 0))
    return apply_multiplier(f, -4.0 * np.sin(phase / 2.0) ** 2)


def gradient(f: SpectralField) -> SpectralField:
    """Gradient of a scalar field (dim components) or Jacobian of a vector field (components*dim, row-major)."""
    xi = f.grid.wavevectors()
    d = f.grid.dim
    out = np.empty((f.components * d,) + f.grid.shape, dtype=complex)
    for a in range(f.components):
        for i in range(d):
            out[a * d + i] = 1j * xi[i] * f.coeffs[a]
    return SpectralField(f.grid, out, True)


def divergence(u: SpectralField) -> SpectralField:
    xi = u.grid.wavevectors()
    if u.components != u.grid.dim:
        raise ValueError("divergence expects a vector field")
    return SpectralField(u.grid, 1j * np.sum(xi * u.coeffs, axis=0), True)


def _resample_coeffs(c: np.ndarray, dim: int, n_old: int, n_new: int) -> np.ndarray:
    """Embed or truncate coefficients between grids by integer wavenumber."""
    k_old = np.fft.fftfreq(n_old, d=1.0 / n_old).astype(int)
    keep = np.abs(k_old) < min(n_old, n_new) / 2.0
    src = np.nonzero(keep)[0]
    dst = k_old[keep] % n_new
    out = np.zeros(c.shape[:1] + (n_new,) * dim, dtype=complex)
    if dim == 1:
        out[:, dst] = c[:, src]
    else:
        out[np.ix_(np.arange(c.shape[0]), dst, dst)] = c[np.ix_(np.arange(c.shape[0]), src, src)]
    return out


def resample(f: SpectralField, n_new: int) -> SpectralField:
    """Same band-limited function on a grid with ``n_new`` points per axis (Nyquist modes dropped)."""
    g = f.grid.with_n(n_new)
    return SpectralField(g, _resample_coeffs(f.coeffs, f.grid.dim, f.grid.n, n_new), f.zero_mean)


def _max_axis_index(f: SpectralField, rtol: float = 1e-13) -> int:
    kk = np.abs(f.grid.int_wavenumbers())
    kmax_axis = np.max(kk, axis=0)
    amp = np.max(np.abs(f.coeffs), axis=0)
    thresh = rtol * max(amp.max(), 1e-300)
    active = amp > thresh
    return int(kmax_axis[active].max()) if np.any(active) else 0


def multiply(f: SpectralField, g: SpectralField, truncate: Optional[str] = "band", check_alias: bool = False) -> SpectralField:
    """Pointwise product computed on a doubly padded grid.

    ``truncate="band"`` keeps the 2/3-rule band |k| <= n/3 (dealiased product for the
    time stepper); ``truncate=None`` keeps every mode representable on the original grid.
    With ``check_alias`` an :class:`AliasingError` is raised if the exact product has
    content at or beyond the Nyquist index of the original grid.  Broadcasting: a
    single-component factor multiplies every component of the other.
    """
    if f.grid != g.grid:
        raise ValueError("grid mismatch")
    grid = f.grid
    if check_alias:
        if _max_axis_index(f) + _max_axis_index(g) >= grid.n // 2:
            raise AliasingError("product has energy above the representable band; tighten the band limit")
    N = 2 * grid.n
    fp = _resample_coeffs(f.coeffs, grid.dim, grid.n, N)
    gp = _resample_coeffs(g.coeffs, grid.dim, grid.n, N)
    big = grid.with_n(N)
    axes = _axes(grid)
    scale = 1.0 / math.sqrt(big.cell_volume)
    fx = np.fft.ifftn(fp, axes=axes, norm="ortho") * scale
    gx = np.fft.ifftn(gp, axes=axes, norm="ortho") * scale
    prod = fx * gx
    pc = np.fft.fftn(prod, axes=axes, norm="ortho") * math.sqrt(big.cell_volume)
    out = _resample_coeffs(pc, grid.dim, N, grid.n)
    if truncate == "band":
        out = out * grid.band_mask()[None]
    return SpectralField(grid, out, False)


def random_band_limited(
    grid: PeriodicGrid,
    rng: np.random.Generator,
    components: int = 1,
    kmax: Optional[float] = None,
    kmin: float = 1.0,
    slope: float = 0.0,
    amplitude: float = 1.0,
) -> SpectralField:
    """Random real zero-mean field with modes kmin <= |k| <= kmax (integer units).

    Coefficients are complex Gaussian with an optional power-law envelope
    |k|^{-slope}; the result is normalized to L2 norm ``amplitude``.
    """
    if kmax is None:
        kmax = grid.n / 3.0
    kk = grid.int_wavenumbers()
    kn = np.sqrt(np.sum(kk ** 2, axis=0))
    mask = (kn >= kmin) & (kn <= kmax)
    shape = (components,) + grid.shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * mask
    c = c * np.where(kn > 0, kn, 1.0) ** (-slope)
    # project onto real fields: physical real part of the inverse transform
    f = SpectralField(grid, c, True)
    phys = inverse(f, real=True)
    f = transform(grid, phys, zero_mean=True)
    f = SpectralField(grid, f.coeffs * mask[None], True)
    nrm = f.norm()
    if nrm == 0:
        return f
    return f * (amplitude / nrm)


def save_snapshot(path_prefix: Union[str, os.PathLike], f: SpectralField) -> tuple[str, str]:
    """Write ``<prefix>.csv`` (header) and ``<prefix>.bin`` (float64 little-endian, row-major samples)."""
    prefix = os.fspath(path_prefix)
    phys = inverse(f).astype("<f8")
    head = prefix + ".csv"
    body = prefix + ".bin"
    with open(head, "w", encoding="utf-8", newline="") as fh:
        fh.write("dim,n,L,components\n")
        fh.write(f"{f.grid.dim},{f.grid.n},{f.grid.L!r},{f.components}\n")
    phys.tofile(body)
    return head, body


def load_snapshot(path_prefix: Union[str, os.PathLike], zero_mean: bool = False) -> SpectralField:
    prefix = os.fspath(path_prefix)
    with open(prefix + ".csv", encoding="utf-8") as fh:
        lines = fh.read().strip().splitlines()
    if len(lines) != 2 or lines[0].strip() != "dim,n,L,components":
        raise ValueError(f"malformed snapshot header in {prefix}.csv")
    dim_s, n_s, L_s, comp_s = lines[1].split(",")
    grid = PeriodicGrid(int(dim_s), int(n_s), float(L_s))
    comps = int(comp_s)
    data = np.fromfile(prefix + ".bin", dtype="<f8")
    expected = comps * grid.n ** grid.dim
    if data.size != expected:
        raise ValueError(f"snapshot body has {data.size} values, expected {expected}")
    return transform(grid, data.reshape((comps,) + grid.shape), zero_mean)
