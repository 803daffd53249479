"""Dyadic decomposition on the torus and the Besov-type norms built from it.

Blocks are indexed by the physical frequency: block ``j`` lives on
``2**j * [c0, C0]`` in units of the wavevector xi = 2 pi k / L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .spectral import (
    AliasingError,
    PeriodicGrid,
    SpectralField,
    apply_multiplier,
    capillary_symbol,
    gradient,
    inverse,
    multiply,
    _max_axis_index,
    _require_zero_mean,
)

__all__ = [
    "C_SMALL",
    "C_BIG",
    "chi",
    "phi",
    "DyadicPartition",
    "HybridSpec",
    "TimeSeriesField",
    "dyadic_block",
    "low_pass",
    "block_norms",
    "besov_norm",
    "hybrid_norm",
    "hybrid_index_norm",
    "hybrid_weights",
    "l_eps",
    "tilde_B_norm",
    "chemin_lerner_norm",
    "energy_norm_E",
    "bony_decompose",
    "transport_commutator",
    "HYBRID_FORMS",
    "NORM_COLUMNS",
]

C_SMALL = 0.75  # c0
C_BIG = 8.0 / 3.0  # C0
HYBRID_FORMS = ("index", "multiplier", "minform", "fdform")
NORM_COLUMNS = ("norm_name", "s", "eps", "form", "value")


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(tc > 0, np.exp(-1.0 / np.where(tc > 0, tc, 1.0)), 0.0)
        b = np.where(tc < 1, np.exp(-1.0 / np.where(tc < 1, 1.0 - tc, 1.0)), 0.0)
    return a / (a + b)


def chi(r):
    """Radial cutoff: 1 on [0, 3/4], 0 on [4/3, inf), smooth and nonincreasing in between."""
    r = np.abs(np.asarray(r, dtype=float))
    return 1.0 - _smooth_step((r - C_SMALL) / (4.0 / 3.0 - C_SMALL))


def phi(r):
    """Annulus function chi(r/2) - chi(r), supported in [c0, C0]."""
    return chi(np.asarray(r, dtype=float) / 2.0) - chi(r)


@dataclass(frozen=True)
class DyadicPartition:
    """Block range admissible on a grid.

    ``j_min`` sits two octaves below the fundamental wavenumber and ``j_max``
    is the first block whose telescoped partition covers the radial band
    |k| <= n/3, so the blocks sum to the identity on every band-limited
    zero-mean field.
    """

    grid: PeriodicGrid

    @property
    def j_min(self) -> int:
        return int(math.floor(math.log2(self.grid.k1))) - 2

    @property
    def j_max(self) -> int:
        kmax = self.grid.k1 * self.grid.n / 3.0
        return int(math.ceil(math.log2(kmax / 1.5)))

    @property
    def js(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    def weights(self) -> np.ndarray:
        """phi(2^{-j}|xi|) for every block, shape (nblocks,) + grid shape."""
        return _block_weights(self.grid)

    def partition_sum(self) -> np.ndarray:
        return self.weights().sum(axis=0)


@lru_cache(maxsize=32)
def _block_weights(grid: PeriodicGrid) -> np.ndarray:
    part = DyadicPartition(grid)
    xn = grid.xi_norm()
    w = np.stack([phi(xn * 2.0 ** (-j)) for j in part.js])
    w.flags.writeable = False
    return w


def _block_index(grid: PeriodicGrid, j: int) -> int:
    part = DyadicPartition(grid)
    if not part.j_min <= j <= part.j_max:
        raise ValueError(f"block {j} outside the admissible range [{part.j_min}, {part.j_max}]")
    return j - part.j_min


def dyadic_block(f: SpectralField, j: int) -> SpectralField:
    """Delta_j f, the multiplier phi(2^{-j} xi)."""
    w = _block_weights(f.grid)[_block_index(f.grid, j)]
    return apply_multiplier(f, w)


def low_pass(f: SpectralField, l: int) -> SpectralField:
    """S_l f = chi(2^{-l} D) f, which keeps the mean mode."""
    return apply_multiplier(f, chi(f.grid.xi_norm() * 2.0 ** (-l)))


def block_norms(f: SpectralField, p_idx: float = 2) -> np.ndarray:
    """L^p norm of every block (all components together), ordered by j."""
    w = _block_weights(f.grid)
    if p_idx == 2:
        e = np.sum(np.abs(f.coeffs) ** 2, axis=0).ravel()
        return np.sqrt(np.maximum((w.reshape(w.shape[0], -1) ** 2) @ e, 0.0))
    if p_idx == np.inf:
        out = np.empty(w.shape[0])
        for b in range(w.shape[0]):
            blk = SpectralField(f.grid, f.coeffs * w[b][None])
            out[b] = np.max(np.sqrt(np.sum(inverse(blk) ** 2, axis=0)))
        return out
    raise ValueError(f"unsupported Lebesgue index {p_idx}; use 2 or inf")


def _lr_sum(a: np.ndarray, r: float) -> float:
    if r == 1:
        return float(np.sum(a))
    if r == np.inf:
        return float(np.max(a)) if a.size else 0.0
    if r > 0:
        return float(np.sum(a ** r) ** (1.0 / r))
    raise ValueError(f"unsupported summation index {r}")


def besov_norm(f: SpectralField, s: float, p_idx: float = 2, r: float = 1) -> float:
    """Homogeneous Besov norm over the admissible blocks."""
    _require_zero_mean(f, "besov_norm")
    js = DyadicPartition(f.grid).js
    return _lr_sum(2.0 ** (js * s) * block_norms(f, p_idx), r)


def l_eps(eps: float, gamma: float = 1.0) -> int:
    """Index separating the low and high regimes of the hybrid norm."""
    if eps <= 0 or gamma <= 0:
        raise ValueError("eps and gamma must be positive")
    return int(math.floor(0.5 * math.log2(gamma / (C_BIG * eps * eps)) - 1.0))


@dataclass(frozen=True)
class HybridSpec:
    s: float
    t: float
    eps: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def l_eps(self) -> int:
        return l_eps(self.eps, self.gamma)

    def weights(self, js: np.ndarray) -> np.ndarray:
        return hybrid_weights(js, self.s, self.t, self.eps, self.gamma)


def hybrid_weights(js, s: float, t: float, eps: float, gamma: float = 1.0) -> np.ndarray:
    """Block weights of the index-form hybrid norm: 2^{js} up to l_eps, eps^{-2} 2^{jt} above."""
    js = np.asarray(js)
    le = l_eps(eps, gamma)
    return np.where(js <= le, 2.0 ** (js * s), 2.0 ** (js * t) / (eps * eps))


def hybrid_index_norm(f: SpectralField, s: float, t: float, eps: float, gamma: float = 1.0) -> float:
    _require_zero_mean(f, "hybrid norm")
    js = DyadicPartition(f.grid).js
    return float(np.sum(hybrid_weights(js, s, t, eps, gamma) * block_norms(f)))


def min_weights(js, s: float, eps: float) -> np.ndarray:
    """min(1/eps^2, 2^{2j}) 2^{js}."""
    js = np.asarray(js)
    return np.minimum(1.0 / (eps * eps), 2.0 ** (2 * js)) * 2.0 ** (js * s)


# quadrature for the finite-difference form
FD_RADIUS = 12.0
FD_NODES_1D = 64
FD_NODES_2D = 32


def _fd_rule(dim: int, radius: float, nodes: Optional[int]):
    if nodes is None:
        nodes = FD_NODES_1D if dim == 1 else FD_NODES_2D
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = x * radius
    w = w * radius
    if dim == 1:
        return x[None, :], w
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.stack([X.ravel(), Y.ravel()]), W.ravel()


def _fdform(f: SpectralField, s: float, eps: float, radius: float, nodes: Optional[int]) -> float:
    grid = f.grid
    ys, wq = _fd_rule(grid.dim, radius, nodes)
    weight = wq * np.exp(-np.sum(ys ** 2, axis=0) / 16.0)
    xi = grid.wavevectors().reshape(grid.dim, -1)
    energy = np.sum(np.abs(f.coeffs) ** 2, axis=0).ravel()
    active = energy > 0
    xi = xi[:, active]
    bw = _block_weights(grid).reshape(len(DyadicPartition(grid).js), -1)[:, active]
    W = (bw ** 2) * energy[active][None, :]  # (blocks, K)
    phase = eps * (ys.T @ xi)  # (nodes, K)
    sym2 = (4.0 * np.sin(phase / 2.0) ** 2) ** 2  # squared symmetric-difference symbol
    blk = np.sqrt(sym2 @ W.T)  # (nodes, blocks)
    js = DyadicPartition(grid).js
    besov = blk @ (2.0 ** (js * s))
    return float(np.dot(weight, besov) / (eps * eps))


def hybrid_norm(
    f: SpectralField,
    s: float,
    eps: float,
    form: str = "minform",
    gamma: float = 1.0,
    fd_radius: float = FD_RADIUS,
    fd_nodes: Optional[int] = None,
) -> float:
    """The hybrid norm of order (s+2, s) in one of four equivalent forms.

    index       sum_{l <= l_eps} 2^{l(s+2)} |D_l f| + sum_{l > l_eps} eps^-2 2^{ls} |D_l f|
    multiplier  Besov (s, 2, 1) norm of the nonlocal capillary operator applied to f
    minform     sum_j min(eps^-2, 2^{2j}) 2^{js} |D_j f|
    fdform      eps^-2 * integral of e^{-|y|^2/16} |f(.-eps y) + f(.+eps y) - 2 f|_{B^s_{2,1}} dy
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _require_zero_mean(f, "hybrid norm")
    js = DyadicPartition(f.grid).js
    if form == "index":
        return hybrid_index_norm(f, s + 2, s, eps, gamma)
    if form == "multiplier":
        xi2 = f.grid.xi_norm() ** 2
        Lf = SpectralField(f.grid, f.coeffs * capillary_symbol(xi2, eps)[None], True)
        return float(np.sum(2.0 ** (js * s) * block_norms(Lf)))
    if form == "minform":
        return float(np.sum(min_weights(js, s, eps) * block_norms(f)))
    if form == "fdform":
        return _fdform(f, s, eps, fd_radius, fd_nodes)
    raise ValueError(f"unknown hybrid form {form!r}; expected one of {HYBRID_FORMS}")


def tilde_B_norm(f: SpectralField, alpha: float, s: float, r: float) -> float:
    """sum_l 2^{ls} max(alpha, 2^{-l})^{1 - 2/r} |D_l f|."""
    if r == 0:
        raise ValueError("r must be nonzero")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    _require_zero_mean(f, "tilde_B_norm")
    js = DyadicPartition(f.grid).js
    expo = 1.0 - (0.0 if r == np.inf else 2.0 / r)
    w = 2.0 ** (js * s) * np.maximum(alpha, 2.0 ** (-js.astype(float))) ** expo
    return float(np.sum(w * block_norms(f)))


class TimeSeriesField:
    """Samples of a field at increasing times, all on the same grid."""

    def __init__(self, times: Sequence[float], fields: Sequence[SpectralField]):
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or len(t) != len(fields) or len(t) == 0:
            raise ValueError("times and fields must be non-empty and of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        g = fields[0].grid
        c = fields[0].components
        for f in fields:
            if f.grid != g or f.components != c:
                raise ValueError("all fields in a time series must share grid and components")
        self.times = t
        self.fields = list(fields)
        self.grid = g

    def __len__(self):
        return len(self.times)

    def block_norm_matrix(self) -> np.ndarray:
        """(ntimes, nblocks) array of L2 block norms."""
        return np.stack([block_norms(f) for f in self.fields])

    def map(self, fn: Callable[[SpectralField], SpectralField]) -> "TimeSeriesField":
        return TimeSeriesField(self.times, [fn(f) for f in self.fields])

    def __sub__(self, other: "TimeSeriesField") -> "TimeSeriesField":
        _check_times(self, other)
        return TimeSeriesField(self.times, [a - b for a, b in zip(self.fields, other.fields)])


def _check_times(a: TimeSeriesField, b: TimeSeriesField):
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-14):
        raise ValueError("trajectories do not share a time axis")


def _time_norm(bn: np.ndarray, times: np.ndarray, rho: float) -> np.ndarray:
    if rho == np.inf:
        return bn.max(axis=0)
    if rho == 1:
        if len(times) == 1:
            return np.zeros(bn.shape[1])
        return np.trapezoid(bn, times, axis=0)
    raise ValueError(f"time exponent must be 1 or inf, got {rho}")


def chemin_lerner_norm(
    traj: TimeSeriesField,
    rho: float,
    s: float,
    weights: Optional[np.ndarray] = None,
    block_matrix: Optional[np.ndarray] = None,
) -> float:
    """Time norm per block first, then the weighted block sum.

    ``weights`` overrides the Besov weights 2^{js} (used for hybrid norms).
    ``block_matrix`` lets callers reuse a precomputed :meth:`block_norm_matrix`.
    """
    js = DyadicPartition(traj.grid).js
    bn = traj.block_norm_matrix() if block_matrix is None else block_matrix
    tn = _time_norm(bn, traj.times, rho)
    if weights is None:
        weights = 2.0 ** (js * s)
    return float(np.sum(weights * tn))


def energy_norm_E(
    q_traj: TimeSeriesField,
    u_traj: TimeSeriesField,
    s: float,
    eps: float,
    gamma: float = 1.0,
) -> float:
    """Sum of the six Chemin-Lerner norms defining the energy space of order s."""
    _check_times(q_traj, u_traj)
    js = DyadicPartition(q_traj.grid).js
    bq = q_traj.block_norm_matrix()
    bu = u_traj.block_norm_matrix()
    tot = 0.0
    tot += chemin_lerner_norm(u_traj, np.inf, s - 1, block_matrix=bu)
    tot += chemin_lerner_norm(q_traj, np.inf, s - 1, block_matrix=bq)
    tot += chemin_lerner_norm(q_traj, np.inf, s, block_matrix=bq)
    tot += chemin_lerner_norm(u_traj, 1, s + 1, block_matrix=bu)
    tot += chemin_lerner_norm(q_traj, 1, s, weights=hybrid_weights(js, s + 1, s, eps, gamma), block_matrix=bq)
    tot += chemin_lerner_norm(q_traj, 1, s, weights=hybrid_weights(js, s + 2, s, eps, gamma), block_matrix=bq)
    return tot


def _padded_blocks(f: SpectralField, weights: np.ndarray) -> np.ndarray:
    """Physical samples on the doubled grid of f filtered by each weight; (nw, comps) + big shape."""
    from .spectral import _resample_coeffs

    grid = f.grid
    N = 2 * grid.n
    axes = tuple(range(2, grid.dim + 2))
    filt = weights[:, None] * f.coeffs[None]
    big = np.stack([_resample_coeffs(c, grid.dim, grid.n, N) for c in filt])
    scale = 1.0 / math.sqrt(grid.with_n(N).cell_volume)
    return np.fft.ifftn(big, axes=axes, norm="ortho").real * scale


def _to_grid(grid: PeriodicGrid, phys_big: np.ndarray) -> np.ndarray:
    from .spectral import _resample_coeffs

    N = 2 * grid.n
    axes = tuple(range(1, grid.dim + 1))
    c = np.fft.fftn(phys_big, axes=axes, norm="ortho") * math.sqrt(grid.with_n(N).cell_volume)
    return _resample_coeffs(c, grid.dim, N, grid.n)


def bony_decompose(u: SpectralField, v: SpectralField, check_support: bool = True):
    """Paraproducts T_u v, T_v u and remainder R with T_u v + T_v u + R = u v.

    T_u v = sum_l S_{l-1} u * D_l v.  The mean-times-mean term is kept in R so
    the identity is exact on the torus.  Inputs must be scalar fields whose
    product is representable on the grid.
    """
    if u.grid != v.grid or u.components != 1 or v.components != 1:
        raise ValueError("bony_decompose expects two scalar fields on the same grid")
    grid = u.grid
    if _max_axis_index(u) + _max_axis_index(v) >= grid.n // 2:
        raise AliasingError("product has energy above the representable band")
    part = DyadicPartition(grid)
    js = part.js
    bw = _block_weights(grid)
    xn = grid.xi_norm()
    low = np.stack([chi(xn * 2.0 ** (-(j - 1))) for j in js])
    ub, vb = _padded_blocks(u, bw)[:, 0], _padded_blocks(v, bw)[:, 0]
    ul, vl = _padded_blocks(u, low)[:, 0], _padded_blocks(v, low)[:, 0]
    umean = u.mean_coeff[0] / math.sqrt(grid.volume)
    vmean = v.mean_coeff[0] / math.sqrt(grid.volume)
    terms_uv = ul * vb
    terms_vu = vl * ub
    if check_support:
        _assert_annulus(grid, terms_uv, js)
        _assert_annulus(grid, terms_vu, js)
    Tuv = terms_uv.sum(axis=0)
    Tvu = terms_vu.sum(axis=0)
    nb = len(js)
    R = np.zeros_like(Tuv)
    for a in range(nb):
        for b in range(max(0, a - 1), min(nb, a + 2)):
            R += ub[a] * vb[b]
    R = R + (umean * vmean).real
    return tuple(SpectralField(grid, _to_grid(grid, x[None]), False) for x in (Tuv, Tvu, R))


def _assert_annulus(grid: PeriodicGrid, terms: np.ndarray, js: np.ndarray, rtol: float = 1e-10):
    """Each paraproduct term must live in 2^l [1/12, 10/3]."""
    N = 2 * grid.n
    big = grid.with_n(N)
    xn = big.xi_norm()
    axes = tuple(range(1, grid.dim + 1))
    spec = np.fft.fftn(terms, axes=axes, norm="ortho")
    total = np.sqrt(np.sum(np.abs(spec) ** 2)) + 1e-300
    for i, j in enumerate(js):
        lo, hi = 2.0 ** j / 12.0, 2.0 ** j * 10.0 / 3.0
        outside = (xn < lo * (1 - 1e-12)) | (xn > hi * (1 + 1e-12))
        leak = np.sqrt(np.sum(np.abs(spec[i][outside]) ** 2))
        if leak > rtol * total:
            raise AssertionError(f"paraproduct term at l={j} leaks outside its annulus ({leak:.2e})")


def transport_commutator(v: SpectralField, hf: SpectralField, j: int) -> SpectralField:
    """S_{j-1} v . grad(D_j h) - D_j (v . grad h), dealiased on the doubled grid."""
    grid = v.grid
    if v.components != grid.dim or hf.components != 1:
        raise ValueError("expected a vector v and a scalar h")
    if _max_axis_index(v) + _max_axis_index(hf) >= grid.n // 2:
        raise AliasingError("product has energy above the representable band")
    Sv = low_pass(v, j - 1)
    gh = gradient(hf)
    ghj = gradient(dyadic_block(hf, j))
    first = None
    second = None
    for i in range(grid.dim):
        a = multiply(Sv.component(i), ghj.component(i), truncate=None)
        b = multiply(v.component(i), gh.component(i), truncate=None)
        first = a if first is None else first + a
        second = b if second is None else second + b
    return first - dyadic_block(second, j)
