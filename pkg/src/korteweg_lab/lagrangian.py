"""Flow of a mollified transport field and the Lagrangian change of variable.

The flow solves d/dt psi_t(x) = S_{j-1} v(t, psi_t(x)), psi_0 = id, with a
classical RK4 step per grid point.  Scattered evaluation of spectral fields
goes through :mod:`korteweg_lab.kernels`, so compositions are spectrally
accurate for band-limited data.

Matrix conventions: ``J[a, i] = d v_a / d x_i`` (the Jacobian matrix D v) and
likewise ``Dpsi[a, i] = d psi_a / d x_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import centered_coeffs, trig_eval
from .littlewood_paley import (
    DyadicPartition,
    TimeSeriesField,
    besov_norm,
    dyadic_block,
    hybrid_norm,
    low_pass,
)
from .params import PhysicalParams
from .spectral import (
    PeriodicGrid,
    SpectralField,
    capillary_op,
    divergence,
    gradient,
    random_band_limited,
    transform,
)
from .tables import ResultTable

__all__ = [
    "AdvectingVelocity",
    "FlowMap",
    "integrate_flow",
    "jacobian_det",
    "compose",
    "capillary_commutator_IIj",
    "capillary_remainder_Ij",
    "capillary_remainder_Rj",
    "system_remainders",
    "remainder_R3_chain_rule_1d",
    "flow_rate_ratio",
    "flow_constant",
    "flow_time_for_smallness",
    "verify_commutator_bound",
    "exp_gap_bound_holds",
    "transport_W",
    "COMMUTATOR_COLUMNS",
]

FD_STEP = 1e-3
COMMUTATOR_COLUMNS = ("flow", "eps", "n", "t", "V", "fitted_C", "small", "sum_rho", "max_rho")


class _SpectralEvaluator:
    """Point values and Jacobians of a fixed vector field given by its coefficients."""

    def __init__(self, f: SpectralField):
        g = f.grid
        self.dim = g.dim
        self.k1 = g.k1
        self.scale = 1.0 / math.sqrt(g.volume)
        self.vc, self.vk = centered_coeffs(f.coeffs, g.dim)
        gr = gradient(f)  # components a * d + i
        self.gc, self.gk = centered_coeffs(gr.coeffs, g.dim)

    def values(self, pts):
        return trig_eval(self.vc, self.vk, pts, self.k1, self.scale).real

    def jacobian(self, pts):
        out = trig_eval(self.gc, self.gk, pts, self.k1, self.scale).real
        return out.reshape(self.dim, self.dim, -1)


def _clean(f: SpectralField, rtol: float = 1e-13) -> SpectralField:
    """Zero the FFT roundoff of an analytic single-mode field so it stays narrow-band."""
    c = f.coeffs.copy()
    c[np.abs(c) < rtol * np.abs(c).max()] = 0.0
    return f.with_coeffs(c)


class AdvectingVelocity:
    """Transport field v(t, x) = theta(t) * v0(x), or a time series of spectral fields.

    Two representations are supported: a spectral field on a periodic grid
    (constant, shear, wave, random families) and an affine field A x + b
    (linear and rotation families, used on windows where periodicity is
    irrelevant).  ``j`` is the mollification level; the flow then uses
    S_{j-1} v.  Affine fields are left unchanged by the mollifier.
    """

    def __init__(
        self,
        dim: int,
        family: str,
        spectral: Optional[SpectralField] = None,
        A: Optional[np.ndarray] = None,
        b: Optional[np.ndarray] = None,
        profile: Optional[Callable[[float], float]] = None,
        series: Optional[TimeSeriesField] = None,
        j: Optional[int] = None,
    ):
        self.dim = dim
        self.family = family
        self.spectral = spectral
        self.A = None if A is None else np.asarray(A, dtype=float).reshape(dim, dim)
        self.b = np.zeros(dim) if b is None else np.asarray(b, dtype=float).reshape(dim)
        self.profile = profile
        self.series = series
        self.j = j
        if spectral is None and series is None and self.A is None:
            self.A = np.zeros((dim, dim))
        for arr in (self.A, self.b):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError("non-finite velocity data")
        if spectral is not None:
            if spectral.components != dim:
                raise ValueError("velocity must have dim components")
            if not np.all(np.isfinite(spectral.coeffs)):
                raise ValueError("non-finite velocity samples")
            self._eval = _SpectralEvaluator(self._mollify(spectral))
        if series is not None:
            for f in series.fields:
                if not np.all(np.isfinite(f.coeffs)):
                    raise ValueError("non-finite velocity samples")
            self._series_eval = [_SpectralEvaluator(self._mollify(f)) for f in series.fields]

    # families -----------------------------------------------------------
    @classmethod
    def constant(cls, c: Sequence[float], profile=None):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(len(c), "constant", A=np.zeros((len(c), len(c))), b=c, profile=profile)

    @classmethod
    def linear(cls, A, profile=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A.shape[0], "linear", A=A, profile=profile)

    @classmethod
    def rotation(cls, omega: float, profile=None):
        return cls(2, "rotation", A=omega * np.array([[0.0, -1.0], [1.0, 0.0]]), profile=profile)

    @classmethod
    def shear(cls, grid: PeriodicGrid, amplitude: float, k: int = 1, profile=None):
        """Sinusoidal shear: v = a sin(k k1 x_2) e_1 in 2D, v = a sin(k k1 x) in 1D."""
        x = grid.coordinates()
        samples = np.zeros((grid.dim,) + grid.shape)
        if grid.dim == 1:
            samples[0] = amplitude * np.sin(k * grid.k1 * x[0])
        else:
            samples[0] = amplitude * np.sin(k * grid.k1 * x[1])
        return cls(grid.dim, "shear", spectral=_clean(transform(grid, samples)), profile=profile)

    @classmethod
    def wave(cls, grid: PeriodicGrid, amplitude: float, k: int = 1, profile=None):
        """Compressive field v_a = a sin(k k1 x_a) (nonzero divergence)."""
        x = grid.coordinates()
        samples = np.stack([amplitude * np.sin(k * grid.k1 * x[a]) for a in range(grid.dim)])
        return cls(grid.dim, "wave", spectral=_clean(transform(grid, samples)), profile=profile)

    @classmethod
    def random(cls, grid: PeriodicGrid, seed: int, kmax: float = 4.0, amplitude: float = 0.1, profile=None):
        rng = np.random.default_rng(seed)
        f = random_band_limited(grid, rng, components=grid.dim, kmax=kmax, amplitude=amplitude)
        return cls(grid.dim, "random", spectral=f, profile=profile)

    @classmethod
    def from_field(cls, f: SpectralField, profile=None, family: str = "spectral"):
        return cls(f.grid.dim, family, spectral=f, profile=profile)

    @classmethod
    def from_series(cls, series: TimeSeriesField):
        """Piecewise linear interpolation in time between the stored snapshots."""
        return cls(series.grid.dim, "series", series=series)

    # ---------------------------------------------------------------------
    def _mollify(self, f: SpectralField) -> SpectralField:
        return f if self.j is None else low_pass(f, self.j - 1)

    def at_level(self, j: Optional[int]) -> "AdvectingVelocity":
        return AdvectingVelocity(
            self.dim, self.family, self.spectral, self.A, self.b, self.profile, self.series, j
        )

    @property
    def periodic(self) -> bool:
        return self.A is None or not np.any(self.A)

    def _theta(self, t: float) -> float:
        return 1.0 if self.profile is None else float(self.profile(t))

    def _series_weights(self, t: float):
        times = self.series.times
        if t <= times[0]:
            return [(0, 1.0)]
        if t >= times[-1]:
            return [(len(times) - 1, 1.0)]
        k = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[k]) / (times[k + 1] - times[k])
        return [(k, 1.0 - w), (k + 1, w)]

    def __call__(self, t: float, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.zeros_like(pts, dtype=float)
        if self.series is not None:
            for k, w in self._series_weights(t):
                out += w * self._series_eval[k].values(pts)
        else:
            th = self._theta(t)
            if self.spectral is not None:
                out += th * self._eval.values(pts)
            if self.A is not None:
                out += th * (self.A @ pts + self.b[:, None])
        return out

    def jacobian(self, t: float, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.zeros((self.dim, self.dim, pts.shape[1]))
        if self.series is not None:
            for k, w in self._series_weights(t):
                out += w * self._series_eval[k].jacobian(pts)
            return out
        th = self._theta(t)
        if self.spectral is not None:
            out += th * self._eval.jacobian(pts)
        if self.A is not None:
            out += th * self.A[:, :, None]
        return out

    def divergence(self, t: float, pts: np.ndarray) -> np.ndarray:
        return np.trace(self.jacobian(t, pts), axis1=0, axis2=1)

    def grad_sup(self, t: float, grid: PeriodicGrid) -> float:
        """sup_x of the operator 2-norm of D v(t, x), sampled on a doubled grid."""
        if self.spectral is None and self.series is None:
            return abs(self._theta(t)) * float(np.linalg.norm(self.A, 2))
        fine = grid.with_n(2 * grid.n)
        pts = fine.coordinates().reshape(grid.dim, -1)
        J = self.jacobian(t, pts)
        return float(np.max(np.linalg.norm(np.moveaxis(J, -1, 0), ord=2, axis=(1, 2))))

    def spectral_at(self, t: float) -> Optional[SpectralField]:
        """The mollified field at time t as a SpectralField (periodic families only)."""
        if self.series is not None:
            acc = None
            for k, w in self._series_weights(t):
                f = self._mollify(self.series.fields[k]) * w
                acc = f if acc is None else acc + f
            return acc
        if self.spectral is None:
            return None
        return self._mollify(self.spectral) * self._theta(t)


def _rk4_path(v: AdvectingVelocity, x0: np.ndarray, t0: float, t1: float, substeps: int, with_logdet: bool):
    """Integrate the characteristic ODE from t0 to t1 (t1 may be < t0)."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    h = (t1 - t0) / substeps
    x = np.array(x0, dtype=float)
    ld = np.zeros(x.shape[1])
    t = t0
    for _ in range(substeps):
        k1 = v(t, x)
        k2 = v(t + h / 2, x + h / 2 * k1)
        k3 = v(t + h / 2, x + h / 2 * k2)
        k4 = v(t + h, x + h * k3)
        if with_logdet:
            d1 = v.divergence(t, x)
            d2 = v.divergence(t + h / 2, x + h / 2 * k1)
            d3 = v.divergence(t + h / 2, x + h / 2 * k2)
            d4 = v.divergence(t + h, x + h * k3)
            ld = ld + h / 6 * (d1 + 2 * d2 + 2 * d3 + d4)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("flow integration produced non-finite positions")
        t += h
    return x, ld


def _time_integral(fn: Callable[[float], float], t: float, substeps: int) -> float:
    """Composite Simpson rule with one panel per substep."""
    if t == 0:
        return 0.0
    ts = np.linspace(0.0, t, 2 * substeps + 1)
    vals = np.array([fn(s) for s in ts])
    h = t / (2 * substeps)
    return float(h / 3 * (vals[0] + vals[-1] + 4 * vals[1:-1:2].sum() + 2 * vals[2:-1:2].sum()))


def _is_static(v: AdvectingVelocity) -> bool:
    return v.profile is None and v.series is None


@dataclass(frozen=True)
class FlowMap:
    """psi_t(x) = x + forward(x) and psi_t^{-1}(x) = x + inverse(x) on grid points.

    ``log_det`` holds the integral of div v along each forward characteristic.
    ``velocity`` and ``substeps`` are kept so the map can be evaluated at
    arbitrary points (finite differences, round trips).
    """

    grid: PeriodicGrid
    forward: np.ndarray
    inverse: np.ndarray
    t: float
    V: float
    j: Optional[int]
    log_det: np.ndarray
    velocity: AdvectingVelocity = field(repr=False)
    substeps: int = 64
    offset: Optional[np.ndarray] = None

    def grid_points(self) -> np.ndarray:
        return self.grid.coordinates().reshape(self.grid.dim, -1)

    def points(self, direction: str = "forward") -> np.ndarray:
        x = self.grid_points()
        if direction == "forward":
            return x + self.forward.reshape(self.grid.dim, -1)
        if direction == "inverse":
            return x + self.inverse.reshape(self.grid.dim, -1)
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")

    def map_points(self, pts: np.ndarray, direction: str = "forward") -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        off = np.zeros((self.grid.dim, 1)) if self.offset is None else self.offset[:, None]
        if direction == "forward":
            return _rk4_path(self.velocity, pts, 0.0, self.t, self.substeps, False)[0] + off
        if direction == "inverse":
            return _rk4_path(self.velocity, pts - off, self.t, 0.0, self.substeps, False)[0]
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")

    def shifted(self, a: Sequence[float]) -> "FlowMap":
        """The map x -> psi(x) + a (translation applied after the flow)."""
        a = np.asarray(a, dtype=float).reshape(self.grid.dim)
        base = np.zeros_like(a) if self.offset is None else self.offset
        out = replace(self, forward=self.forward + a.reshape((-1,) + (1,) * self.grid.dim), offset=base + a)
        x = self.grid_points()
        inv = out.map_points(x, "inverse") - x
        return replace(out, inverse=inv.reshape(self.inverse.shape))

    def jacobian(self, direction: str = "forward", h: float = FD_STEP, pts: Optional[np.ndarray] = None) -> np.ndarray:
        """Fourth-order central differences of the map; shape (d, d, N)."""
        d = self.grid.dim
        x = self.grid_points() if pts is None else np.atleast_2d(pts)
        out = np.empty((d, d, x.shape[1]))
        for i in range(d):
            e = np.zeros((d, 1))
            e[i] = h
            stack = np.concatenate([x + 2 * e, x + e, x - e, x - 2 * e], axis=1)
            m = self.map_points(stack, direction).reshape(d, 4, -1)
            out[:, i] = (-m[:, 0] + 8 * m[:, 1] - 8 * m[:, 2] + m[:, 3]) / (12 * h)
        return out

    def hessian_1d(self, h: float = 1e-2) -> np.ndarray:
        """Second derivative of the 1D forward map (five-point stencil)."""
        if self.grid.dim != 1:
            raise ValueError("hessian_1d is for one-dimensional flows")
        x = self.grid_points()
        stack = np.concatenate([x + 2 * h, x + h, x, x - h, x - 2 * h], axis=1)
        m = self.map_points(stack).reshape(5, -1)
        return (-m[0] + 16 * m[1] - 30 * m[2] + 16 * m[3] - m[4]) / (12 * h * h)

    def roundtrip_error(self) -> float:
        """max |psi(psi^{-1}(x)) - x| over the grid."""
        back = self.map_points(self.points("inverse"), "forward")
        return float(np.max(np.abs(back - self.grid_points())))

    def deviation(self, direction: str = "forward") -> float:
        """||D psi^{+-1} - I||_inf (operator 2-norm, max over grid points)."""
        D = self.jacobian(direction)
        I = np.eye(self.grid.dim)[:, :, None]
        return float(np.max(np.linalg.norm(np.moveaxis(D - I, -1, 0), ord=2, axis=(1, 2))))


def integrate_flow(v: AdvectingVelocity, t: float, substeps: int = 64, grid: Optional[PeriodicGrid] = None) -> FlowMap:
    """Forward and backward characteristics from every grid point, plus V and log det."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if t < 0:
        raise ValueError("t must be non-negative")
    if grid is None:
        if v.spectral is not None:
            grid = v.spectral.grid
        elif v.series is not None:
            grid = v.series.grid
        else:
            raise ValueError("a grid is required for affine velocity fields")
    if grid.dim != v.dim:
        raise ValueError("grid and velocity dimensions differ")
    x = grid.coordinates().reshape(grid.dim, -1)
    fwd, ld = _rk4_path(v, x, 0.0, t, substeps, True)
    inv, _ = _rk4_path(v, x, t, 0.0, substeps, False)
    if _is_static(v):
        V = t * v.grad_sup(0.0, grid)
    else:
        V = _time_integral(lambda s: v.grad_sup(s, grid), t, substeps)
    shape = (grid.dim,) + grid.shape
    return FlowMap(
        grid=grid,
        forward=(fwd - x).reshape(shape),
        inverse=(inv - x).reshape(shape),
        t=float(t),
        V=float(V),
        j=v.j,
        log_det=ld.reshape(grid.shape),
        velocity=v,
        substeps=substeps,
    )


def jacobian_det(flow: FlowMap, v: Optional[AdvectingVelocity] = None, h: float = FD_STEP):
    """(det D psi by finite differences, exp of the integrated divergence) on the grid."""
    if v is not None and v is not flow.velocity:
        raise ValueError("flow was not produced from this velocity")
    D = flow.jacobian("forward", h)
    det_fd = np.linalg.det(np.moveaxis(D, -1, 0)).reshape(flow.grid.shape)
    return det_fd, np.exp(flow.log_det)


def compose(f: SpectralField, flow: FlowMap, direction: str = "forward") -> SpectralField:
    """f o psi^{+-1} sampled on the grid by exact trigonometric evaluation, then transformed."""
    if f.grid != flow.grid:
        raise ValueError("field and flow live on different grids")
    pts = flow.points(direction)
    c, kmin = centered_coeffs(f.coeffs, f.grid.dim)
    vals = trig_eval(c, kmin, pts, f.grid.k1, 1.0 / math.sqrt(f.grid.volume))
    if f.is_real():
        vals = vals.real
    return transform(f.grid, vals.reshape((f.components,) + f.grid.shape))


def capillary_commutator_IIj(f: SpectralField, j: int, flow: FlowMap, eps: float) -> SpectralField:
    """L_eps(f_j) o psi - L_eps(f_j o psi) with f_j the j-th dyadic block."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    fj = dyadic_block(f, j)
    first = compose(capillary_op(fj, eps), flow)
    second = capillary_op(compose(fj, flow), eps)
    return first - second


def _field_from_points(grid: PeriodicGrid, vals: np.ndarray) -> SpectralField:
    return transform(grid, vals.reshape((-1,) + grid.shape))


def capillary_remainder_Ij(q: SpectralField, j: int, flow: FlowMap, eps: float) -> SpectralField:
    """L_eps(g_j) with g_j = (grad q_j) o psi x (I - D psi) (row vector times matrix)."""
    if q.components != 1:
        raise ValueError("q must be scalar")
    d = q.grid.dim
    gq = compose(gradient(dyadic_block(q, j)), flow).to_physical().reshape(d, -1)
    D = flow.jacobian("forward")
    I = np.eye(d)[:, :, None]
    # g_a = sum_b gq_b (I - Dpsi)_{b a}
    g = np.einsum("bn,ban->an", gq, I - D)
    return capillary_op(_field_from_points(q.grid, g), eps)


def capillary_remainder_Rj(q: SpectralField, j: int, flow: FlowMap, eps: float) -> SpectralField:
    """Direct form L_eps(grad q_j) o psi - L_eps(grad (q_j o psi))."""
    qj = dyadic_block(q, j)
    first = compose(capillary_op(gradient(qj), eps), flow)
    second = capillary_op(gradient(compose(qj, flow)), eps)
    return first - second


def _viscous(u: SpectralField, params: PhysicalParams) -> SpectralField:
    """A u = mu Lap u + (lambda + mu) grad div u."""
    from .spectral import apply_multiplier

    xi2 = u.grid.xi_norm() ** 2
    lap = apply_multiplier(u, -xi2)
    gd = gradient(divergence(u))
    return lap * params.mu + gd * (params.lambda_ + params.mu)


def system_remainders(u: SpectralField, q: SpectralField, flow: FlowMap, params: PhysicalParams, j: Optional[int] = None):
    """Remainders of the transformed linear system for the blocks u_j, q_j.

    R1 = div(u~) - (div u) o psi, R2 = (grad q) o psi - grad(q~) and
    R3 = (A u) o psi - A(u~), where ~ denotes composition with psi.  If ``j``
    is None the inputs are used as given (already localized).
    """
    if j is not None:
        u = dyadic_block(u, j)
        q = dyadic_block(q, j)
    ut = compose(u, flow)
    qt = compose(q, flow)
    R1 = divergence(ut) - compose(divergence(u), flow)
    R2 = compose(gradient(q), flow) - gradient(qt)
    R3 = compose(_viscous(u, params), flow) - _viscous(ut, params)
    return R1, R2, R3


def remainder_R3_chain_rule_1d(u: SpectralField, flow: FlowMap, params: PhysicalParams) -> SpectralField:
    """R3 in 1D from the chain rule: nu (u'' o psi (1 - psi'^2) - u' o psi psi'')."""
    if u.grid.dim != 1:
        raise ValueError("one-dimensional cross-check only")
    du = gradient(u)
    d2u = gradient(du)
    p1 = flow.jacobian("forward")[0, 0]
    p2 = flow.hessian_1d()
    a = compose(d2u, flow).to_physical()[0]
    b = compose(du, flow).to_physical()[0]
    vals = params.nu * (a * (1 - p1 ** 2) - b * p2)
    return transform(u.grid, vals[None])


def flow_constant(flow: FlowMap) -> float:
    """Smallest C with ||D psi^{+-1} - I||_inf <= e^{C V} - 1 (0 when V = 0)."""
    if flow.V <= 0:
        return 0.0
    dev = max(flow.deviation("forward"), flow.deviation("inverse"))
    return math.log1p(dev) / flow.V


def flow_rate_ratio(flow: FlowMap, eps: float, rng: np.random.Generator, n_samples: int = 256):
    """max | |psi^{-1}(x) - psi^{-1}(x - eps y)|^2 / (eps^2 |y|^2) - 1 | over random (x, y)."""
    d = flow.grid.dim
    x = rng.uniform(0, flow.grid.L, (d, n_samples))
    y = rng.standard_normal((d, n_samples))
    a = flow.map_points(x, "inverse")
    b = flow.map_points(x - eps * y, "inverse")
    r = np.sum((a - b) ** 2, axis=0) / (eps ** 2 * np.sum(y ** 2, axis=0))
    return float(np.max(np.abs(r - 1.0)))


def flow_time_for_smallness(v: AdvectingVelocity, t0: float, grid: Optional[PeriodicGrid] = None, substeps: int = 32,
                            fitted_C: Optional[float] = None, max_halvings: int = 40) -> float:
    """Halve t from t0 until e^{2 C V(t)} - 1 <= 1/2 with the fitted flow constant C."""
    t = t0
    for _ in range(max_halvings):
        fl = integrate_flow(v, t, substeps, grid)
        C = flow_constant(fl) if fitted_C is None else fitted_C
        if math.expm1(2 * C * fl.V) <= 0.5:
            return t
        t /= 2
    raise RuntimeError("could not meet the smallness condition by halving t")


def exp_gap_bound_holds(x: float, y: float) -> bool:
    """|e^x - e^y| <= |x - y| e^{max(x, y)} (evaluated without overflow)."""
    lhs = abs(math.expm1(-abs(x - y)))  # |e^x - e^y| / e^{max(x, y)}
    return lhs <= abs(x - y) * (1 + 1e-15)


def verify_commutator_bound(
    f: SpectralField,
    sigma: float,
    params: PhysicalParams,
    flow_family: Sequence[tuple],
    substeps: int = 32,
    js: Optional[Sequence[int]] = None,
) -> ResultTable:
    """Normalized commutator ratios summed over blocks, one row per flow.

    ``flow_family`` holds (name, AdvectingVelocity, t).  The flow for block j
    is built from S_{j-1} v.  rho_j = ||II'_j|| / ((V + e^{2V} - 1) 2^{-j sigma}
    ||L_eps f||_{B^sigma}), with V of the mollified field at level j.
    """
    eps = params.epsilon
    grid = f.grid
    if js is None:
        js = DyadicPartition(grid).js
    denom_norm = hybrid_norm(f, sigma, eps, "multiplier")
    table = ResultTable(COMMUTATOR_COLUMNS)
    for name, v, t in flow_family:
        rhos = []
        Vmax = 0.0
        Cmax = 0.0
        for j in js:
            fl = integrate_flow(v.at_level(int(j)), t, substeps, grid)
            Vmax = max(Vmax, fl.V)
            if fl.V == 0.0:
                rhos.append(0.0)
                continue
            Cmax = max(Cmax, flow_constant(fl))
            II = capillary_commutator_IIj(f, int(j), fl, eps)
            scale = (fl.V + math.expm1(2 * fl.V)) * 2.0 ** (-j * sigma) * denom_norm
            rhos.append(II.norm() / scale if scale > 0 else 0.0)
        rhos = np.asarray(rhos)
        table.add(
            flow=name,
            eps=eps,
            n=grid.n,
            t=float(t),
            V=Vmax,
            fitted_C=Cmax,
            small=bool(math.expm1(2 * Cmax * Vmax) <= 0.5),
            sum_rho=float(rhos.sum()),
            max_rho=float(rhos.max()) if rhos.size else 0.0,
        )
    return table


def transport_W(v: AdvectingVelocity, t: float, n_t: int = 16) -> float:
    """W(t) = int_0^t (||grad v||_{B^{d/2}} + ||v||_{B^{d/2}}^2) for periodic fields."""
    def integrand(s):
        f = v.spectral_at(s)
        if f is None:
            raise ValueError("W needs a periodic (spectral) velocity")
        f = f.remove_mean()
        d = f.grid.dim
        return besov_norm(gradient(f), d / 2) + besov_norm(f, d / 2) ** 2
    if _is_static(v):
        return t * integrand(0.0)
    return _time_integral(integrand, t, n_t)
