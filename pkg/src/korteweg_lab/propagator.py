"""Exact per-mode propagator of the linearized nonlocal system and its verifiers.

For a wavevector xi, with a(xi) = p + kappa |xi|^2 h(eps^2 |xi|^2), the pair
(q_hat, v_hat) obeys d/dt X = A X with

    A = [[0, -|xi|], [a |xi|, -nu |xi|^2]],

and the curl part w evolves by the heat factor e^{-mu |xi|^2 t}.  Writing
tau = nu t |xi|^2 / 2 and g = 1 - 4a/(nu^2 |xi|^2) the exponential is

    e^{tA} = e^{-tau} (cosh(tau sqrt g) I + t sinh(tau sqrt g)/(tau sqrt g) (A + tau/t I)),

which is evaluated through sinc in the oscillatory regime (g < 0) and
through h(2 tau R) in the real regime (g > 0) so that nothing degenerates
as g -> 0.  In a thin window around g = 0 the Jordan form is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .params import PhysicalParams, gammas, h, m_value, solve_x_eps, solve_y_eps
from .spectral import PeriodicGrid, SpectralField, _require_zero_mean
from .littlewood_paley import C_BIG, C_SMALL, TimeSeriesField
from .tables import ResultTable, report_table

DEGENERATE_WINDOW = 1e-8

OSCILLATORY = "oscillatory"
DEGENERATE = "degenerate"
REAL = "real"


def capillary_coefficient(xi2, params: PhysicalParams, local: bool = False):
    """a(xi) = p + (kappa/eps^2)(1 - e^{-eps^2 |xi|^2}); local variant p + kappa |xi|^2."""
    xi2 = np.asarray(xi2, dtype=float)
    if local:
        return params.p + params.kappa * xi2
    return params.p + params.kappa * xi2 * h(params.epsilon ** 2 * xi2)


def matrix_A(xi_norm: float, params: PhysicalParams, local: bool = False) -> np.ndarray:
    a = float(capillary_coefficient(xi_norm ** 2, params, local))
    return np.array([[0.0, -xi_norm], [a * xi_norm, -params.nu * xi_norm ** 2]])


@dataclass(frozen=True)
class ModeSymbol:
    xi_norm: float
    params: PhysicalParams
    a: float
    g: float
    discriminant: float
    regime: str
    S: Optional[float]
    R: Optional[float]
    one_minus_R: Optional[float]
    lambda_plus: complex
    lambda_minus: complex
    local: bool = False


def mode_symbol(xi_norm: float, params: PhysicalParams, local: bool = False) -> ModeSymbol:
    if not xi_norm > 0:
        raise ValueError("xi_norm must be positive")
    nu = params.nu
    xi2 = xi_norm * xi_norm
    a = float(capillary_coefficient(xi2, params, local))
    ratio = 4.0 * a / (nu * nu * xi2)
    g = 1.0 - ratio
    disc = xi2 * (nu * nu * xi2 - 4.0 * a)
    half = nu * xi2 / 2.0
    S = R = omr = None
    if abs(g) < DEGENERATE_WINDOW:
        regime = DEGENERATE
        lp = lm = complex(-half)
    elif g < 0:
        regime = OSCILLATORY
        S = math.sqrt(-g)
        lp = complex(-half, -half * S)
        lm = complex(-half, half * S)
    else:
        regime = REAL
        R = math.sqrt(g)
        omr = ratio / (1.0 + R)
        lp = complex(-half * (1.0 + R))
        lm = complex(-half * omr)
    return ModeSymbol(xi_norm, params, a, g, disc, regime, S, R, omr, lp, lm, local)


def propagator_entries(xi_norm, a, nu: float, t):
    """Entries (qq, qv, vq, vv) of e^{tA}; all inputs broadcast."""
    xi = np.asarray(xi_norm, dtype=float)
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    xi, a, t = np.broadcast_arrays(xi, a, t)
    xi2 = xi * xi
    ratio = 4.0 * a / (nu * nu * xi2)
    g = 1.0 - ratio
    tau = nu * t * xi2 / 2.0
    qq = np.empty(xi.shape)
    qv = np.empty(xi.shape)
    vq = np.empty(xi.shape)
    vv = np.empty(xi.shape)

    osc = g <= -DEGENERATE_WINDOW
    real = g >= DEGENERATE_WINDOW
    deg = ~(osc | real)

    if np.any(osc):
        S = np.sqrt(-g[osc])
        ta, tt, xo, ao = tau[osc], t[osc], xi[osc], a[osc]
        e = np.exp(-ta)
        c = np.cos(ta * S)
        sn = np.sinc(ta * S / np.pi)  # sin(x)/x
        qq[osc] = e * (c + ta * sn)
        qv[osc] = -xo * tt * e * sn
        vq[osc] = ao * xo * tt * e * sn
        vv[osc] = e * (c - ta * sn)
    if np.any(real):
        R = np.sqrt(g[real])
        omr = ratio[real] / (1.0 + R)
        ta, xo, ao = tau[real], xi[real], a[real]
        E1 = np.exp(-ta * omr)
        E2 = np.exp(-ta * (1.0 + R))
        C = 0.5 * (E1 + E2)
        Sh = ta * E1 * h(2.0 * ta * R)
        qq[real] = C + Sh
        qv[real] = -2.0 * Sh / (nu * xo)
        vq[real] = 2.0 * ao * Sh / (nu * xo)
        vv[real] = C - Sh
    if np.any(deg):
        ta, tt, xo, ao = tau[deg], t[deg], xi[deg], a[deg]
        e = np.exp(-ta)
        qq[deg] = e * (1.0 + ta)
        qv[deg] = -xo * tt * e
        vq[deg] = ao * xo * tt * e
        vv[deg] = e * (1.0 - ta)
    return qq, qv, vq, vv


def regime_of(g) -> np.ndarray:
    g = np.asarray(g)
    out = np.full(g.shape, DEGENERATE, dtype=object)
    out[g <= -DEGENERATE_WINDOW] = OSCILLATORY
    out[g >= DEGENERATE_WINDOW] = REAL
    return out


@dataclass(frozen=True)
class ModeState:
    q_hat: complex
    v_hat: complex
    w_hat: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))


def evolve_mode(state0: ModeState, sym: ModeSymbol, t: float) -> ModeState:
    if t < 0:
        raise ValueError("t must be nonnegative")
    qq, qv, vq, vv = (float(x) for x in propagator_entries(sym.xi_norm, sym.a, sym.params.nu, t))
    q = qq * state0.q_hat + qv * state0.v_hat
    v = vq * state0.q_hat + vv * state0.v_hat
    w = np.asarray(state0.w_hat, dtype=complex) * math.exp(-sym.params.mu * sym.xi_norm ** 2 * t)
    return ModeState(q, v, w)


def velocity_identity_check(sym: ModeSymbol) -> float:
    """Relative residual of a = (nu^2 |xi|^2 / 4)(1 - R)(1 + R) in the real regime."""
    if sym.regime != REAL:
        raise ValueError(f"velocity identity needs the real regime, got {sym.regime}")
    nu = sym.params.nu
    rhs = nu * nu * sym.xi_norm ** 2 / 4.0 * sym.one_minus_R * (1.0 + sym.R)
    return abs(sym.a - rhs) / abs(sym.a)


# ---------------------------------------------------------------------------
# field-level propagation


class LinearPropagator:
    """Exact propagation of (q, u) on a grid over a fixed step ``dt``.

    ``u`` is split into its compressible part v and its curl part; the
    compressible pair uses the 2x2 exponential, the curl part the heat factor.
    The mean mode does not move (the symbol vanishes at xi = 0).
    """

    def __init__(self, grid: PeriodicGrid, params: PhysicalParams, dt: float, local: bool = False):
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        self.grid = grid
        self.params = params
        self.dt = dt
        self.local = local
        xi = grid.wavevectors()
        xn = np.sqrt(np.sum(xi ** 2, axis=0))
        self._zero = xn == 0
        xs = np.where(self._zero, 1.0, xn)
        self._xi = xi
        self._xn = xs
        a = capillary_coefficient(xs ** 2, params, local)
        qq, qv, vq, vv = propagator_entries(xs, a, params.nu, dt)
        for arr, val in ((qq, 1.0), (qv, 0.0), (vq, 0.0), (vv, 1.0)):
            arr[self._zero] = val
        self.qq, self.qv, self.vq, self.vv = qq, qv, vq, vv
        self.heat = np.exp(-params.mu * xn ** 2 * dt)

    def split(self, u_coeffs: np.ndarray):
        """(v_hat, solenoidal coefficients) with u = -i xi v/|xi| + u_sol away from xi = 0."""
        xi, xn = self._xi, self._xn
        v = 1j * np.sum(xi * u_coeffs, axis=0) / xn
        v = np.where(self._zero, 0.0, v)
        comp = -1j * xi * v / xn
        sol = u_coeffs - comp
        return v, sol

    def merge(self, v: np.ndarray, sol: np.ndarray) -> np.ndarray:
        return -1j * self._xi * v / self._xn + sol

    def apply_coeffs(self, qc: np.ndarray, uc: np.ndarray):
        """Advance raw coefficient arrays (q: grid shape, u: (dim,) + grid shape)."""
        v, sol = self.split(uc)
        q1 = self.qq * qc + self.qv * v
        v1 = self.vq * qc + self.vv * v
        return q1, self.merge(v1, self.heat * sol)

    def apply(self, q: SpectralField, u: SpectralField):
        q1, u1 = self.apply_coeffs(q.coeffs[0], u.coeffs)
        return SpectralField(self.grid, q1[None], q.zero_mean), SpectralField(self.grid, u1, u.zero_mean)


Forcing = Optional[Callable[[float], SpectralField]]

_GAUSS4_X, _GAUSS4_W = np.polynomial.legendre.leggauss(4)


def duhamel_evolve(
    q0: SpectralField,
    u0: SpectralField,
    params: PhysicalParams,
    T: float,
    steps: int,
    F: Forcing = None,
    G: Forcing = None,
    local: bool = False,
):
    """Solve the linear system with forcing by exact propagation and Duhamel quadrature.

    F(t) (scalar) and G(t) (vector) are callables returning SpectralFields.
    Each step adds sum_i w_i E(dt - s_i) B(t + s_i) over the 4-point Gauss rule.
    Returns TimeSeriesField trajectories for q and u at the ``steps + 1`` step times.
    """
    if q0.grid != u0.grid:
        raise ValueError("grid mismatch between q0 and u0")
    _require_zero_mean(q0, "duhamel_evolve")
    _require_zero_mean(u0, "duhamel_evolve")
    grid = q0.grid
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = T / steps
    E = LinearPropagator(grid, params, dt, local)
    s_nodes = 0.5 * dt * (_GAUSS4_X + 1.0)
    s_weights = 0.5 * dt * _GAUSS4_W
    Es = [LinearPropagator(grid, params, dt - s, local) for s in s_nodes]
    qc = q0.coeffs[0].copy()
    uc = u0.coeffs.copy()
    times = [0.0]
    qs = [SpectralField(grid, qc[None], True)]
    us = [SpectralField(grid, uc, True)]
    zeros_q = np.zeros(grid.shape, dtype=complex)
    zeros_u = np.zeros((grid.dim,) + grid.shape, dtype=complex)
    for k in range(steps):
        t0 = k * dt
        qn, un = E.apply_coeffs(qc, uc)
        if F is not None or G is not None:
            for s, w, Ek in zip(s_nodes, s_weights, Es):
                fq = F(t0 + s).coeffs[0] if F is not None else zeros_q
                fu = G(t0 + s).coeffs if G is not None else zeros_u
                dq, du = Ek.apply_coeffs(fq, fu)
                qn = qn + w * dq
                un = un + w * du
        qc, uc = qn, un
        times.append((k + 1) * dt)
        qs.append(SpectralField(grid, qc[None], True))
        us.append(SpectralField(grid, uc, True))
    return TimeSeriesField(times, qs), TimeSeriesField(times, us)


# ---------------------------------------------------------------------------
# verification of the pointwise and time-integrated estimates


def _block_xis(j: int, n_xi: int) -> np.ndarray:
    return 2.0 ** j * np.geomspace(C_SMALL, C_BIG, n_xi)


def _regime_label(xi2: float, x_eps: float, y_eps: float) -> str:
    if xi2 < x_eps:
        return "low"
    if xi2 < y_eps:
        return "medium"
    return "high"


def _safe_sqrt_g(x, params):
    from .params import g_eps

    return math.sqrt(max(g_eps(x, params), 0.0))


def pointwise_envelopes(params: PhysicalParams, j: int, xi: float, t: np.ndarray, regime: str):
    """Claimed bounds for one wavevector: list of (lhs_weight, a, b, envelope(t), component)."""
    nu, p, kappa, eps = params.nu, params.p, params.kappa, params.epsilon
    tj = 2.0 ** j
    c2 = C_SMALL ** 2 * tj * tj
    qa, qb = 1.0 + nu * tj, 1.0 + 1.0 / math.sqrt(p)
    if regime == "low":
        env = np.exp(-nu * t * c2 / 4.0)
        return [
            (1.0 + nu * tj, qa, qb, env, "q"),
            (1.0, (1.0 + nu * tj) * (1.0 + math.sqrt(p)) * (1.0 + 4.0 * kappa / nu ** 2), 1.0, env, "v"),
        ]
    if regime == "medium":
        m = m_value(params.M)
        env = np.exp(-nu * t * c2 * (1.0 - m) / 4.0) / (1.0 - m)
        return [(1.0 + nu * tj, qa, qb, env, "q"), (1.0, nu * tj, 1.0, env, "v")]
    g1, _ = gammas(params.M)
    env_q = np.exp(-nu * t * xi * xi / 2.0) + np.exp(-kappa / (nu * eps * eps) * (1.0 - math.exp(-g1)) * t)
    lo = _safe_sqrt_g(c2, params)
    hi = _safe_sqrt_g(C_BIG ** 2 * tj * tj, params)
    env_v = np.exp(-nu * t * c2 / 4.0) + (1.0 - lo) * np.exp(-nu * t * c2 / 2.0 * (1.0 - hi))
    return [(1.0 + nu * tj, qa, qb, env_q, "q"), (1.0, nu * tj, 1.0, env_v, "v")]


def _default_times(params: PhysicalParams, j: int, n_t: int = 48) -> np.ndarray:
    """Times spanning from the fastest to well past the slowest scale of block j."""
    nu = params.nu
    xi_hi = C_BIG * 2.0 ** j
    xi_lo = C_SMALL * 2.0 ** j
    fast = nu * xi_hi ** 2
    a_hi = float(capillary_coefficient(xi_hi ** 2, params))
    slow = min(nu * xi_lo ** 2 / 8.0, a_hi / nu / 4.0)
    return np.concatenate([[0.0], np.geomspace(1e-3 / fast, 40.0 / slow, n_t)])


def verify_pointwise_bounds(
    params: PhysicalParams,
    j_range: Sequence[int],
    t_samples: Optional[np.ndarray] = None,
    n_xi: int = 9,
) -> ResultTable:
    """Fit the constant of the pointwise frequency estimates, per (j, regime).

    For data (q0, v0) the bound W |X(t)| <= C env(t) (a |q0| + b |v0|) holds for all
    data iff W max(|P_1|/a, |P_2|/b) <= C env(t), where (P_1, P_2) is the relevant
    row of the propagator; the cell constant is that ratio.
    """
    table = report_table()
    x_eps = solve_x_eps(params)
    y_eps = solve_y_eps(params)
    eps = params.epsilon
    for j in j_range:
        t = _default_times(params, j) if t_samples is None else np.asarray(t_samples, dtype=float)
        best: dict = {}
        for xi in _block_xis(j, n_xi):
            xi2 = xi * xi
            reg = _regime_label(xi2, x_eps, y_eps)
            a = float(capillary_coefficient(xi2, params))
            qq, qv, vq, vv = propagator_entries(xi, a, params.nu, t)
            rows = {"q": (qq, qv), "v": (vq, vv)}
            for W, ca, cb, env, comp in pointwise_envelopes(params, j, xi, t, reg):
                P1, P2 = rows[comp]
                lhs = W * np.maximum(np.abs(P1) / ca, np.abs(P2) / cb)
                ok = env > 1e-280
                ratio = np.where(ok, lhs / np.where(ok, env, 1.0), 0.0)
                k = int(np.argmax(ratio))
                if reg not in best or ratio[k] > best[reg][0]:
                    best[reg] = (float(ratio[k]), float(t[k]))
        for reg in ("low", "medium", "high"):
            if reg in best:
                table.add(j=int(j), eps=eps, regime=reg, fitted_C=best[reg][0], argmax_t=best[reg][1])
    return table


def high_frequency_damping(params: PhysicalParams, xi: float, n_t: int = 200) -> tuple[float, float]:
    """(measured decay rate of |q_hat(t)| tail, claimed rate kappa (1 - e^{-gamma1}) / (nu eps^2)).

    The tail is fitted by least squares on log|q_hat| once the fast branch has died out.
    """
    nu = params.nu
    a = float(capillary_coefficient(xi * xi, params))
    sym = mode_symbol(xi, params)
    if sym.regime != REAL:
        raise ValueError("damping rate check needs a real-regime frequency")
    slow = -sym.lambda_minus.real
    fast = -sym.lambda_plus.real
    t0 = 30.0 / fast
    t = np.linspace(t0, t0 + 5.0 / slow, n_t)
    qq, _, _, _ = propagator_entries(xi, a, nu, t)
    slope = np.polyfit(t, np.log(np.abs(qq)), 1)[0]
    g1, _ = gammas(params.M)
    claimed = params.kappa / (nu * params.epsilon ** 2) * (1.0 - math.exp(-g1))
    return -float(slope), claimed


def j0_bar(params: PhysicalParams) -> int:
    """Largest j with sqrt(y_eps) in 2^j [c0, C0]."""
    r = math.sqrt(solve_y_eps(params))
    return int(math.floor(math.log2(r / C_SMALL)))


def _integration_times(params: PhysicalParams, xi: float) -> np.ndarray:
    """Grid resolving both the fastest decay and any oscillation up to the slowest decay."""
    sym = mode_symbol(xi, params)
    nu = params.nu
    fast = nu * xi * xi
    slow = -sym.lambda_minus.real if sym.regime == REAL else nu * xi * xi / 2.0
    T = 60.0 / slow
    pieces = [np.array([0.0]), np.geomspace(T * 1e-12 if fast * T > 1e12 else 1e-4 / fast, T, 3000)]
    if sym.regime == OSCILLATORY:
        omega = nu * xi * xi / 2.0 * sym.S
        n_osc = int(min(400000, max(2000, 40.0 * omega * T / (2 * math.pi))))
        pieces.append(np.linspace(0.0, T, n_osc))
    return np.unique(np.concatenate(pieces))


def time_estimate_lhs(params: PhysicalParams, j: int, xi: float, high: bool) -> tuple[float, float]:
    """Left sides of the block time estimate for unit q0 and unit v0 at frequency xi."""
    nu, eps = params.nu, params.epsilon
    tj = 2.0 ** j
    t = _integration_times(params, xi)
    a = float(capillary_coefficient(xi * xi, params))
    qq, qv, vq, vv = propagator_entries(xi, a, nu, t)
    qweight = nu / eps ** 2 if high else nu * tj * tj
    out = []
    for q, v in ((qq, vq), (qv, vv)):
        q, v = np.abs(q), np.abs(v)
        lhs = v.max() + nu * tj * tj * np.trapezoid(v, t)
        lhs += (1.0 + nu * tj) * (q.max() + qweight * np.trapezoid(q, t))
        out.append(lhs)
    return out[0], out[1]


def verify_time_estimates(params: PhysicalParams, j_range: Sequence[int], n_xi: int = 5) -> ResultTable:
    """Fit the uniform constant of the block time estimates, one row per j.

    ``regime`` is "low" for j <= j0_bar and "high" above; the heat part of the
    velocity is reported separately by :func:`heat_time_constant`.
    """
    table = report_table()
    jb = j0_bar(params)
    M = params.M
    p = params.p
    nu = params.nu
    for j in j_range:
        tj = 2.0 ** j
        high = j > jb
        if high:
            coef = max(1.0, M)
            ca, cb = 1.0 + nu * tj, 1.0 + 1.0 / math.sqrt(p)
        else:
            coef = max(1.0 / M, M * M)
            ca, cb = (1.0 + nu * tj) * (1.0 + math.sqrt(p)), 1.0 + 1.0 / math.sqrt(p)
        best = 0.0
        for xi in _block_xis(j, n_xi):
            l1, l2 = time_estimate_lhs(params, j, xi, high)
            best = max(best, max(l1 / ca, l2 / cb) / coef)
        table.add(j=int(j), eps=params.epsilon, regime="high" if high else "low", fitted_C=best, argmax_t=float("nan"))
    return table


def heat_time_constant(j: int, n_xi: int = 9) -> float:
    """max over the block of sup|w| + mu 2^{2j} int |w| for unit data (exact integrals)."""
    xi = _block_xis(j, n_xi)
    return float(np.max(1.0 + (2.0 ** (2 * j)) / (xi * xi)))
