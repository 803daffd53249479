"""Physical parameters and the scalar threshold equations of the linear analysis.

All functions here are pure.  Root finding is plain bisection on monotone
functions; the bracket is grown geometrically before bisecting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "PhysicalParams",
    "ThresholdReport",
    "BracketError",
    "h",
    "h_inverse",
    "g_eps",
    "bisect_increasing",
    "solve_x_eps",
    "solve_y_eps",
    "gammas",
    "solve_a",
    "x_eps_asymptote",
    "m_value",
    "threshold_report",
    "bracket_chain_holds",
    "detect_eps0",
    "THRESHOLD_COLUMNS",
]

# exponent range used when growing a bisection bracket
X_MIN_EXP = -40
X_MAX_EXP = 80
DEFAULT_TOL = 1e-12
M_ONE_TOL = 1e-9
TAYLOR_CUT = 1e-8

THRESHOLD_COLUMNS = ("x_eps", "y_eps", "gamma1", "gamma2", "m", "a_M", "asymptote")


class BracketError(RuntimeError):
    """Raised when a sign change cannot be bracketed in the allowed range."""


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosities, capillarity, pressure slope and kernel width.

    ``nu = lambda_ + 2 mu`` is the compressible viscosity, ``nu0 = min(nu, mu)``
    and ``M = nu**2 / (4 kappa)`` is the viscosity/capillarity ratio.
    """

    mu: float
    lambda_: float
    kappa: float
    p: float
    epsilon: float

    def __post_init__(self):
        for name in ("mu", "lambda_", "kappa", "p", "epsilon"):
            val = getattr(self, name)
            if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
                raise ValueError(f"{name} must be a finite real number, got {val!r}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.nu <= 0:
            raise ValueError(f"nu = lambda + 2 mu must be positive, got {self.nu}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.p <= 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def from_nu(cls, nu: float, kappa: float, p: float, epsilon: float, mu: Optional[float] = None):
        """Build parameters from ``nu`` directly (``mu`` defaults to ``nu / 2``, i.e. lambda = 0)."""
        if mu is None:
            mu = nu / 2.0
        return cls(mu=mu, lambda_=nu - 2.0 * mu, kappa=kappa, p=p, epsilon=epsilon)

    @property
    def nu(self) -> float:
        return self.lambda_ + 2.0 * self.mu

    @property
    def nu0(self) -> float:
        return min(self.nu, self.mu)

    @property
    def M(self) -> float:
        return self.nu ** 2 / (4.0 * self.kappa)

    def with_eps(self, epsilon: float) -> "PhysicalParams":
        return PhysicalParams(self.mu, self.lambda_, self.kappa, self.p, epsilon)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ThresholdReport:
    x_eps: float
    y_eps: float
    gamma1: float
    gamma2: float
    m: float
    a_M: Optional[float]
    asymptote: float

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in THRESHOLD_COLUMNS}


def _h_scalar(x: float) -> float:
    if x < TAYLOR_CUT:
        return 1.0 - x / 2.0 + x * x / 6.0
    return -math.expm1(-x) / x


def h(x):
    """(1 - e^{-x}) / x with h(0) = 1.  Accepts scalars or arrays."""
    if isinstance(x, (float, int)) and not isinstance(x, bool):
        if not x >= 0:
            raise ValueError("h is only defined for x >= 0")
        return _h_scalar(float(x))
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise ValueError("h is only defined for x >= 0")
    small = xa < TAYLOR_CUT
    safe = np.where(small, 1.0, xa)
    out = np.where(small, 1.0 - xa / 2.0 + xa * xa / 6.0, -np.expm1(-safe) / safe)
    if np.ndim(x) == 0:
        return float(out)
    return out


def bisect_increasing(
    f: Callable[[float], float],
    target: float = 0.0,
    tol: float = DEFAULT_TOL,
    lo_exp: int = X_MIN_EXP,
    hi_exp: int = X_MAX_EXP,
) -> float:
    """Solve ``f(x) = target`` for an increasing ``f`` on (0, inf).

    The bracket starts at [1, 2] and is grown by powers of two within
    ``[2**lo_exp, 2**hi_exp]``.  ``tol`` is relative to the bracket.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = 1.0, 2.0
    while f(lo) - target > 0:
        lo /= 2.0
        if lo < 2.0 ** lo_exp:
            raise BracketError(f"no sign change above 2^{lo_exp} (f(lo) > target)")
    while f(hi) - target < 0:
        hi *= 2.0
        if hi > 2.0 ** hi_exp:
            raise BracketError(f"no sign change below 2^{hi_exp} (f(hi) < target)")
    # 400 halvings exhaust double precision long before the cap
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) - target < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def h_inverse(level: float, tol: float = DEFAULT_TOL) -> float:
    """Unique x > 0 with h(x) = level, for level in (0, 1)."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"h takes values in (0, 1) on x > 0, got level {level}")
    # -h is increasing
    return bisect_increasing(lambda x: -_h_scalar(x), -level, tol)


def g_eps(x, params: PhysicalParams):
    """Normalized discriminant 1 - 4p/(nu^2 x) - (4 kappa / nu^2) h(eps^2 x)."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise ValueError("g_eps is defined for x > 0")
    nu2 = params.nu ** 2
    out = 1.0 - 4.0 * params.p / (nu2 * xa) - 4.0 * params.kappa / nu2 * h(params.epsilon ** 2 * xa)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _g_scalar_fn(params: PhysicalParams) -> Callable[[float], float]:
    nu2 = params.nu ** 2
    a = 4.0 * params.p / nu2
    b = 4.0 * params.kappa / nu2
    e2 = params.epsilon ** 2
    return lambda x: 1.0 - a / x - b * _h_scalar(e2 * x)


def solve_x_eps(params: PhysicalParams, tol: float = DEFAULT_TOL) -> float:
    """Root of g_eps: the squared frequency where the eigenvalues become real."""
    return bisect_increasing(_g_scalar_fn(params), 0.0, tol)


def solve_y_eps(params: PhysicalParams, tol: float = DEFAULT_TOL) -> float:
    """Enlarged threshold: g_eps^{-1}(1/4) if M < 3/4, else g_eps^{-1}(1 - 1/(2M))."""
    M = params.M
    level = 0.25 if M < 0.75 else 1.0 - 1.0 / (2.0 * M)
    return bisect_increasing(_g_scalar_fn(params), level, tol)


def m_value(M: float) -> float:
    """sqrt(g_eps(y_eps)), which only depends on M."""
    return 0.5 if M < 0.75 else math.sqrt(1.0 - 1.0 / (2.0 * M))


@lru_cache(maxsize=256)
def gammas(M: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    if M <= 0:
        raise ValueError("M must be positive")
    if M >= 0.75:
        return h_inverse(0.5, tol), h_inverse(0.25, tol)
    return h_inverse(0.75 * M, tol), h_inverse(0.5 * M, tol)


def solve_a(M: float, tol: float = DEFAULT_TOL) -> float:
    """Positive root of 1 - h(x)/M, defined for 0 < M < 1."""
    if not 0.0 < M < 1.0:
        raise ValueError(f"a(M) needs 0 < M < 1, got {M}")
    return h_inverse(M, tol)


def x_eps_asymptote(params: PhysicalParams, m_tol: float = M_ONE_TOL) -> float:
    """Small-eps equivalent of x_eps in the three cases M > 1, M = 1, M < 1."""
    M = params.M
    if abs(M - 1.0) <= m_tol:
        return math.sqrt(2.0 * params.p / params.kappa) / params.epsilon
    if M > 1.0:
        return 4.0 * params.p / (params.nu ** 2 - 4.0 * params.kappa)
    return solve_a(M) / params.epsilon ** 2


def threshold_report(params: PhysicalParams, tol: float = DEFAULT_TOL) -> ThresholdReport:
    M = params.M
    g1, g2 = gammas(M, tol)
    return ThresholdReport(
        x_eps=solve_x_eps(params, tol),
        y_eps=solve_y_eps(params, tol),
        gamma1=g1,
        gamma2=g2,
        m=m_value(M),
        a_M=solve_a(M, tol) if M < 1.0 else None,
        asymptote=x_eps_asymptote(params),
    )


def bracket_chain_holds(params: PhysicalParams, tol: float = DEFAULT_TOL) -> bool:
    """x_eps < gamma1/eps^2 <= y_eps <= gamma2/eps^2 (with a relative slack of 1e-9)."""
    eps2 = params.epsilon ** 2
    x = solve_x_eps(params, tol)
    y = solve_y_eps(params, tol)
    g1, g2 = gammas(params.M, tol)
    slack = 1e-9
    return bool(
        x < g1 / eps2 * (1 + slack)
        and g1 / eps2 <= y * (1 + slack)
        and y <= g2 / eps2 * (1 + slack)
    )


def detect_eps0(params: PhysicalParams, eps_grid: Optional[Sequence[float]] = None) -> float:
    """Largest sampled eps such that the bracket chain holds at it and at every smaller sample.

    Returns 0.0 if the chain fails at the smallest sample.
    """
    if eps_grid is None:
        eps_grid = np.logspace(-4, 1, 51)
    eps_sorted = sorted(float(e) for e in eps_grid)
    eps0 = 0.0
    for e in eps_sorted:
        if bracket_chain_holds(params.with_eps(e)):
            eps0 = e
        else:
            break
    return eps0
