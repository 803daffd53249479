"""Pseudo-spectral time stepping of the local and nonlocal Korteweg systems.

The linear part (pressure, viscosity, capillarity) is propagated exactly by
:class:`~korteweg_lab.propagator.LinearPropagator`; the quadratic and
higher terms are treated explicitly with a second order Lawson (integrating
factor Heun) step.  Nonlinear terms are formed in physical space on the
doubled grid and cut back to the 2/3 band.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .littlewood_paley import TimeSeriesField, energy_norm_E
from .params import PhysicalParams
from .propagator import LinearPropagator, duhamel_evolve
from .spectral import (
    PeriodicGrid,
    SpectralField,
    _resample_coeffs,
    capillary_symbol,
    save_snapshot,
)
from .tables import ResultTable

__all__ = [
    "FluidState",
    "PressureLaw",
    "VacuumError",
    "InstabilityError",
    "nonlinear_terms",
    "step",
    "integrate",
    "convergence_study",
    "symbol_gap_order",
    "linear_trajectory_order",
    "observed_order",
    "CONVERGENCE_COLUMNS",
    "LOCAL",
    "NONLOCAL",
]

LOCAL = "local_K"
NONLOCAL = "nonlocal_RW"
VACUUM_THRESHOLD = 0.1
GROWTH_LIMIT = 10.0
CONVERGENCE_COLUMNS = ("eps", "distance", "observed_order")


class VacuumError(FloatingPointError):
    """The density 1 + q came too close to zero."""


class InstabilityError(FloatingPointError):
    """The solution norm grew by more than the allowed factor in one step."""


@dataclass(frozen=True)
class FluidState:
    q: SpectralField
    u: SpectralField
    t: float = 0.0

    def __post_init__(self):
        if self.q.grid != self.u.grid:
            raise ValueError("q and u live on different grids")
        if self.q.components != 1 or self.u.components != self.q.grid.dim:
            raise ValueError("q must be scalar and u must have dim components")

    @property
    def grid(self) -> PeriodicGrid:
        return self.q.grid

    def min_density(self) -> float:
        return float(1.0 + _padded_physical(self.q)[0].min())

    def norm(self) -> float:
        return math.sqrt(self.q.norm() ** 2 + self.u.norm() ** 2)

    def q_mean(self) -> float:
        return float(self.q.mean_coeff[0].real / math.sqrt(self.grid.volume))

    def with_fields(self, q: SpectralField, u: SpectralField, t: float) -> "FluidState":
        return FluidState(q, u, t)


class PressureLaw:
    """Barotropic law P(rho) with its derivative; only P'(1) = p enters the linear part."""

    def __init__(self, P: Callable, Pprime: Callable, K: Optional[Callable] = None, name: str = "custom"):
        self.P = P
        self.Pprime = Pprime
        self._K = K
        self.name = name
        if not float(Pprime(1.0)) > 0:
            raise ValueError("the pressure law needs P'(1) > 0")

    @property
    def p(self) -> float:
        return float(self.Pprime(1.0))

    @classmethod
    def gamma_law(cls, gamma: float = 2.0, p: float = 1.0) -> "PressureLaw":
        """P(rho) = p rho^gamma / gamma, so K(q) = p (1 - (1+q)^{gamma-2}) (zero for gamma = 2)."""
        if gamma <= 0 or p <= 0:
            raise ValueError("gamma and p must be positive")

        def K(q):
            if gamma == 2.0:
                return np.zeros_like(q, dtype=float)
            return p * (1.0 - np.power(1.0 + q, gamma - 2.0))

        return cls(
            lambda r: p * np.power(r, gamma) / gamma,
            lambda r: p * np.power(r, gamma - 1.0),
            K,
            name=f"gamma={gamma}",
        )

    def K(self, q):
        """P'(1) - P'(1+q)/(1+q), from the closed form when one was supplied."""
        q = np.asarray(q, dtype=float)
        if self._K is not None:
            return self._K(q)
        return self.K_generic(q)

    def K_generic(self, q):
        q = np.asarray(q, dtype=float)
        return self.p - self.Pprime(1.0 + q) / (1.0 + q)


def I_of(q):
    return q / (1.0 + q)


def _padded_physical(f: SpectralField) -> np.ndarray:
    g = f.grid
    N = 2 * g.n
    big = g.with_n(N)
    c = _resample_coeffs(f.coeffs, g.dim, g.n, N)
    axes = tuple(range(1, g.dim + 1))
    return np.fft.ifftn(c, axes=axes, norm="ortho").real / math.sqrt(big.cell_volume)


def _from_padded(grid: PeriodicGrid, phys: np.ndarray) -> np.ndarray:
    N = 2 * grid.n
    big = grid.with_n(N)
    axes = tuple(range(1, grid.dim + 1))
    c = np.fft.fftn(phys, axes=axes, norm="ortho") * math.sqrt(big.cell_volume)
    return _resample_coeffs(c, grid.dim, N, grid.n) * grid.band_mask()[None]


def _derivative_coeffs(grid: PeriodicGrid, c: np.ndarray) -> np.ndarray:
    """i xi_i c for every component; result shape (comps, dim) + grid shape."""
    xi = grid.wavevectors()
    return 1j * xi[None] * c[:, None]


def nonlinear_terms(state: FluidState, law: PressureLaw, params: PhysicalParams,
                    vacuum_threshold: float = VACUUM_THRESHOLD):
    """Right-hand sides (-div(q u), -u.grad u + K(q) grad q - I(q) A u).

    The continuity term is written in divergence form, which equals
    -u.grad q - q div u and conserves the mean of q exactly.
    """
    grid = state.grid
    d = grid.dim
    qc = state.q.coeffs
    uc = state.u.coeffs
    xi = grid.wavevectors()
    xi2 = np.sum(xi ** 2, axis=0)

    q = _padded_physical(state.q)[0]
    if float(1.0 + q.min()) < vacuum_threshold:
        raise VacuumError(f"min(1+q) = {1.0 + q.min():.3g} is below {vacuum_threshold}")
    u = _padded_physical(state.u)
    gq = _padded_physical(SpectralField(grid, _derivative_coeffs(grid, qc)[0]))
    du = _derivative_coeffs(grid, uc).reshape((d * d,) + grid.shape)  # a * d + i
    gu = _padded_physical(SpectralField(grid, du)).reshape((d, d) + q.shape)
    # A u = mu lap u + (lambda + mu) grad div u
    div_hat = np.sum(1j * xi * uc, axis=0)
    Au_hat = -params.mu * xi2[None] * uc + (params.lambda_ + params.mu) * 1j * xi * div_hat[None]
    Au = _padded_physical(SpectralField(grid, Au_hat))

    fq_phys = q[None] * u  # q u, to be differentiated
    fq_hat = _from_padded(grid, fq_phys)
    Fq = -np.sum(1j * xi * fq_hat, axis=0)

    adv = np.einsum("in,ain->an", u.reshape(d, -1), gu.reshape(d, d, -1)).reshape(u.shape)
    Kq = law.K(q)
    Iq = I_of(q)
    fu_phys = -adv + Kq[None] * gq - Iq[None] * Au
    Fu = _from_padded(grid, fu_phys)
    return SpectralField(grid, Fq[None]), SpectralField(grid, Fu)


_PROP_CACHE: dict = {}


def _propagator(grid: PeriodicGrid, params: PhysicalParams, dt: float, mode: str) -> LinearPropagator:
    if mode not in (LOCAL, NONLOCAL):
        raise ValueError(f"mode must be {LOCAL!r} or {NONLOCAL!r}, got {mode!r}")
    key = (grid, params, float(dt), mode)
    prop = _PROP_CACHE.get(key)
    if prop is None:
        if len(_PROP_CACHE) > 64:
            _PROP_CACHE.clear()
        prop = LinearPropagator(grid, params, dt, local=(mode == LOCAL))
        _PROP_CACHE[key] = prop
    return prop


def step(state: FluidState, dt: float, mode: str, params: PhysicalParams,
         law: Optional[PressureLaw] = None, growth_limit: float = GROWTH_LIMIT) -> FluidState:
    """One Lawson-Heun step: X1 = E(X + dt N(X)), X' = E X + dt/2 (E N(X) + N(X1))."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if law is None:
        law = PressureLaw.gamma_law(2.0, params.p)
    elif abs(law.p - params.p) > 1e-12 * max(1.0, params.p):
        raise ValueError("pressure law P'(1) does not match params.p")
    E = _propagator(state.grid, params, dt, mode)
    grid = state.grid
    q0, u0 = state.q.coeffs[0], state.u.coeffs
    n0q, n0u = nonlinear_terms(state, law, params)
    eq, eu = E.apply_coeffs(q0, u0)
    enq, enu = E.apply_coeffs(n0q.coeffs[0], n0u.coeffs)
    q1 = eq + dt * enq
    u1 = eu + dt * enu
    s1 = FluidState(SpectralField(grid, q1[None]), SpectralField(grid, u1), state.t + dt)
    n1q, n1u = nonlinear_terms(s1, law, params)
    qn = eq + 0.5 * dt * (enq + n1q.coeffs[0])
    un = eu + 0.5 * dt * (enu + n1u.coeffs)
    out = FluidState(SpectralField(grid, qn[None]), SpectralField(grid, un), state.t + dt)
    n_before = state.norm()
    n_after = out.norm()
    if not math.isfinite(n_after) or (n_before > 0 and n_after > growth_limit * n_before):
        raise InstabilityError(f"norm grew from {n_before:.3e} to {n_after:.3e} in one step at t={state.t:.4g}")
    return out


def integrate(state: FluidState, T: float, steps: int, mode: str, params: PhysicalParams,
              law: Optional[PressureLaw] = None, record: bool = True,
              checkpoint_prefix: Optional[str] = None):
    """Advance ``steps`` equal steps to time T; returns the final state and (q, u) trajectories."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = T / steps
    times = [state.t]
    qs, us = [state.q], [state.u]
    s = state
    for k in range(steps):
        s = step(s, dt, mode, params, law)
        if record:
            times.append(s.t)
            qs.append(s.q)
            us.append(s.u)
    if checkpoint_prefix is not None:
        save_snapshot(checkpoint_prefix + "_q", s.q)
        save_snapshot(checkpoint_prefix + "_u", s.u)
    if not record:
        return s, None, None
    return s, TimeSeriesField(times, qs), TimeSeriesField(times, us)


def observed_order(eps: Sequence[float], dist: Sequence[float]) -> float:
    """Least-squares slope of log(distance) against log(eps)."""
    e = np.log(np.asarray(eps, dtype=float))
    d = np.log(np.asarray(dist, dtype=float))
    return float(np.polyfit(e, d, 1)[0])


def symbol_gap_order(eps_list: Sequence[float], kmax: float = 4.0) -> tuple[list, float]:
    """max over |xi| <= kmax of |(e^{-eps^2 xi^2} - 1)/eps^2 + xi^2| and its order in eps."""
    xi = np.linspace(0.0, kmax, 401)
    gaps = [float(np.max(np.abs(capillary_symbol(xi ** 2, e) + xi ** 2))) for e in eps_list]
    return gaps, observed_order(eps_list, gaps)


def _demean(traj: TimeSeriesField) -> TimeSeriesField:
    return traj.map(lambda f: f.remove_mean())


def linear_trajectory_order(q0: SpectralField, u0: SpectralField, params: PhysicalParams,
                            eps_list: Sequence[float], T: float, steps: int, s: float):
    """Distance in the energy norm between linear nonlocal and local trajectories, and its order."""
    ql, ul = duhamel_evolve(q0, u0, params, T, steps, local=True)
    dist = []
    for e in eps_list:
        pe = params.with_eps(e)
        qe, ue = duhamel_evolve(q0, u0, pe, T, steps)
        dist.append(energy_norm_E(qe - ql, ue - ul, s, e))
    return dist, observed_order(eps_list, dist)


def convergence_study(q0: SpectralField, u0: SpectralField, params: PhysicalParams,
                      eps_list: Sequence[float], T: float, s: float, steps: int = 200,
                      law: Optional[PressureLaw] = None) -> ResultTable:
    """Distance between the nonlocal runs and the local run, one row per eps.

    Each row's ``observed_order`` is the log-log slope over all rows that ran;
    rows whose run failed carry a NaN distance.  Metadata records the symbol
    gap order on the data band.
    """
    start = FluidState(q0, u0, 0.0)
    _, qK, uK = integrate(start, T, steps, LOCAL, params, law)
    dists = []
    failures = {}
    for e in eps_list:
        pe = params.with_eps(e)
        try:
            _, qe, ue = integrate(start, T, steps, NONLOCAL, pe, law)
        except (VacuumError, InstabilityError) as exc:
            dists.append(float("nan"))
            failures[e] = str(exc)
            continue
        dists.append(energy_norm_E(_demean(qe - qK), _demean(ue - uK), s, e))
    ok = [(e, d) for e, d in zip(eps_list, dists) if math.isfinite(d) and d > 0]
    order = observed_order([e for e, _ in ok], [d for _, d in ok]) if len(ok) >= 2 else float("nan")
    table = ResultTable(CONVERGENCE_COLUMNS, metadata={"failures": failures})
    for e, d in zip(eps_list, dists):
        table.add(eps=float(e), distance=d, observed_order=order)
    return table
