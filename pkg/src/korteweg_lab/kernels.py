"""Backend selection for the scattered-point trigonometric evaluation.

The compiled extension is used when it imports; set ``KORTEWEG_LAB_PURE=1``
to force the numpy implementation.
"""
from __future__ import annotations

import math
import os

import numpy as np

from .spectral import SpectralField

if os.environ.get("KORTEWEG_LAB_PURE", "") not in ("", "0"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

__all__ = ["BACKEND", "centered_coeffs", "evaluate_at", "trig_eval"]


def centered_coeffs(coeffs: np.ndarray, dim: int, trim: bool = True) -> tuple[np.ndarray, int]:
    """Reorder FFT-ordered coefficients to increasing wavenumber.

    For even n the Nyquist coefficient is split evenly between +n/2 and -n/2,
    which makes the trigonometric interpolant of real data real everywhere.
    With ``trim`` the array is cut to the smallest symmetric box holding
    every coefficient above 1e-15 of the largest one (mollified fields are
    usually far narrower than their grid).  Returns the reordered array and
    the smallest wavenumber.
    """
    n = coeffs.shape[-1]
    c = np.fft.fftshift(coeffs, axes=tuple(range(coeffs.ndim - dim, coeffs.ndim)))
    kmin = -(n // 2)
    if n % 2 == 0:
        for ax in range(coeffs.ndim - dim, coeffs.ndim):
            first = np.take(c, [0], axis=ax) * 0.5
            rest = np.take(c, np.arange(1, n), axis=ax)
            c = np.concatenate([first, rest, first], axis=ax)
    if trim:
        m = c.shape[-1]
        half = (m - 1) // 2
        lead = tuple(range(c.ndim - dim))
        amp = np.abs(c).max(axis=lead) if lead else np.abs(c)
        thresh = 1e-15 * max(float(amp.max()), 1e-300)
        idx = np.nonzero(amp > thresh)
        keep = max((int(np.max(np.abs(i - half))) for i in idx), default=0) if idx[0].size else 0
        sl = (slice(None),) * len(lead) + (slice(half - keep, half + keep + 1),) * dim
        c = c[sl]
        kmin = -keep
    return np.ascontiguousarray(c, dtype=complex), kmin


def trig_eval(centered: np.ndarray, kmin: int, points: np.ndarray, k1: float, scale: float) -> np.ndarray:
    """Evaluate sum_k c_k exp(i k1 k.x) * scale at points of shape (dim, N)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation points must be finite")
    dim = pts.shape[0]
    if dim == 1:
        return _impl.trig_eval_1d(centered, kmin, np.ascontiguousarray(pts[0]), k1, scale)
    if dim == 2:
        return _impl.trig_eval_2d(
            centered, kmin, kmin, np.ascontiguousarray(pts[0]), np.ascontiguousarray(pts[1]), k1, scale
        )
    raise ValueError("scattered evaluation is implemented for dim 1 and 2")


def evaluate_at(f: SpectralField, points: np.ndarray, real: bool = True) -> np.ndarray:
    """Trigonometric interpolant of every component of f at points (dim, N) -> (comps, N)."""
    g = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] != g.dim:
        raise ValueError(f"points must have leading dimension {g.dim}")
    c, kmin = centered_coeffs(f.coeffs, g.dim)
    out = trig_eval(c, kmin, pts, g.k1, 1.0 / math.sqrt(g.volume))
    return out.real if real else out
