"""Numpy fallback for the compiled trigonometric evaluation (same signatures)."""
import numpy as np

_CHUNK = 4096


def _phases(pts, kmin, m, k1):
    k = np.arange(kmin, kmin + m)
    return np.exp(1j * k1 * np.outer(pts, k))


def trig_eval_1d(coeffs, kmin, x, k1, scale):
    coeffs = np.asarray(coeffs, dtype=complex)
    x = np.asarray(x, dtype=float)
    out = np.empty((coeffs.shape[0], x.size), dtype=complex)
    for s in range(0, x.size, _CHUNK):
        E = _phases(x[s:s + _CHUNK], kmin, coeffs.shape[1], k1)
        out[:, s:s + _CHUNK] = coeffs @ E.T
    return out * scale


def trig_eval_2d(coeffs, kmin0, kmin1, x, y, k1, scale):
    coeffs = np.asarray(coeffs, dtype=complex)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nc, m0, m1 = coeffs.shape
    out = np.empty((nc, x.size), dtype=complex)
    for s in range(0, x.size, _CHUNK):
        E0 = _phases(x[s:s + _CHUNK], kmin0, m0, k1)
        E1 = _phases(y[s:s + _CHUNK], kmin1, m1, k1)
        for c in range(nc):
            out[c, s:s + _CHUNK] = np.sum((E0 @ coeffs[c]) * E1, axis=1)
    return out * scale
