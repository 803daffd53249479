# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trigonometric evaluation at scattered points.

Wavenumbers along each axis form the contiguous integer range
kmin, kmin+1, ..., kmin+m-1, so phases are advanced by a complex
recurrence instead of calling exp for every term.  Only one sine/cosine
pair per axis and point is evaluated.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef inline double complex _ipow(double complex z, long k) nogil:
    cdef double complex r = 1
    cdef long i
    if k < 0:
        z = z.conjugate()
        k = -k
    for i in range(k):
        r = r * z
    return r


def trig_eval_1d(double complex[:, ::1] coeffs, long kmin, double[::1] x, double k1, double scale):
    cdef Py_ssize_t nc = coeffs.shape[0]
    cdef Py_ssize_t m = coeffs.shape[1]
    cdef Py_ssize_t npts = x.shape[0]
    out_arr = np.zeros((nc, npts), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t p, a, c
    cdef double th
    cdef double complex step, ph, ph0, acc
    with nogil:
        for p in range(npts):
            th = x[p] * k1
            step = cos(th) + 1j * sin(th)
            ph0 = _ipow(step, kmin)
            for c in range(nc):
                ph = ph0
                acc = 0
                for a in range(m):
                    acc = acc + coeffs[c, a] * ph
                    ph = ph * step
                out[c, p] = acc * scale
    return out_arr


def trig_eval_2d(double complex[:, :, ::1] coeffs, long kmin0, long kmin1,
                 double[::1] x, double[::1] y, double k1, double scale):
    cdef Py_ssize_t nc = coeffs.shape[0]
    cdef Py_ssize_t m0 = coeffs.shape[1]
    cdef Py_ssize_t m1 = coeffs.shape[2]
    cdef Py_ssize_t npts = x.shape[0]
    out_arr = np.zeros((nc, npts), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    ph1_arr = np.empty(m1, dtype=np.complex128)
    cdef double complex[::1] ph1 = ph1_arr
    cdef Py_ssize_t p, a, b, c
    cdef double tx, ty
    cdef double complex sx, sy, px, px0, py, acc, row
    with nogil:
        for p in range(npts):
            tx = x[p] * k1
            ty = y[p] * k1
            sy = cos(ty) + 1j * sin(ty)
            py = _ipow(sy, kmin1)
            for b in range(m1):
                ph1[b] = py
                py = py * sy
            sx = cos(tx) + 1j * sin(tx)
            px0 = _ipow(sx, kmin0)
            for c in range(nc):
                px = px0
                acc = 0
                for a in range(m0):
                    row = 0
                    for b in range(m1):
                        row = row + coeffs[c, a, b] * ph1[b]
                    acc = acc + px * row
                    px = px * sx
                out[c, p] = acc * scale
    return out_arr
