# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled composition kernels; same contract as ``_kernels_py.compose``."""

import numpy as np

from .errors import SingularityError

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double cabs(double complex)
    double complex conj(double complex)
    double creal(double complex)
    double cimag(double complex)

from libc.math cimport log, isfinite, INFINITY


cdef inline int _slit(double complex zeta, double h, double y0,
                      double complex* f, double complex* s) noexcept nogil:
    cdef double complex w, g, v, t
    if cabs(zeta - 1.0) <= cabs(zeta + 1.0):
        w = (zeta - 1.0) / (zeta + 1.0)
        g = h * csqrt(w - 1j * y0) * csqrt(w + 1j * y0)
        t = (1.0 + g) * (zeta + 1.0)
        f[0] = 0.25 / (h * h) * t * t / zeta
        s[0] = g * (zeta + 1.0)
    else:
        v = (zeta + 1.0) / (zeta - 1.0)
        t = h * y0 * csqrt(v - 1j / y0) * csqrt(v + 1j / y0)
        s[0] = t * (zeta - 1.0)
        t = (v + t) * (zeta - 1.0)
        f[0] = 0.25 / (h * h) * t * t / zeta
    if (creal(s[0]) == 0.0 and cimag(s[0]) == 0.0) or not isfinite(creal(f[0])) or not isfinite(cimag(f[0])):
        return 1
    return 0


cdef Py_ssize_t _compose(const double complex[::1] z,
                         const double complex[::1] rot,
                         const double[::1] h,
                         const double[::1] y0,
                         const double[::1] cb,
                         double complex[::1] val,
                         double complex[::1] d1,
                         double[::1] la,
                         double complex[::1] d2,
                         bint want_second) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n = rot.shape[0]
    cdef double complex zc, a1, a2, r, rc, zeta, f, s, fp, fpp
    cdef double acc, afp
    for i in range(z.shape[0]):
        zc = z[i]
        a1 = 1.0
        a2 = 0.0
        acc = 0.0
        for k in range(n - 1, -1, -1):
            r = rot[k]
            rc = conj(r)
            zeta = zc * rc
            if _slit(zeta, h[k], y0[k], &f, &s):
                return k
            fp = f / zeta * (zeta - 1.0) / s
            if want_second:
                fpp = fp * (fp / f - 1.0 / zeta - (zeta - cb[k]) / (s * s)) + f / (zeta * s)
                a2 = fpp * rc * a1 * a1 + fp * a2
            a1 = fp * a1
            afp = cabs(fp)
            if afp > 0.0:
                acc += log(afp)
            else:
                acc = -INFINITY
            zc = r * f
        val[i] = zc
        d1[i] = a1
        la[i] = acc
        d2[i] = a2
    return -1


def compose(z, rot, h, y0, cb, want_second=True):
    """Compose the slit maps at the points ``z``.

    Returns ``(value, first, log_abs_first, second)``.
    """
    zz = np.ascontiguousarray(z, dtype=complex).ravel()
    cdef Py_ssize_t m = zz.shape[0]
    val = np.empty(m, dtype=complex)
    d1 = np.empty(m, dtype=complex)
    la = np.empty(m, dtype=float)
    d2 = np.zeros(m, dtype=complex)
    cdef Py_ssize_t bad
    cdef bint ws = bool(want_second)
    cdef const double complex[::1] zv = zz
    cdef const double complex[::1] rv = np.ascontiguousarray(rot, dtype=complex)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=float)
    cdef const double[::1] yv = np.ascontiguousarray(y0, dtype=float)
    cdef const double[::1] cv = np.ascontiguousarray(cb, dtype=float)
    cdef double complex[::1] vv = val
    cdef double complex[::1] d1v = d1
    cdef double[::1] lav = la
    cdef double complex[::1] d2v = d2
    with nogil:
        bad = _compose(zv, rv, hv, yv, cv, vv, d1v, lav, d2v, ws)
    if bad >= 0:
        raise SingularityError("composition hit a slit base point", event_index=int(bad))
    return val, d1, la, d2
