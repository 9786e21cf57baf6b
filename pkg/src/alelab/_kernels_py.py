"""Pure-Python composition kernels (fallback for the compiled ``_kernels``).

Events are given as parallel arrays ``rot`` (``e^{i theta}``), ``h``
(``e^{-c/2}``), ``y0`` (``sqrt(e^c - 1)``) and ``cb`` (``cos beta``), ordered
outermost first; composition applies them from the last one inwards.
"""

import cmath
import math

import numpy as np

from .core import slit_core
from .errors import SingularityError

_SCALAR_CUTOFF = 4


def _slit_scalar(zeta, h, y0):
    if abs(zeta - 1.0) <= abs(zeta + 1.0):
        w = (zeta - 1.0) / (zeta + 1.0)
        g = h * cmath.sqrt(w - 1j * y0) * cmath.sqrt(w + 1j * y0)
        return 0.25 / (h * h) * ((1.0 + g) * (zeta + 1.0)) ** 2 / zeta, g * (zeta + 1.0)
    v = (zeta + 1.0) / (zeta - 1.0)
    s = h * y0 * cmath.sqrt(v - 1j / y0) * cmath.sqrt(v + 1j / y0)
    return 0.25 / (h * h) * ((v + s) * (zeta - 1.0)) ** 2 / zeta, s * (zeta - 1.0)


def _compose_scalar(z, rot, h, y0, cb, want_second):
    n = len(rot)
    rot_l, h_l, y0_l, cb_l = rot.tolist(), h.tolist(), y0.tolist(), cb.tolist()
    out = []
    for z0 in z.tolist():
        zc = complex(z0)
        d1 = 1.0 + 0j
        d2 = 0j
        la = 0.0
        for k in range(n - 1, -1, -1):
            r = rot_l[k]
            zeta = zc * r.conjugate()
            f, s = _slit_scalar(zeta, h_l[k], y0_l[k])
            if s == 0 or not cmath.isfinite(f):
                raise SingularityError("composition hit a slit base point", event_index=k)
            fp = f / zeta * (zeta - 1.0) / s
            if want_second:
                fpp = fp * (fp / f - 1.0 / zeta - (zeta - cb_l[k]) / (s * s)) + f / (zeta * s)
                d2 = fpp * r.conjugate() * d1 * d1 + fp * d2
            d1 = fp * d1
            afp = abs(fp)
            la += math.log(afp) if afp > 0.0 else -math.inf
            zc = r * f
        out.append((zc, d1, la, d2))
    arr = np.array(out, dtype=complex).reshape(len(out), 4)
    return arr[:, 0], arr[:, 1], arr[:, 2].real.copy(), arr[:, 3]


def compose(z, rot, h, y0, cb, want_second=True):
    """Compose the slit maps at the points ``z``.

    Returns ``(value, first, log_abs_first, second)``; ``second`` is zeros when
    ``want_second`` is false.
    """
    z = np.ascontiguousarray(z, dtype=complex).ravel()
    if z.size <= _SCALAR_CUTOFF:
        return _compose_scalar(z, rot, h, y0, cb, want_second)
    zc = z.copy()
    d1 = np.ones_like(zc)
    d2 = np.zeros_like(zc)
    la = np.zeros(zc.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(len(rot) - 1, -1, -1):
            r = rot[k]
            rc = r.conjugate()
            zeta = zc * rc
            f, s = slit_core(zeta, h[k], y0[k])
            if not np.all(np.isfinite(f)) or np.any(s == 0):
                raise SingularityError("composition hit a slit base point", event_index=k)
            fp = f / zeta * (zeta - 1.0) / s
            if want_second:
                fpp = fp * (fp / f - 1.0 / zeta - (zeta - cb[k]) / (s * s)) + f / (zeta * s)
                d2 = fpp * rc * d1 * d1 + fp * d2
            d1 = fp * d1
            la += np.log(np.abs(fp))
            zc = r * f
    return zc, d1, la, d2
