"""Single-slit conformal maps of the exterior disc.

The slit map ``f^c`` sends the exterior of the closed unit disc onto the same
region with the radial segment ``(1, 1+d]`` removed, normalised so that
``f(z) ~ e^c z`` at infinity.  It is built in closed form as
``T^{-1} o G o T`` with ``T(z) = (z-1)/(z+1)`` (exterior disc -> right
half-plane) and ``G(w) = sqrt(e^{-c} w^2 + 1 - e^{-c})`` (right half-plane ->
right half-plane minus a slit on the positive real axis).

All array-valued helpers accept numpy arrays or Python scalars.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

TWO_PI = 2.0 * math.pi
_UNIT_TOL = 1e-12
_SINGULAR_TOL = 1e-12


def wrap_angle(theta):
    """Wrap angle(s) into ``(-pi, pi]``."""
    if np.ndim(theta) == 0:
        r = math.remainder(float(theta), TWO_PI)
        return math.pi if r <= -math.pi else r
    x = np.asarray(theta, dtype=float)
    # leave in-range values bit-exact; the shift by pi would round them
    r = np.remainder(x + math.pi, TWO_PI) - math.pi
    r = np.where(r <= -math.pi, math.pi, r)
    return np.where((x > -math.pi) & (x <= math.pi), x, r)


def chord(a, b):
    """Chordal distance ``|e^{ia} - e^{ib}|`` between angles."""
    return 2.0 * np.abs(np.sin(0.5 * (np.asarray(a) - np.asarray(b))))


@dataclass(frozen=True)
class SlitGeometry:
    """Constants of the slit map with log-capacity ``capacity``.

    ``length`` is the slit length ``d``, ``half_arc`` the half-angle ``beta``
    of the boundary arc that is folded onto the slit, and ``b = 1 - e^{-c}``.
    """

    capacity: float
    length: float
    half_arc: float
    b: float

    @property
    def a(self) -> float:
        # G(0) = sqrt(b); the tip of the slit in half-plane coordinates
        return math.sqrt(self.b)

    @property
    def y0(self) -> float:
        """``tan(beta/2) = sqrt(e^c - 1)``."""
        return math.sqrt(math.expm1(self.capacity))

    @property
    def h(self) -> float:
        """``e^{-c/2}``, which also equals ``cos(beta/2)``."""
        return math.exp(-0.5 * self.capacity)

    @property
    def tip_second_derivative(self) -> float:
        """``f''(1) = (1+d) / (2 sqrt(1-e^{-c}))`` for the unrotated map."""
        return (1.0 + self.length) / (2.0 * self.a)


def slit_geometry(capacity: float) -> SlitGeometry:
    """Closed-form constants of the slit map for ``0 < capacity <= 1``."""
    c = float(capacity)
    if not (c > 0.0) or c > 1.0 or not math.isfinite(c):
        raise DomainError(f"capacity must lie in (0, 1], got {capacity!r}")
    return _geometry(c)


def _geometry(c: float) -> SlitGeometry:
    # no upper bound: the k-fold root map needs capacities beyond 1
    if not (c > 0.0) or not math.isfinite(c):
        raise DomainError(f"capacity must be positive, got {c!r}")
    em1 = math.expm1(c)
    length = 2.0 * em1 + 2.0 * math.sqrt(math.exp(c) * em1)
    half_arc = 2.0 * math.atan(math.sqrt(em1))
    return SlitGeometry(capacity=c, length=length, half_arc=half_arc, b=-math.expm1(-c))


@dataclass(frozen=True)
class RotatedSlit:
    """The slit map rotated so that the slit points in direction ``angle``."""

    geometry: SlitGeometry
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", wrap_angle(self.angle))

    @property
    def rotation(self) -> complex:
        return cmath.exp(1j * self.angle)


# ---------------------------------------------------------------------------
# vectorised kernels in the slit's own frame
# ---------------------------------------------------------------------------


def slit_core(zeta, h: float, y0: float):
    """Return ``(f(zeta), S(zeta))`` for the unrotated slit map.

    ``S = sqrt(zeta^2 - 2 zeta cos(beta) + 1)`` on the branch ``~ zeta`` at
    infinity, obtained as ``G(T(zeta)) * (zeta + 1)``.  Points with
    ``|zeta - 1| <= |zeta + 1|`` use ``w = T(zeta)``; the rest use
    ``v = 1/w`` so that ``zeta = -1`` is handled without overflow.

    ``f = (1+G)/(1-G)`` is rewritten with ``1 - G^2 = e^{-c} 4 zeta/(zeta+1)^2``
    as ``e^c ((1+G)(zeta+1))^2 / (4 zeta)``, which does not cancel for large
    ``|zeta|`` (``Re G >= 0``); the ``v`` form is treated the same way.
    """
    zeta = np.asarray(zeta, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        near = np.abs(zeta - 1.0) <= np.abs(zeta + 1.0)
        w = (zeta - 1.0) / (zeta + 1.0)
        g = h * np.sqrt(w - 1j * y0) * np.sqrt(w + 1j * y0)
        ec4 = 0.25 / (h * h)
        f_w = ec4 * ((1.0 + g) * (zeta + 1.0)) ** 2 / zeta
        s_w = g * (zeta + 1.0)
        v = (zeta + 1.0) / (zeta - 1.0)
        s = h * y0 * np.sqrt(v - 1j / y0) * np.sqrt(v + 1j / y0)
        f_v = ec4 * ((v + s) * (zeta - 1.0)) ** 2 / zeta
        s_v = s * (zeta - 1.0)
    return np.where(near, f_w, f_v), np.where(near, s_w, s_v)


def slit_derivs(zeta, h: float, y0: float, cos_beta: float):
    """Return ``(f, f', f'')`` of the unrotated slit map at ``zeta``."""
    zeta = np.asarray(zeta, dtype=complex)
    f, s = slit_core(zeta, h, y0)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = f / zeta * (zeta - 1.0) / s
        fpp = fp * (fp / f - 1.0 / zeta - (zeta - cos_beta) / (s * s)) + f / (zeta * s)
    return f, fp, fpp


def _as_output(x, like):
    return complex(x) if np.ndim(like) == 0 else x


def _check_exterior(z):
    if np.any(np.abs(z) < 1.0 - _UNIT_TOL):
        raise DomainError("slit maps are defined on |z| >= 1")


def _check_singular(zeta, geom: SlitGeometry):
    base = np.exp(1j * geom.half_arc)
    dist = np.minimum(np.abs(zeta - base), np.abs(zeta - base.conjugate()))
    if np.any(dist < _SINGULAR_TOL):
        raise SingularityError("evaluation at a base point of the slit")


def slit_map(s: RotatedSlit, z):
    """Evaluate ``f^{theta,c}(z) = e^{i theta} f^c(e^{-i theta} z)``."""
    z_arr = np.asarray(z, dtype=complex)
    _check_exterior(z_arr)
    g = s.geometry
    f, _ = slit_core(z_arr * np.conj(s.rotation), g.h, g.y0)
    return _as_output(s.rotation * f, z)


def _sqrt_q_factored(zeta, beta: float):
    # principal roots have cuts along two horizontal rays to the left of
    # e^{+-i beta}; between them the product has the wrong sign
    p = np.sqrt(zeta - np.exp(1j * beta)) * np.sqrt(zeta - np.exp(-1j * beta))
    flip = (zeta.real < 0.0) & (np.abs(zeta.imag) < math.sin(beta))
    return np.where(flip, -p, p)


def slit_map_deriv(s: RotatedSlit, z):
    """``f'(z) = f(z)/z * (z-1) / ((z-e^{i beta})^{1/2} (z-e^{-i beta})^{1/2})``.

    Evaluated in the slit frame; rotation does not change ``f'``.
    """
    z_arr = np.asarray(z, dtype=complex)
    _check_exterior(z_arr)
    g = s.geometry
    zeta = z_arr * np.conj(s.rotation)
    _check_singular(zeta, g)
    f, _ = slit_core(zeta, g.h, g.y0)
    fp = f / zeta * (zeta - 1.0) / _sqrt_q_factored(zeta, g.half_arc)
    return _as_output(fp, z)


def slit_map_second_deriv(s: RotatedSlit, z):
    """Second derivative of the rotated slit map at ``z``."""
    z_arr = np.asarray(z, dtype=complex)
    _check_exterior(z_arr)
    g = s.geometry
    zeta = z_arr * np.conj(s.rotation)
    _check_singular(zeta, g)
    _, _, fpp = slit_derivs(zeta, g.h, g.y0, math.cos(g.half_arc))
    return _as_output(fpp * np.conj(s.rotation), z)


def slit_map_second_deriv_at_tip(s: RotatedSlit) -> complex:
    """``f''(e^{i theta}) = e^{-i theta} (1+d) / (2 sqrt(1 - e^{-c}))``."""
    return s.geometry.tip_second_derivative * cmath.exp(-1j * s.angle)


def circle_preimage_angle(geom: SlitGeometry, psi):
    """Angle ``phi`` with ``f^c(e^{i phi}) = e^{i psi}`` (unrotated map).

    Uses ``tan(phi/2) = sign(psi) sqrt(e^c tan^2(psi/2) + e^c - 1)``, written
    with ``atan2`` so that ``psi`` near ``pi`` stays finite.  ``psi = 0`` is the
    base of the slit, which has two preimages ``+-beta``; ``+beta`` is returned.
    """
    psi = wrap_angle(psi)
    sgn = np.where(np.asarray(psi) < 0.0, -1.0, 1.0)
    half = 0.5 * np.asarray(psi)
    num = np.sqrt(math.exp(geom.capacity) * np.sin(half) ** 2 + math.expm1(geom.capacity) * np.cos(half) ** 2)
    phi = 2.0 * np.arctan2(sgn * num, np.cos(half))
    return float(phi) if np.ndim(psi) == 0 else phi


def slit_map_on_circle(s: RotatedSlit, phi):
    """Evaluate the rotated slit map at ``e^{i phi}`` given the angle itself.

    Near the base points the map has a square-root singularity, so rounding
    ``e^{i phi}`` to a complex double already costs ~1e-9.  Working from the
    angle keeps ``phi - (theta +- beta)`` exact: the factorisation
    ``tan^2(x/2) - tan^2(beta/2) = sin((x+beta)/2) sin((x-beta)/2) / (cos^2(x/2) cos^2(beta/2))``
    avoids cancellation.  Arc points inside the base map onto the slit.
    """
    g = s.geometry
    x = np.asarray(wrap_angle(np.asarray(phi, dtype=float) - s.angle), dtype=float)
    beta = g.half_arc
    prod = np.sin(0.5 * (np.abs(x) + beta)) * np.sin(0.5 * (np.abs(x) - beta))
    half_cos = np.cos(0.5 * x)
    sgn = np.where(x < 0.0, -1.0, 1.0)
    psi = 2.0 * np.arctan2(sgn * np.sqrt(np.maximum(prod, 0.0)), half_cos)
    with np.errstate(divide="ignore", invalid="ignore"):
        gr = np.sqrt(np.maximum(-prod, 0.0)) / half_cos
        on_slit = (1.0 + gr) / (1.0 - gr)
    res = np.where(prod >= 0.0, np.exp(1j * psi), on_slit + 0j)
    return _as_output(s.rotation * res, phi)


def slit_map_inverse(s: RotatedSlit, w):
    """Inverse of the rotated slit map on the slit domain.

    Points on the unit circle go through :func:`circle_preimage_angle`; the
    base point ``e^{i theta}`` returns ``e^{i(theta+beta)}``.
    """
    w_arr = np.asarray(w, dtype=complex)
    g = s.geometry
    zeta = w_arr * np.conj(s.rotation)
    mod = np.abs(zeta)
    if np.any(mod < 1.0 - _UNIT_TOL):
        raise DomainError("inverse slit map needs |w| >= 1")
    on_slit = (np.abs(zeta.imag) <= _UNIT_TOL * np.maximum(mod, 1.0)) & (zeta.real > 1.0 + _UNIT_TOL) & (
        zeta.real < 1.0 + g.length - _UNIT_TOL
    )
    if np.any(on_slit):
        raise DomainError("point lies on the slit")
    on_circle = np.abs(mod - 1.0) <= _UNIT_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (zeta - 1.0) / (zeta + 1.0)
        ww = math.exp(0.5 * g.capacity) * np.sqrt(u - g.a) * np.sqrt(u + g.a)
        off = (1.0 + ww) / (1.0 - ww)
    phi = circle_preimage_angle(g, np.angle(zeta))
    res = np.where(on_circle, np.exp(1j * np.asarray(phi)), off)
    return _as_output(s.rotation * res, w)


def distance_estimate_check(geom: SlitGeometry, w) -> float:
    """Ratio ``|f(w) - 1| / (2 (e^c-1)^{1/4} |w - e^{i beta}|^{1/2})``.

    Tends to 1 as ``|w - e^{i beta}| / sqrt(c) -> 0``.
    """
    w = complex(w)
    base = cmath.exp(1j * geom.half_arc)
    dist = abs(w - base)
    if dist == 0.0:
        raise DomainError("w coincides with the base point e^{i beta}")
    if dist > 0.5 * geom.half_arc * (1 + 1e-12) or abs(w) < 1.0 - _UNIT_TOL:
        raise DomainError("need |w - e^{i beta}| <= beta/2 and |w| >= 1")
    fw, _ = slit_core(w, geom.h, geom.y0)
    return float(abs(complex(fw) - 1.0) / (2.0 * math.expm1(geom.capacity) ** 0.25 * math.sqrt(dist)))
