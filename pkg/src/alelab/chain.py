"""Compositions of slit maps: ``Phi_n = Phi_0 o f_1 o ... o f_n``.

``Phi_0`` is either the identity, a k-fold symmetric needle map
``z -> (f^{c0}(z^k))^{1/k}`` (exact equal arms), or the identity followed by a
prefix of micro slits realizing an arbitrary arm configuration.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import (
    _geometry,
    TWO_PI,
    chord,
    circle_preimage_angle,
    slit_derivs,
    slit_geometry,
    wrap_angle,
)
from .errors import ConstructionError, DomainError, GeometryError


@dataclass(frozen=True)
class AttachmentEvent:
    angle: float
    capacity: float

    def __post_init__(self):
        if not (0.0 < self.capacity < 1.0):
            raise DomainError(f"event capacity must lie in (0, 1), got {self.capacity!r}")
        object.__setattr__(self, "angle", wrap_angle(self.angle))
        object.__setattr__(self, "capacity", float(self.capacity))


@dataclass(frozen=True)
class ArmSpec:
    angle: float
    length: float


def capacity_for_length(length: float) -> float:
    """Log-capacity of a single radial slit of the given length.

    Inverts ``d = 2a/(1-a)`` with ``a = sqrt(1 - e^{-c})``.
    """
    if length <= 0:
        raise DomainError("length must be positive")
    a = length / (2.0 + length)
    return -math.log1p(-a * a)


@dataclass(frozen=True)
class RootMap:
    """``e^{i phi0} (f^{c0}(zeta^k))^{1/k}`` with ``zeta = e^{-i phi0} z``.

    Produces ``order`` equally spaced needles of length ``(1+d(c0))^{1/k} - 1``
    and has log-capacity ``c0 / k``.
    """

    order: int
    capacity: float
    angle: float

    @property
    def geometry(self):
        return _geometry(self.capacity)

    @property
    def tip_radius(self) -> float:
        return (1.0 + self.geometry.length) ** (1.0 / self.order)

    def tip_angles(self) -> np.ndarray:
        return wrap_angle(self.angle + TWO_PI * np.arange(self.order) / self.order)

    def tip_second_derivs(self) -> np.ndarray:
        g = self.geometry
        mag = self.order * self.tip_radius / (2.0 * g.a)
        return mag * np.exp(-1j * self.tip_angles())

    def evaluate(self, z, want_second=True):
        g = self.geometry
        k = self.order
        rot = cmath.exp(1j * self.angle)
        zeta = np.asarray(z, dtype=complex) * rot.conjugate()
        p = zeta**k
        f, fp, fpp = slit_derivs(p, g.h, g.y0, math.cos(g.half_arc))
        val = zeta * (f / p) ** (1.0 / k)
        zk1 = zeta ** (k - 1)
        amp = zk1 / f
        d1 = val * fp * amp
        d2 = np.zeros_like(val)
        if want_second:
            dp = k * zk1
            damp = (k - 1) * zeta ** (k - 2) / f - zk1 * fp * dp / (f * f)
            d2 = (d1 * fp * amp + val * fpp * dp * amp + val * fp * damp) * rot.conjugate()
        return rot * val, d1, d2


@dataclass(frozen=True)
class InitialConfig:
    """Initial cluster ``K_0``: arms plus the map that realizes them."""

    arms: tuple = ()
    realization: tuple = ()
    symmetric_exact: bool = False
    root: RootMap | None = None
    tip_angles: tuple = ()
    tip_second_derivs: tuple = ()
    micro_capacity: float | None = None
    tolerance: float = 0.0

    @property
    def capacity(self) -> float:
        c = sum(e.capacity for e in self.realization)
        if self.root is not None:
            c += self.root.capacity / self.root.order
        return c

    @property
    def k(self) -> int:
        return len(self.arms)


class _EventBuffer:
    """Append-only growable storage shared by successive chain versions."""

    __slots__ = ("angle", "cap", "rot", "h", "y0", "cb", "n")

    def __init__(self, size=64):
        self.angle = np.empty(size)
        self.cap = np.empty(size)
        self.rot = np.empty(size, dtype=complex)
        self.h = np.empty(size)
        self.y0 = np.empty(size)
        self.cb = np.empty(size)
        self.n = 0

    def copy_prefix(self, n, size):
        new = _EventBuffer(max(size, 64))
        for name in ("angle", "cap", "rot", "h", "y0", "cb"):
            getattr(new, name)[:n] = getattr(self, name)[:n]
        new.n = n
        return new

    def push(self, at, event: AttachmentEvent):
        buf = self
        if at != self.n or at >= len(self.angle):
            buf = self.copy_prefix(at, 2 * len(self.angle) if at >= len(self.angle) else len(self.angle))
        g = slit_geometry(event.capacity)
        buf.angle[at] = event.angle
        buf.cap[at] = event.capacity
        buf.rot[at] = cmath.exp(1j * event.angle)
        buf.h[at] = g.h
        buf.y0[at] = g.y0
        buf.cb[at] = math.cos(g.half_arc)
        buf.n = at + 1
        return buf


@dataclass(frozen=True)
class ChainEval:
    value: np.ndarray
    first: np.ndarray
    log_abs_first: np.ndarray
    second: np.ndarray


class ConformalChain:
    """Immutable version of ``Phi_n``; :meth:`append` returns a new version.

    Versions share one append-only buffer, so growing the newest version is
    amortised O(1).  The realization prefix of the initial configuration is
    stored in the same buffer, ahead of the events.
    """

    __slots__ = ("initial", "_buf", "_n", "_n_prefix", "_capacity")

    def __init__(self, initial: InitialConfig | None = None, events: Sequence[AttachmentEvent] = ()):
        self.initial = initial if initial is not None else InitialConfig()
        buf = _EventBuffer(max(64, 2 * (len(self.initial.realization) + len(events))))
        n = 0
        for e in self.initial.realization:
            buf = buf.push(n, e)
            n += 1
        self._n_prefix = n
        cap = self.initial.capacity
        for e in events:
            buf = buf.push(n, e)
            n += 1
            cap += e.capacity
        self._buf = buf
        self._n = n
        self._capacity = cap

    @classmethod
    def _version(cls, initial, buf, n, n_prefix, capacity):
        obj = cls.__new__(cls)
        obj.initial = initial
        obj._buf = buf
        obj._n = n
        obj._n_prefix = n_prefix
        obj._capacity = capacity
        return obj

    def append(self, event: AttachmentEvent) -> "ConformalChain":
        buf = self._buf.push(self._n, event)
        return ConformalChain._version(
            self.initial, buf, self._n + 1, self._n_prefix, self._capacity + event.capacity
        )

    def truncated(self, n_events: int) -> "ConformalChain":
        """The chain after its first ``n_events`` events (prefix kept)."""
        if not 0 <= n_events <= len(self):
            raise DomainError("truncation length out of range")
        m = self._n_prefix + n_events
        cap = self.initial.capacity + float(np.sum(self._buf.cap[self._n_prefix : m]))
        return ConformalChain._version(self.initial, self._buf, m, self._n_prefix, cap)

    def __len__(self):
        return self._n - self._n_prefix

    @property
    def events(self) -> tuple:
        s = slice(self._n_prefix, self._n)
        return tuple(AttachmentEvent(a, c) for a, c in zip(self._buf.angle[s], self._buf.cap[s]))

    @property
    def event_angles(self) -> np.ndarray:
        return self._buf.angle[self._n_prefix : self._n].copy()

    @property
    def event_capacities(self) -> np.ndarray:
        return self._buf.cap[self._n_prefix : self._n].copy()

    @property
    def total_events(self) -> int:
        """Number of slit maps including the realization prefix."""
        return self._n

    @property
    def cumulative_capacity(self) -> float:
        return self._capacity

    def _compose(self, z, want_second, upto=None):
        n = self._n if upto is None else upto
        b = self._buf
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        if np.any(np.abs(z) < 1.0 - 1e-12):
            raise DomainError("chains are evaluated on |z| >= 1")
        val, d1, la, d2 = kernels.compose(z.ravel(), b.rot[:n], b.h[:n], b.y0[:n], b.cb[:n], want_second)
        root = self.initial.root
        if root is not None:
            rv, r1, r2 = root.evaluate(val, want_second)
            with np.errstate(divide="ignore"):
                la = la + np.log(np.abs(r1))
            d2 = r2 * d1 * d1 + r1 * d2
            d1 = r1 * d1
            val = rv
        return ChainEval(val.reshape(shape), d1.reshape(shape), la.reshape(shape), d2.reshape(shape))

    def evaluate(self, z):
        """``Phi_n(z)``: ``f_n`` first, then inwards to ``f_1`` and ``Phi_0``."""
        out = self._compose(z, want_second=False).value
        return complex(out) if np.ndim(z) == 0 else out

    def evaluate_with_derivs(self, z) -> ChainEval:
        return self._compose(z, want_second=True)

    def log_abs_deriv(self, z) -> np.ndarray:
        return self._compose(z, want_second=False).log_abs_first

    def evaluate_partial(self, z, n_maps: int):
        """``Phi_0 o f_1 o ... o f_m`` over the first ``n_maps`` stored maps."""
        return self._compose(z, want_second=False, upto=n_maps).value


def evaluate(chain: ConformalChain, z):
    return chain.evaluate(z)


def evaluate_with_derivs(chain: ConformalChain, z):
    e = chain.evaluate_with_derivs(z)
    if np.ndim(z) == 0:
        return complex(e.value), complex(e.first), float(e.log_abs_first), complex(e.second)
    return e.value, e.first, e.log_abs_first, e.second


# ---------------------------------------------------------------------------
# initial configurations
# ---------------------------------------------------------------------------


def _equally_spaced(angles: np.ndarray, tol=1e-12) -> bool:
    k = len(angles)
    if k < 2:
        return True
    s = np.sort(np.mod(angles - angles[0], TWO_PI))
    return bool(np.all(np.abs(np.diff(s) - TWO_PI / k) < tol))


@dataclass
class _Grower:
    """Greedy micro-slit growth at exact tip preimages."""

    root: RootMap | None
    events: list = field(default_factory=list)
    chain: ConformalChain | None = None

    def __post_init__(self):
        self.chain = ConformalChain(InitialConfig(root=self.root))

    def tip_after(self, angle: float, capacity: float) -> complex:
        d = slit_geometry(capacity).length
        return self.chain.evaluate(cmath.exp(1j * angle) * (1.0 + d))

    def attach(self, angle: float, capacity: float, tracked: np.ndarray, skip: int) -> np.ndarray:
        e = AttachmentEvent(angle, capacity)
        g = slit_geometry(capacity)
        rel = wrap_angle(tracked - e.angle)
        new = wrap_angle(e.angle + circle_preimage_angle(g, rel))
        mask = np.ones(len(tracked), bool)
        mask[skip] = False
        if np.any(mask & (np.abs(np.abs(rel) - 0.0) < 1e-12)):
            raise GeometryError("two arms share a preimage")
        self.events.append(e)
        self.chain = self.chain.append(e)
        new[skip] = e.angle
        return new


def build_initial(
    arms: Sequence,
    micro_capacity: float = 1e-3,
    tolerance: float = 1e-6,
    max_events: int = 200_000,
) -> InitialConfig:
    """Realize arms ``e^{i theta_j}(1, 1 + d_j]`` as an initial map.

    Equal, equally spaced arms use the exact k-fold root map.  Otherwise the
    shortest common length is realized exactly when the arms are equally
    spaced (root map), and each remaining arm is grown greedily by micro slits
    of capacity ``micro_capacity`` at its exact tip preimage, always serving the
    arm with the largest remaining radius deficit.  The final slit of each arm
    is trimmed by bisection so the tip radius ``|tip| - 1`` lands within
    ``tolerance`` of the requested length.
    """
    arm_list = [a if isinstance(a, ArmSpec) else ArmSpec(*a) for a in arms]
    if not arm_list:
        return InitialConfig()
    angles = np.array([wrap_angle(a.angle) for a in arm_list], dtype=float)
    lengths = np.array([a.length for a in arm_list], dtype=float)
    if np.any(lengths <= 0):
        raise DomainError("arm lengths must be positive")
    k = len(arm_list)
    if k > 1 and np.min(chord(angles[:, None], angles[None, :]) + np.eye(k) * 9) < 1e-9:
        raise DomainError("arm angles must be distinct")
    arm_list = [ArmSpec(float(t), float(l)) for t, l in zip(angles, lengths)]
    spaced = _equally_spaced(angles)
    equal = bool(np.all(np.abs(lengths - lengths[0]) <= 1e-15 * lengths[0]))

    if spaced and equal:
        if k == 1:
            ev = AttachmentEvent(angles[0], capacity_for_length(lengths[0]))
            g = slit_geometry(ev.capacity)
            return InitialConfig(
                arms=tuple(arm_list),
                realization=(ev,),
                symmetric_exact=True,
                tip_angles=(ev.angle,),
                tip_second_derivs=(g.tip_second_derivative * cmath.exp(-1j * ev.angle),),
                tolerance=0.0,
            )
        c0 = capacity_for_length((1.0 + lengths[0]) ** k - 1.0)
        root = RootMap(k, c0, float(angles[0]))
        # order tips like the arms
        ta = root.tip_angles()
        idx = [int(np.argmin(chord(ta, t))) for t in angles]
        return InitialConfig(
            arms=tuple(arm_list),
            symmetric_exact=True,
            root=root,
            tip_angles=tuple(float(ta[i]) for i in idx),
            tip_second_derivs=tuple(complex(root.tip_second_derivs()[i]) for i in idx),
            tolerance=0.0,
        )

    if not (0.0 < micro_capacity < 1.0):
        raise DomainError("micro_capacity must lie in (0, 1)")
    root = None
    if spaced and k > 1:
        lmin = float(np.min(lengths))
        root = RootMap(k, capacity_for_length((1.0 + lmin) ** k - 1.0), float(angles[0]))
    grower = _Grower(root)
    target = 1.0 + lengths
    if root is not None:
        ta = root.tip_angles()
        pre = np.array([ta[int(np.argmin(chord(ta, t)))] for t in angles])
        radius = np.full(k, root.tip_radius)
        seeded = np.ones(k, bool)
    else:
        pre = angles.copy()  # preimages of the arm roots until seeded
        radius = np.ones(k)
        seeded = np.zeros(k, bool)

    def step(j):
        nonlocal pre
        goal = target[j]
        c = micro_capacity
        r_full = abs(grower.tip_after(pre[j], c))
        if r_full > goal + tolerance:
            lo, hi = 0.0, c
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                r_mid = abs(grower.tip_after(pre[j], mid))
                if abs(r_mid - goal) <= 0.1 * tolerance:
                    break
                if r_mid < goal:
                    lo = mid
                else:
                    hi = mid
            c = mid
            r_full = r_mid
        if r_full - goal > tolerance:
            raise ConstructionError("tolerance unreachable; use a smaller micro_capacity")
        pre = grower.attach(pre[j], c, pre, j)
        radius[j] = r_full
        seeded[j] = True

    for j in range(k):
        if not seeded[j]:
            step(j)
    while True:
        deficit = target - radius
        j = int(np.argmax(deficit))
        if deficit[j] <= tolerance:
            break
        if len(grower.events) >= max_events:
            raise ConstructionError("event budget exhausted; use a larger micro_capacity")
        step(j)
    if np.any(radius - target > tolerance):
        raise ConstructionError("arm overshoot beyond tolerance; use a smaller micro_capacity")

    chain = grower.chain
    ev = chain.evaluate_with_derivs(np.exp(1j * pre))
    return InitialConfig(
        arms=tuple(arm_list),
        realization=tuple(grower.events),
        symmetric_exact=False,
        root=root,
        tip_angles=tuple(float(p) for p in pre),
        tip_second_derivs=tuple(complex(s) for s in ev.second),
        micro_capacity=float(micro_capacity),
        tolerance=float(tolerance),
    )


def symmetric_initial(k: int, length: float, angle: float = 0.0) -> InitialConfig:
    """Exact k equal needles starting at ``angle``."""
    return build_initial([ArmSpec(angle + TWO_PI * j / k, length) for j in range(k)])


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def trace_cluster(chain: ConformalChain, points_per_particle: int = 16) -> list:
    """Polylines approximating the boundary of ``K_n``.

    Root-map needles come first (exact straight segments), then one curve
    ``t -> Phi_{m-1}(e^{i theta_m}(1 + t d_m))`` per stored slit, including the
    realization prefix.
    """
    if points_per_particle < 2:
        raise DomainError("points_per_particle must be >= 2")
    t = np.linspace(0.0, 1.0, points_per_particle)
    lines = []
    root = chain.initial.root
    if root is not None:
        r = root.tip_radius
        for a in root.tip_angles():
            lines.append(np.exp(1j * a) * (1.0 + t * (r - 1.0)))
    b = chain._buf
    for m in range(chain._n):
        d = slit_geometry(b.cap[m]).length
        pts = b.rot[m] * (1.0 + t * d)
        lines.append(chain.evaluate_partial(pts, m))
    return lines


def rotate_initial(initial: InitialConfig, angle: float) -> InitialConfig:
    """The configuration ``R_angle o Phi_0 o R_{-angle}`` (cluster rotated by ``angle``)."""
    root = initial.root
    if root is not None:
        root = RootMap(root.order, root.capacity, wrap_angle(root.angle + angle))
    rot = cmath.exp(-1j * angle)
    return InitialConfig(
        arms=tuple(ArmSpec(wrap_angle(a.angle + angle), a.length) for a in initial.arms),
        realization=tuple(AttachmentEvent(e.angle + angle, e.capacity) for e in initial.realization),
        symmetric_exact=initial.symmetric_exact,
        root=root,
        tip_angles=tuple(wrap_angle(t + angle) for t in initial.tip_angles),
        tip_second_derivs=tuple(s * rot for s in initial.tip_second_derivs),
        micro_capacity=initial.micro_capacity,
        tolerance=initial.tolerance,
    )


# ---------------------------------------------------------------------------
# serialisation and export
# ---------------------------------------------------------------------------


def initial_to_dict(initial: InitialConfig) -> dict:
    r = initial.root
    return {
        "arms": [{"angle": a.angle, "length": a.length} for a in initial.arms],
        "realization": [[e.angle, e.capacity] for e in initial.realization],
        "symmetric_exact": initial.symmetric_exact,
        "root": None if r is None else {"order": r.order, "capacity": r.capacity, "angle": r.angle},
        "tip_angles": list(initial.tip_angles),
        "tip_second_derivs": [[s.real, s.imag] for s in initial.tip_second_derivs],
        "micro_capacity": initial.micro_capacity,
        "tolerance": initial.tolerance,
    }


def initial_from_dict(d: dict) -> InitialConfig:
    r = d.get("root")
    return InitialConfig(
        arms=tuple(ArmSpec(a["angle"], a["length"]) for a in d.get("arms", [])),
        realization=tuple(AttachmentEvent(a, c) for a, c in d.get("realization", [])),
        symmetric_exact=bool(d.get("symmetric_exact", False)),
        root=None if r is None else RootMap(int(r["order"]), float(r["capacity"]), float(r["angle"])),
        tip_angles=tuple(d.get("tip_angles", [])),
        tip_second_derivs=tuple(complex(a, b) for a, b in d.get("tip_second_derivs", [])),
        micro_capacity=d.get("micro_capacity"),
        tolerance=d.get("tolerance", 0.0),
    )


def chain_to_dict(chain: ConformalChain) -> dict:
    return {
        "initial": initial_to_dict(chain.initial),
        "events": [[float(a), float(c)] for a, c in zip(chain.event_angles, chain.event_capacities)],
    }


def chain_from_dict(d: dict) -> ConformalChain:
    return ConformalChain(initial_from_dict(d["initial"]), [AttachmentEvent(a, c) for a, c in d["events"]])


def write_polylines_csv(path, lines):
    """Rows ``(event_index, t, re, im)``; ``t`` runs over ``[0, 1]`` along each curve."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_index", "t", "re", "im"])
        for m, line in enumerate(lines):
            ts = np.linspace(0.0, 1.0, len(line))
            for t, z in zip(ts, line):
                w.writerow([m, repr(float(t)), repr(float(z.real)), repr(float(z.imag))])


def polylines_to_svg(lines, size: int = 800, stroke: float = 1.0, title: str = "") -> str:
    """SVG document with the unit circle and one path per polyline."""
    pts = np.concatenate([np.asarray(l) for l in lines]) if lines else np.zeros(0, complex)
    r = max(1.05, float(np.max(np.abs(pts))) * 1.05 if len(pts) else 1.05)
    scale = size / (2 * r)

    def xy(z):
        return f"{(z.real + r) * scale:.3f},{(r - z.imag) * scale:.3f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f"<title>{title}</title>" if title else "",
        f'<circle cx="{r * scale:.3f}" cy="{r * scale:.3f}" r="{scale:.3f}" fill="#dddddd" stroke="black" stroke-width="{stroke}"/>',
    ]
    for line in lines:
        d = "M " + " L ".join(xy(z) for z in line)
        out.append(f'<path d="{d}" fill="none" stroke="black" stroke-width="{stroke}"/>')
    out.append("</svg>")
    return "\n".join(s for s in out if s) + "\n"
