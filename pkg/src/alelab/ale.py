"""ALE(alpha, eta, sigma): attachment sampling and the growth loop.

Attachment angles have density proportional to ``|Phi_n'(e^{sigma + i theta})|^{-eta}``.
Near a tip preimage ``phi_j`` this behaves like ``(sigma^2 + (theta-phi_j)^2)^{-eta/2}``,
a spike of width ``sigma`` that a uniform grid cannot see.  Each tip therefore
gets a window integrated in the variable ``u`` with ``theta = phi_j + sigma tan u``
(smooth and bounded in ``u``), and the rest of the circle is integrated by
adaptive Gauss-Kronrod.  Sampling picks a panel by mass and rejection-samples
inside it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import AttachmentEvent, ConformalChain, InitialConfig, rotate_initial
from .core import TWO_PI, chord, slit_geometry, wrap_angle
from .errors import BudgetError, DomainError, NumericError
from .tips import TipState, attach, attach_at_tip

# Gauss-Kronrod 7/15 on [-1, 1]
_XK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                0.207784955007898467600689403773245, 0.0])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
WK15 = np.concatenate([_WK[:-1], _WK[::-1]])
WG15 = np.zeros(15)
WG15[[1, 3, 5]] = _WG[:3]
WG15[[13, 11, 9]] = _WG[:3]
WG15[7] = _WG[3]

ENVELOPE = 1.3
INITIAL_PANELS = 64
MAX_PANELS = 200_000
# below this e^sigma is too close to 1 to carry sigma; expand in sigma instead
SIGMA_TAYLOR = 1e-10


@dataclass(frozen=True)
class AleParams:
    eta: float
    sigma: float
    base_capacity: float
    horizon: float
    alpha: float = 0.0
    max_particles: int = 200_000
    rtol: float = 1e-8

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if not (0.0 < self.base_capacity < 1.0):
            raise DomainError("base_capacity must lie in (0, 1)")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.alpha == 0 and self.horizon / self.base_capacity > self.max_particles:
            raise BudgetError(f"T/c = {self.horizon / self.base_capacity:.0f} exceeds the particle budget {self.max_particles}")


def log_abs_deriv_off_circle(chain: ConformalChain, sigma: float, theta):
    """``log|Phi'(e^{sigma + i theta})|``, accurate for any ``sigma > 0``.

    For tiny ``sigma`` the point is pulled back onto the circle and
    ``Phi'`` is expanded to first order, which keeps tip zeros at ``~sigma|Phi''|``.
    """
    th = np.asarray(theta, dtype=float)
    if sigma >= SIGMA_TAYLOR:
        return chain.log_abs_deriv(np.exp(sigma + 1j * th))
    u = np.exp(1j * th)
    ev = chain.evaluate_with_derivs(u)
    with np.errstate(invalid="ignore", over="ignore"):
        d = ev.first + math.expm1(sigma) * u * ev.second
        out = np.log(np.abs(d))
    # the expansion breaks down only at base points, where |Phi'| blows up
    return np.where(np.isfinite(out), out, ev.log_abs_first)


def log_density_unnormalized(chain: ConformalChain, eta: float, sigma: float, theta):
    """``-eta log|Phi'(e^{sigma + i theta})|``."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    th = np.asarray(theta, dtype=float)
    if eta == 0:
        out = np.zeros_like(th)
    else:
        out = -eta * log_abs_deriv_off_circle(chain, sigma, th)
    return float(out) if np.ndim(theta) == 0 else out


def tip_windows(angles, capacity: float):
    """Half-widths ``min(c^2, spacing/4)`` of the tip windows."""
    a = np.asarray(angles, dtype=float)
    if len(a) == 0:
        return a
    if len(a) == 1:
        gap = np.array([math.pi])
    else:
        diff = np.abs(wrap_angle(a[:, None] - a[None, :]))
        np.fill_diagonal(diff, np.inf)
        gap = diff.min(axis=1)
    return np.minimum(capacity * capacity, gap / 4.0)


@dataclass
class _Panels:
    lo: np.ndarray
    hi: np.ndarray
    space: np.ndarray  # -1: theta, j >= 0: u-variable of tip window j
    k15: np.ndarray  # Kronrod integral relative to exp(peak)
    err: np.ndarray
    peak: np.ndarray  # max log node value
    low: np.ndarray  # min log node value


class AttachmentDensity:
    """Normalising constant and sampler for one step of ALE.

    ``tips`` are the preimage angles that get ``tan`` windows.  The integral is
    refined until every panel satisfies ``err <= rtol K`` (or carries less than
    ``rtol/100`` of the total error budget) and the node values in heavy panels
    vary by at most a factor 8, which keeps rejection sampling efficient.
    """

    def __init__(self, chain: ConformalChain, eta: float, sigma: float, tips=(), capacity: float = 0.01,
                 rtol: float = 1e-8):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        self.chain, self.eta, self.sigma, self.rtol = chain, float(eta), float(sigma), float(rtol)
        self.tips = np.asarray(tips, dtype=float)
        self.violations = 0
        if self.eta == 0.0:
            self.log_z, self.rel_error, self.tip_mass, self.panels = math.log(TWO_PI), 0.0, 0.0, None
            return
        self.halfw = tip_windows(self.tips, capacity)
        self._integrate()

    # -- node evaluation -------------------------------------------------
    def _theta_logjac(self, x, space):
        x = np.asarray(x, dtype=float)
        space = np.broadcast_to(space, x.shape)
        theta = x.copy()
        logjac = np.zeros_like(x)
        w = space >= 0
        if np.any(w):
            phi = self.tips[space[w]]
            u = x[w]
            theta[w] = phi + self.sigma * np.tan(u)
            logjac[w] = math.log(self.sigma) - 2.0 * np.log(np.cos(u))
        return theta, logjac

    def log_value(self, x, space):
        theta, logjac = self._theta_logjac(x, space)
        return log_density_unnormalized(self.chain, self.eta, self.sigma, wrap_angle(theta)) + logjac

    def _eval(self, lo, hi, space):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        lv = self.log_value(x.ravel(), np.repeat(space, 15)).reshape(x.shape)
        peak = lv.max(axis=1)
        vals = np.exp(lv - peak[:, None])
        k = half * (vals @ WK15)
        g = half * (vals @ WG15)
        return k, np.abs(k - g), peak, lv.min(axis=1)

    # -- integration -----------------------------------------------------
    def _initial_panels(self):
        lo, hi, sp = [], [], []
        if len(self.tips):
            umax = np.arctan(self.halfw / self.sigma)
            for j, um in enumerate(umax):
                edges = np.linspace(-um, um, 5)
                lo += list(edges[:-1]); hi += list(edges[1:]); sp += [j] * 4
            order = np.argsort(wrap_angle(self.tips))
            starts = wrap_angle(self.tips[order]) + self.halfw[order]
            ends = np.roll(wrap_angle(self.tips[order]) - self.halfw[order], -1)
            ends = np.where(ends <= starts, ends + TWO_PI, ends)
        else:
            starts, ends = np.array([-math.pi]), np.array([math.pi])
        total = float(np.sum(ends - starts))
        for s, e in zip(starts, ends):
            m = max(2, int(round(INITIAL_PANELS * (e - s) / total)))
            edges = np.linspace(s, e, m + 1)
            lo += list(edges[:-1]); hi += list(edges[1:]); sp += [-1] * m
        return np.array(lo), np.array(hi), np.array(sp, dtype=int)

    def _integrate(self):
        lo, hi, sp = self._initial_panels()
        k, err, peak, low = self._eval(lo, hi, sp)
        P = _Panels(lo, hi, sp, k, err, peak, low)
        for _ in range(60):
            shift = P.peak.max()
            scale = np.exp(P.peak - shift)
            mass, perr = P.k15 * scale, P.err * scale
            z = mass.sum()
            split = (perr > self.rtol * mass) & (perr > 0.01 * self.rtol * z)
            split |= (P.peak - P.low > math.log(8.0)) & (mass > 1e-6 * z)
            if not np.any(split):
                break
            if len(P.lo) + np.count_nonzero(split) > MAX_PANELS:
                raise NumericError("attachment density quadrature did not converge (panel budget)")
            s_lo, s_hi, s_sp = P.lo[split], P.hi[split], P.space[split]
            s_mid = 0.5 * (s_lo + s_hi)
            n_lo = np.concatenate([s_lo, s_mid])
            n_hi = np.concatenate([s_mid, s_hi])
            n_sp = np.concatenate([s_sp, s_sp])
            nk, ne, npk, nlw = self._eval(n_lo, n_hi, n_sp)
            keep = ~split
            P = _Panels(np.concatenate([P.lo[keep], n_lo]), np.concatenate([P.hi[keep], n_hi]),
                        np.concatenate([P.space[keep], n_sp]), np.concatenate([P.k15[keep], nk]),
                        np.concatenate([P.err[keep], ne]), np.concatenate([P.peak[keep], npk]),
                        np.concatenate([P.low[keep], nlw]))
        else:
            raise NumericError("attachment density quadrature did not converge (iterations)")
        shift = P.peak.max()
        scale = np.exp(P.peak - shift)
        mass = P.k15 * scale
        z = mass.sum()
        if not (z > 0 and np.isfinite(z)):
            raise NumericError("attachment density has no finite mass")
        self.panels = P
        self._cum = np.cumsum(mass) / z
        self.log_z = float(shift + math.log(z))
        self.rel_error = float(np.sum(P.err * scale) / z)
        self.tip_mass = float(mass[P.space >= 0].sum() / z)

    # -- sampling ----------------------------------------------------------
    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = 1 if size is None else int(size)
        if self.eta == 0.0:
            out = rng.uniform(-math.pi, math.pi, n)
            return float(out[0]) if size is None else out
        P = self.panels
        out = np.empty(n)
        todo = np.arange(n)
        # panel by mass, then rejection inside that panel until accepted
        panel = np.minimum(np.searchsorted(self._cum, rng.random(n), side="right"), len(P.lo) - 1)
        while len(todo):
            i = panel[todo]
            x = P.lo[i] + (P.hi[i] - P.lo[i]) * rng.random(len(todo))
            lv = self.log_value(x, P.space[i])
            env = P.peak[i] + math.log(ENVELOPE)
            self.violations += int(np.count_nonzero(lv > env))
            ok = np.log(rng.random(len(todo))) < lv - env
            theta, _ = self._theta_logjac(x[ok], P.space[i][ok])
            out[todo[ok]] = wrap_angle(theta)
            todo = todo[~ok]
        return float(out[0]) if size is None else out

    def cdf(self, theta, n_grid: int = 400_001, n_tip: int = 40_001) -> np.ndarray:
        """Numerical CDF on ``(-pi, pi]`` by the trapezoid rule (for testing the sampler).

        A uniform grid is merged with ``tan``-spaced points around every tip so
        that peaks of width ``sigma`` are resolved.
        """
        th = np.asarray(theta, dtype=float)
        if self.eta == 0.0:
            return (th + math.pi) / TWO_PI
        pts = [np.linspace(-math.pi, math.pi, n_grid)]
        u = np.linspace(-0.5 * math.pi, 0.5 * math.pi, n_tip)[1:-1]
        for phi in self.tips:
            pts.append(wrap_angle(phi + self.sigma * np.tan(u)))
        xs = np.unique(np.concatenate(pts))
        f = np.exp(log_density_unnormalized(self.chain, self.eta, self.sigma, xs) - self.log_z)
        c = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(xs))])
        return np.interp(th, xs, c / c[-1])


@dataclass(frozen=True)
class PartitionEstimate:
    z: float
    log_z: float
    rel_error: float
    panels: int
    tip_mass: float


def partition_estimate(chain: ConformalChain, eta: float, sigma: float, tips=(), capacity: float = 0.01,
                       rtol: float = 1e-8) -> PartitionEstimate:
    """``Z = int |Phi'(e^{sigma + i theta})|^{-eta} d theta`` with an error estimate."""
    d = AttachmentDensity(chain, eta, sigma, tips, capacity, rtol)
    n = 0 if d.panels is None else len(d.panels.lo)
    return PartitionEstimate(math.exp(d.log_z) if d.log_z < 700 else math.inf, d.log_z, d.rel_error, n, d.tip_mass)


def sample_attachment(chain: ConformalChain, params: AleParams, rng: np.random.Generator, tips=(), size=None):
    """Draw attachment angle(s) for the next particle."""
    d = AttachmentDensity(chain, params.eta, params.sigma, tips, params.base_capacity, params.rtol)
    return d.sample(rng, size)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass
class AleTrajectory:
    model: str
    params: AleParams
    initial: InitialConfig
    chain: ConformalChain
    angles: np.ndarray  # driving angles theta_n (theta*_n for aux)
    capacities: np.ndarray
    nearest_tip: np.ndarray
    tip_distance: np.ndarray  # chordal distance to the nearest tip
    deltas: np.ndarray  # theta_n - phi_{j_n}, wrapped
    log_z: np.ndarray
    tip_mass: np.ndarray
    tip_angles: np.ndarray  # (n+1, k)
    tip_weights: np.ndarray  # (n+1, k)
    tip_abs_second: np.ndarray  # (n+1, k)
    frame_angles: np.ndarray = field(default=None)  # aux: attachment angles in the Psi frame
    rotation: float = 0.0  # aux: cumulative rotation D_n
    sampler_violations: int = 0

    @property
    def horizon(self) -> float:
        return self.params.horizon

    @property
    def times(self) -> np.ndarray:
        """Capacity time after each particle (index 0 is time 0)."""
        return np.concatenate([[0.0], np.cumsum(self.capacities)])

    def state_index_at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float) + 1e-12, side="right") - 1
        return np.clip(idx, 0, len(self.times) - 1)

    def event_records(self):
        for n in range(len(self.angles)):
            yield {
                "n": n + 1,
                "theta": float(self.angles[n]),
                "capacity": float(self.capacities[n]),
                "nearest_tip": int(self.nearest_tip[n]),
                "delta": float(self.deltas[n]),
                "z_estimate": float(self.log_z[n]),
            }


def write_events_jsonl(path, traj: AleTrajectory):
    """One JSON record per event; ``z_estimate`` is ``log Z_n``."""
    with open(path, "w") as fh:
        for rec in traj.event_records():
            fh.write(json.dumps(rec) + "\n")


def _initial_tips(initial: InitialConfig, eta: float):
    return TipState.from_initial(initial, eta) if initial.arms else None


def _capacity(chain, params: AleParams, theta: float) -> float:
    if params.alpha == 0:
        return params.base_capacity
    la = float(log_abs_deriv_off_circle(chain, params.sigma, theta))
    c = params.base_capacity * math.exp(-params.alpha * la)
    if not (0.0 < c < 1.0):
        raise DomainError(f"alpha rule produced capacity {c!r} outside (0, 1)")
    return c


class _Recorder:
    def __init__(self, state):
        self.rows = {k: [] for k in ("theta", "cap", "j", "dist", "delta", "logz", "tipmass", "frame")}
        self.tips = []
        self.push_state(state)

    def push_state(self, state):
        if state is None:
            self.tips.append((np.zeros(0), np.zeros(0), np.zeros(0)))
        else:
            self.tips.append((state.angles.copy(), state.weights.copy(), np.abs(state.second)))

    def arrays(self):
        r = self.rows
        k = max(len(t[0]) for t in self.tips)

        def pad(i):
            out = np.full((len(self.tips), k), np.nan)
            for n, t in enumerate(self.tips):
                out[n, : len(t[i])] = t[i]
            return out

        return (np.array(r["theta"]), np.array(r["cap"]), np.array(r["j"], dtype=int), np.array(r["dist"]),
                np.array(r["delta"]), np.array(r["logz"]), np.array(r["tipmass"]), pad(0), pad(1), pad(2),
                np.array(r["frame"]))


def ale_run(initial: InitialConfig, params: AleParams, rng: np.random.Generator) -> AleTrajectory:
    """Grow ALE until the capacity time reaches the horizon.

    Tip bookkeeping runs in lockstep: each particle becomes the new tip of the
    arm whose tip preimage is chordally nearest to it.  A cluster started from
    the bare disc gets its single arm from the first particle.
    """
    chain = ConformalChain(initial)
    state = _initial_tips(initial, params.eta)
    rec = _Recorder(state)
    total = 0.0
    violations = 0
    n = 0
    while total < params.horizon * (1 - 1e-12):
        if n >= params.max_particles:
            raise BudgetError("particle budget exceeded")
        tips = state.angles if state is not None else ()
        dens = AttachmentDensity(chain, params.eta, params.sigma, tips, params.base_capacity, params.rtol)
        theta = dens.sample(rng)
        violations += dens.violations
        cap = _capacity(chain, params, theta)
        if state is None:
            j, dist, delta = 0, 0.0, 0.0
            g = slit_geometry(cap)
            chain = chain.append(AttachmentEvent(theta, cap))
            state = TipState([theta], [g.tip_second_derivative * np.exp(-1j * theta)], params.eta)
        else:
            j, dist = state.nearest(theta)
            delta = wrap_angle(theta - state.angles[j])
            chain, state = attach(chain, state, j, theta, cap)
        r = rec.rows
        r["theta"].append(wrap_angle(theta)); r["cap"].append(cap); r["j"].append(j); r["dist"].append(dist)
        r["delta"].append(delta); r["logz"].append(dens.log_z); r["tipmass"].append(dens.tip_mass)
        r["frame"].append(wrap_angle(theta))
        rec.push_state(state)
        total += cap
        n += 1
    th, cp, jj, dd, de, lz, tm, ta, tw, t2, fr = rec.arrays()
    return AleTrajectory("ale", params, initial, chain, th, cp, jj, dd, de, lz, tm, ta, tw, t2, fr, 0.0, violations)


def aux_run(initial: InitialConfig, params: AleParams, rng: np.random.Generator, choose=None) -> AleTrajectory:
    """Auxiliary model: sample as ALE, then rotate the cluster onto the nearest tip.

    With ``Phi*_n = R_D o Psi_n o R_{-D}`` the rotation is absorbed into ``D``
    and ``Psi`` only ever grows at its own tips, so ``Psi`` is a multinomial
    chain.  ``theta*`` is drawn in the ``Psi`` frame as ``theta* - D``.  The
    returned ``chain`` is ``Phi*_n`` written out with every angle shifted by
    ``D_n`` (the flattened form), and ``frame_angles`` holds the tip angles
    ``psi_j`` used in the ``Psi`` frame.  ``choose(n, theta_psi, state)``
    overrides the snapped arm (for coupling tests).
    """
    if not initial.arms:
        raise DomainError("the auxiliary model needs an initial configuration with arms")
    psi_chain = ConformalChain(initial)
    state = TipState.from_initial(initial, params.eta)
    rec = _Recorder(state)
    D = 0.0
    total = 0.0
    violations = 0
    n = 0
    while total < params.horizon * (1 - 1e-12):
        if n >= params.max_particles:
            raise BudgetError("particle budget exceeded")
        dens = AttachmentDensity(psi_chain, params.eta, params.sigma, state.angles, params.base_capacity, params.rtol)
        theta_psi = dens.sample(rng)
        violations += dens.violations
        cap = _capacity(psi_chain, params, theta_psi)
        j, dist = state.nearest(theta_psi)
        if choose is not None:
            j = int(choose(n, theta_psi, state))
            dist = float(chord(theta_psi, state.angles[j]))
        psi_j = float(state.angles[j])
        delta = wrap_angle(theta_psi - psi_j)
        r = rec.rows
        r["theta"].append(wrap_angle(theta_psi + D)); r["cap"].append(cap); r["j"].append(j); r["dist"].append(dist)
        r["delta"].append(delta); r["logz"].append(dens.log_z); r["tipmass"].append(dens.tip_mass)
        r["frame"].append(psi_j)
        psi_chain, state = attach_at_tip(psi_chain, state, j, cap)
        D = wrap_angle(D + delta)
        rec.push_state(state)
        total += cap
        n += 1
    th, cp, jj, dd, de, lz, tm, ta, tw, t2, fr = rec.arrays()
    flat = ConformalChain(rotate_initial(initial, D), [AttachmentEvent(a + D, c) for a, c in zip(fr, cp)])
    # tip angles of Phi* are those of Psi shifted by the running rotation
    shifts = np.concatenate([[0.0], np.cumsum(de)])
    ta = wrap_angle(ta + shifts[:, None])
    return AleTrajectory("aux", params, initial, flat, th, cp, jj, dd, de, lz, tm, ta, tw, t2, fr, D, violations)
