"""Driving measures on the cylinder ``T x [0, T]`` and the bounded-Lipschitz distance.

``d_BW(mu, nu) = sup { int phi d(mu - nu) : ||phi||_Lip + ||phi||_inf <= 1 }``.

On a finite support this is the linear program

    max  sum_i w_i phi_i
    s.t. phi_i - phi_j <= b d_ij,  -a <= phi_i <= a,  a + b <= 1,  a, b >= 0

with ``w = mu - nu``.  For fixed ``a`` the inner problem is Kantorovich-Rubinstein
duality for the truncated cost ``min((1-a) d, 2a)``, so also

    d_BW = max_a  W_1(mu, nu; min((1-a) d, 2a)),

a concave function of ``a``.  Small instances solve the LP directly (HiGHS);
large ones maximise the transport form with an exact network simplex (POT).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

from .core import TWO_PI, chord, wrap_angle
from .errors import BudgetError, DomainError, NumericError

MASS_TOL = 1e-9
DEFAULT_CAP = 4000
LP_PAIR_LIMIT = 60  # union support size up to which the pairwise LP is used


@dataclass(frozen=True)
class CylinderMetric:
    """``d = |e^{i theta1} - e^{i theta2}| + time_scale |t1 - t2|``."""

    time_scale: float = 1.0

    def __post_init__(self):
        if not self.time_scale > 0:
            raise DomainError("time_scale must be positive")

    def pairwise(self, theta1, t1, theta2=None, t2=None) -> np.ndarray:
        if theta2 is None:
            theta2, t2 = theta1, t1
        th1, tt1 = np.asarray(theta1)[:, None], np.asarray(t1)[:, None]
        th2, tt2 = np.asarray(theta2)[None, :], np.asarray(t2)[None, :]
        return chord(th1, th2) + self.time_scale * np.abs(tt1 - tt2)


class CylinderMeasure:
    """Finitely supported probability measure on ``T x [0, horizon]``.

    Atoms with identical (wrapped angle, time) are merged; zero masses are
    dropped.
    """

    __slots__ = ("theta", "t", "mass", "horizon")

    def __init__(self, theta, t, mass, horizon: float, check: bool = True):
        theta = np.asarray(wrap_angle(np.asarray(theta, dtype=float)), dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        mass = np.asarray(mass, dtype=float).ravel()
        if not (theta.shape == t.shape == mass.shape):
            raise DomainError("theta, t and mass must have equal length")
        if horizon <= 0:
            raise DomainError("horizon must be positive")
        if np.any(mass < 0):
            raise DomainError("masses must be non-negative")
        if np.any(t < -1e-12 * horizon) or np.any(t > horizon * (1 + 1e-12)):
            raise DomainError("atom times must lie in [0, horizon]")
        if check and abs(mass.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"masses sum to {mass.sum()!r}, expected 1")
        keep = mass > 0
        theta, t, mass = theta[keep], t[keep], mass[keep]
        if len(mass):
            pts = np.stack([theta, t], axis=1)
            uniq, inv = np.unique(pts, axis=0, return_inverse=True)
            if len(uniq) < len(mass):
                mass = np.bincount(inv.ravel(), weights=mass, minlength=len(uniq))
                theta, t = uniq[:, 0], uniq[:, 1]
            else:
                order = np.lexsort((t, theta))
                theta, t, mass = theta[order], t[order], mass[order]
        self.theta, self.t, self.mass, self.horizon = theta, t, mass, float(horizon)

    def __len__(self):
        return len(self.mass)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def __repr__(self):
        return f"CylinderMeasure(atoms={len(self)}, horizon={self.horizon})"


def dirac(theta: float, t: float, horizon: float) -> CylinderMeasure:
    return CylinderMeasure([theta], [t], [1.0], horizon)


# ---------------------------------------------------------------------------
# encodings
# ---------------------------------------------------------------------------


def encode_events(angles, capacities, horizon: float) -> CylinderMeasure:
    """One atom per particle over its capacity-time interval clipped to ``[0, T]``.

    Particle ``n`` occupies ``[C_{n-1}, C_n)`` with ``C_n = c_1 + ... + c_n``;
    its atom sits at the midpoint of the clipped interval with mass
    ``length / T``.  With equal capacities and ``T = N c`` this is the atom at
    ``(n - 1/2) c`` with mass ``c/T``.
    """
    angles = np.asarray(angles, dtype=float)
    caps = np.asarray(capacities, dtype=float)
    if angles.shape != caps.shape:
        raise DomainError("angles and capacities must match")
    end = np.cumsum(caps)
    start = end - caps
    lo, hi = np.minimum(start, horizon), np.minimum(end, horizon)
    if hi[-1] < horizon * (1 - 1e-9):
        raise DomainError("particles do not cover the horizon")
    return CylinderMeasure(angles, 0.5 * (lo + hi), (hi - lo) / horizon, horizon)


def encode_ale(traj) -> CylinderMeasure:
    """Driving measure of an ALE-type trajectory (``angles``, ``capacities``, ``horizon``)."""
    return encode_events(traj.angles, traj.capacities, traj.horizon)


# ---------------------------------------------------------------------------
# d_BW
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DbwResult:
    value: float
    a: float
    b: float
    method: str
    support: int

    def __float__(self):
        return self.value


def _union(mu: CylinderMeasure, nu: CylinderMeasure):
    th = np.concatenate([mu.theta, nu.theta])
    tt = np.concatenate([mu.t, nu.t])
    w = np.concatenate([mu.mass, -nu.mass])
    pts = np.stack([th, tt], axis=1)
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
    keep = np.abs(w) > 1e-15
    return uniq[keep, 0], uniq[keep, 1], w[keep]


def _lp(d: np.ndarray, w: np.ndarray):
    n = len(w)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    m = len(ii)
    rows = np.arange(m)
    # variables: phi_0..phi_{n-1}, a, b
    lip = sparse.coo_matrix(
        (
            np.concatenate([np.ones(m), -np.ones(m), -d[ii, jj]]),
            (np.concatenate([rows, rows, rows]), np.concatenate([ii, jj, np.full(m, n + 1)])),
        ),
        shape=(m, n + 2),
    )
    eye = sparse.identity(n, format="coo")
    acol = sparse.coo_matrix((-np.ones(n), (np.arange(n), np.zeros(n, int))), shape=(n, 1))
    upper = sparse.hstack([eye, acol, sparse.coo_matrix((n, 1))])
    lower = sparse.hstack([-eye, acol, sparse.coo_matrix((n, 1))])
    budget = sparse.coo_matrix(([1.0, 1.0], ([0, 0], [n, n + 1])), shape=(1, n + 2))
    A = sparse.vstack([lip, upper, lower, budget]).tocsr()
    ub = np.concatenate([np.zeros(m + 2 * n), [1.0]])
    c = np.concatenate([-w, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = optimize.linprog(c, A_ub=A, b_ub=ub, bounds=bounds, method="highs",
                           options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise NumericError(f"LP solver failed: {res.message}")
    return -res.fun, float(res.x[n]), float(res.x[n + 1])


def _emd2():
    # POT probes every array backend on import; only numpy is needed here
    for name in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{name}", "1")
    import ot

    return ot.emd2


def _w1(cost: np.ndarray, w: np.ndarray) -> float:
    """Exact transport cost between the positive and negative parts of ``w``."""
    pos, neg = np.nonzero(w > 0)[0], np.nonzero(w < 0)[0]
    p, q = w[pos], -w[neg]
    q = q * (p.sum() / q.sum())
    val = _emd2()(p, q, np.ascontiguousarray(cost[np.ix_(pos, neg)]), numItermax=10_000_000)
    return float(val)


def _transport(d: np.ndarray, w: np.ndarray, xtol=1e-10):
    def neg(a):
        return -_w1(np.minimum((1.0 - a) * d, 2.0 * a), w)

    res = optimize.minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": xtol})
    return -float(res.fun), float(res.x), 1.0 - float(res.x)


def d_bw(mu: CylinderMeasure, nu: CylinderMeasure, metric: CylinderMetric | None = None,
         cap: int = DEFAULT_CAP, method: str = "auto") -> DbwResult:
    """Bounded-Lipschitz distance with the attained ``(a, b)``."""
    metric = metric or CylinderMetric()
    if abs(mu.total_mass - nu.total_mass) > MASS_TOL:
        raise DomainError("measures must have equal total mass")
    th, tt, w = _union(mu, nu)
    n = len(w)
    if n > cap:
        raise BudgetError(f"combined support {n} exceeds cap {cap}; coarsen the measures first")
    if n == 0:
        return DbwResult(0.0, 0.0, 0.0, "trivial", 0)
    d = metric.pairwise(th, tt)
    if method == "auto":
        method = "lp" if n <= LP_PAIR_LIMIT else "transport"
    if method == "lp":
        val, a, b = _lp(d, w)
    elif method == "transport":
        val, a, b = _transport(d, w)
    else:
        raise DomainError(f"unknown method {method!r}")
    return DbwResult(max(val, 0.0), a, b, method, n)


# ---------------------------------------------------------------------------
# coarsening
# ---------------------------------------------------------------------------


def coarsen(m: CylinderMeasure, n_theta: int = 256, n_time: int = 64) -> CylinderMeasure:
    """Move every atom to the centre of its cell on a regular (angle x time) grid."""
    if n_theta < 2 or n_time < 2:
        raise DomainError("grid needs at least 2 cells per axis")
    ht = TWO_PI / n_theta
    htime = m.horizon / n_time
    i = np.floor((m.theta + math.pi) / ht).astype(int) % n_theta
    j = np.clip(np.floor(m.t / htime).astype(int), 0, n_time - 1)
    # atoms already at a centre stay put despite rounding
    return CylinderMeasure(-math.pi + (i + 0.5) * ht, (j + 0.5) * htime, m.mass, m.horizon, check=False)


def coarsening_bound(n_theta: int, n_time: int, horizon: float, metric: CylinderMetric | None = None) -> float:
    """Largest distance from a point to its cell centre."""
    metric = metric or CylinderMetric()
    return float(2 * math.sin(math.pi / (2 * n_theta)) + metric.time_scale * horizon / (2 * n_time))


# ---------------------------------------------------------------------------
# exchange format
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def write_measure(path, m: CylinderMeasure, metric: CylinderMetric | None = None, provenance: dict | None = None):
    """CSV ``theta,t,mass`` preceded by one ``# {json header}`` line."""
    metric = metric or CylinderMetric()
    header = {"format": "cylinder-measure", "version": FORMAT_VERSION, "horizon": m.horizon,
              "time_scale": metric.time_scale, "provenance": provenance or {}}
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["theta", "t", "mass"])
        for a, b, c in zip(m.theta, m.t, m.mass):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])


def read_measure(path):
    """Inverse of :func:`write_measure`; returns ``(measure, header)``."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise DomainError("missing JSON header line")
        header = json.loads(first[2:])
        rows = list(csv.DictReader(fh))
    th = [float(r["theta"]) for r in rows]
    t = [float(r["t"]) for r in rows]
    ms = [float(r["mass"]) for r in rows]
    return CylinderMeasure(th, t, ms, header["horizon"]), header
