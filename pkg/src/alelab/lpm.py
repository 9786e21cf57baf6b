"""Laplacian path model: deterministic growth driven by ``sum_j p_j delta_{phi_j}``.

The default integrator is a first-order splitting scheme.  Each macro step
freezes the weights and then grows every arm in turn by a micro slit of
capacity ``p_j dt`` at its exact tip preimage.  A k-fold symmetric start is
integrated exactly instead, since equal arms stay equal and growing all of
them by ``dt/k`` composes the root map with itself:
``(f^{a}(z^k))^{1/k} o (f^{b}(z^k))^{1/k} = (f^{a+b}(z^k))^{1/k}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .chain import ConformalChain, InitialConfig, RootMap
from .core import chord, wrap_angle
from .errors import BudgetError, DomainError
from .tips import TipState, attach_at_tip, n_events

DT_MIN, DT_MAX = 1e-7, 1e-2


@dataclass
class LpmTrajectory:
    times: np.ndarray  # (N+1,)
    angles: np.ndarray  # (N+1, k)
    weights: np.ndarray  # (N+1, k)
    second: np.ndarray  # (N+1, k) complex Phi'' at the tips
    dt: float
    method: str
    eta: float
    initial: InitialConfig
    chain: ConformalChain  # final map
    event_counts: np.ndarray | None = None  # events appended after each macro step

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def k(self) -> int:
        return self.angles.shape[1]

    @property
    def abs_second(self) -> np.ndarray:
        return np.abs(self.second)

    def chain_at(self, i: int) -> ConformalChain:
        """The map ``Phi_{t_i}``."""
        if self.method == "exact-symmetric":
            return _symmetric_chain(self.initial, self.times[i])
        return self.chain.truncated(int(self.event_counts[i]))

    def state_index_at(self, t) -> np.ndarray:
        """Index of the last grid time ``<= t``."""
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float) + 1e-12, side="right") - 1
        return np.clip(idx, 0, len(self.times) - 1)


def _time_grid(horizon: float, dt: float) -> np.ndarray:
    n = n_events(horizon, dt)
    t = dt * np.arange(n + 1)
    t[-1] = horizon
    return t


def _symmetric_root(initial: InitialConfig, t: float) -> RootMap:
    k = initial.k
    if initial.root is not None:
        r = initial.root
        return RootMap(r.order, r.capacity + k * t, r.angle)
    # single arm realized by one slit: treat as a 1-fold root map
    ev = initial.realization[0]
    return RootMap(1, ev.capacity + t, ev.angle)


def _symmetric_chain(initial: InitialConfig, t: float) -> ConformalChain:
    root = _symmetric_root(initial, t)
    return ConformalChain(InitialConfig(arms=initial.arms, symmetric_exact=True, root=root))


def _exact_symmetric(initial: InitialConfig, eta: float, times: np.ndarray, dt: float) -> LpmTrajectory:
    k = initial.k
    n = len(times)
    angles = np.tile(np.array(initial.tip_angles), (n, 1))
    weights = np.full((n, k), 1.0 / k)
    second = np.empty((n, k), dtype=complex)
    for i, t in enumerate(times):
        root = _symmetric_root(initial, t)
        mags = root.tip_second_derivs()
        order = [int(np.argmin(chord(root.tip_angles(), a))) for a in initial.tip_angles]
        second[i] = mags[order]
    return LpmTrajectory(times, angles, weights, second, dt, "exact-symmetric", eta, initial, _symmetric_chain(initial, times[-1]))


def lpm_run(
    initial: InitialConfig,
    eta: float,
    dt: float,
    horizon: float,
    exact_symmetric: bool = True,
    max_events: int = 2_000_000,
) -> LpmTrajectory:
    """Integrate the LPM from ``initial`` up to capacity time ``horizon``."""
    if not (DT_MIN <= dt <= DT_MAX):
        raise DomainError(f"dt must lie in [{DT_MIN}, {DT_MAX}]")
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    if not initial.arms:
        raise DomainError("LPM needs at least one arm")
    times = _time_grid(horizon, dt)
    if exact_symmetric and initial.symmetric_exact:
        return _exact_symmetric(initial, eta, times, dt)
    k = initial.k
    n = len(times) - 1
    if n * k > max_events:
        raise BudgetError(f"LPM run needs {n * k} micro events, budget is {max_events}")
    chain = ConformalChain(initial)
    state = TipState.from_initial(initial, eta)
    angles = np.empty((n + 1, k))
    weights = np.empty((n + 1, k))
    second = np.empty((n + 1, k), dtype=complex)
    counts = np.zeros(n + 1, dtype=int)
    angles[0], weights[0], second[0] = state.angles, state.weights, state.second
    for i in range(n):
        step = times[i + 1] - times[i]
        p = state.weights
        for j in range(k):
            chain, state = attach_at_tip(chain, state, j, p[j] * step)
        angles[i + 1], weights[i + 1], second[i + 1] = state.angles, state.weights, state.second
        counts[i + 1] = len(chain)
    return LpmTrajectory(times, angles, weights, second, dt, "splitting-round-robin", eta, initial, chain, counts)


def tip_velocity(angles: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``d phi_j/dt = sum_{l != j} p_l cot((phi_j - phi_l)/2)``."""
    diff = 0.5 * (angles[:, None] - angles[None, :])
    k = len(angles)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot = np.cos(diff) / np.sin(diff)
    cot[np.arange(k), np.arange(k)] = 0.0
    return cot @ weights


def tip_ode_crosscheck(traj: LpmTrajectory, return_path: bool = False):
    """Max chordal deviation between the trajectory and an RK4 solve of the tip ODE.

    The ODE uses the trajectory's weights, held constant on each grid interval,
    and the growing arm's weight ``p_l`` in each summand.
    """
    if len(traj.times) < 10:
        raise DomainError("need at least 10 grid points")
    phi = traj.angles[0].copy()
    path = [phi.copy()]
    dev = 0.0
    for i in range(len(traj.times) - 1):
        h = traj.times[i + 1] - traj.times[i]
        p = traj.weights[i]
        k1 = tip_velocity(phi, p)
        k2 = tip_velocity(phi + 0.5 * h * k1, p)
        k3 = tip_velocity(phi + 0.5 * h * k2, p)
        k4 = tip_velocity(phi + h * k3, p)
        phi = phi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        path.append(phi.copy())
        dev = max(dev, float(np.max(chord(phi, traj.angles[i + 1]))))
    if return_path:
        return dev, wrap_angle(np.array(path))
    return dev


def encode_driving(traj: LpmTrajectory, stride: int = 1):
    """Atoms ``(phi_j(t_i), t_i)`` with mass ``p_j(t_i) (t_{i+s} - t_i) / T``."""
    from .measures import CylinderMeasure

    n = len(traj.times) - 1
    if stride < 1 or n % stride != 0:
        raise DomainError("stride must divide the number of grid intervals")
    idx = np.arange(0, n, stride)
    widths = traj.times[idx + stride] - traj.times[idx]
    T = traj.horizon
    theta = traj.angles[idx].ravel()
    t = np.repeat(traj.times[idx], traj.k)
    mass = (traj.weights[idx] * widths[:, None] / T).ravel()
    return CylinderMeasure(theta, t, mass, T)


def far_field_capacity(chain: ConformalChain, radius: float = 1e8) -> float:
    """``log|Phi(R)/R|``, the numerically observed log-capacity."""
    return float(math.log(abs(chain.evaluate(complex(radius)) / radius)))


def weight_spread(traj: LpmTrajectory) -> np.ndarray:
    return traj.weights.max(axis=1) - traj.weights.min(axis=1)


def write_trajectory_csv(path, traj: LpmTrajectory):
    """CSV ``(t, phi_j..., p_j..., abs_second_deriv_j...)``."""
    k = traj.k
    head = ["t"] + [f"phi_{j}" for j in range(k)] + [f"p_{j}" for j in range(k)] + [f"abs_second_deriv_{j}" for j in range(k)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for i, t in enumerate(traj.times):
            row = [t, *traj.angles[i], *traj.weights[i], *np.abs(traj.second[i])]
            w.writerow([repr(float(x)) for x in row])


__all__ = [
    "LpmTrajectory",
    "lpm_run",
    "tip_ode_crosscheck",
    "tip_velocity",
    "encode_driving",
    "far_field_capacity",
    "weight_spread",
    "write_trajectory_csv",
]
