"""Tip preimages and tip second derivatives under slit attachment.

For a chain ``Phi`` whose derivative vanishes at the tip preimages
``x_j = e^{i phi_j}``, attaching ``f`` at angle ``theta`` updates the state
exactly:

* the grown arm's tip becomes ``e^{i theta}`` with
  ``Phi_new''(e^{i theta}) = f''(e^{i theta}) Phi'(e^{i theta}(1+d))``;
* every other arm keeps its tip, whose preimage moves to ``f^{-1}(x_l)`` on the
  circle, and ``Phi_new''`` picks up the factor ``f'(f^{-1}(x_l))^2`` because
  ``Phi'(x_l) = 0``.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import AttachmentEvent, ConformalChain, InitialConfig
from .core import chord, circle_preimage_angle, slit_derivs, slit_geometry, wrap_angle
from .errors import BudgetError, DomainError, GeometryError, NumericError

BASE_GUARD = 1e-3  # refuse preimages this close (in units of beta) to a base point


def log_weights(second_derivs, eta: float) -> np.ndarray:
    """Normalised log weights ``-eta log|Phi''| - log Z``."""
    mag = np.abs(np.asarray(second_derivs, dtype=complex))
    if np.any(mag == 0.0) or not np.all(np.isfinite(mag)):
        raise NumericError("degenerate tip: vanishing or non-finite second derivative")
    lw = -eta * np.log(mag)
    lw -= lw.max()
    return lw - math.log(np.sum(np.exp(lw)))


@dataclass(frozen=True)
class TipState:
    angles: np.ndarray
    second: np.ndarray
    eta: float
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.array(wrap_angle(np.asarray(self.angles, dtype=float)), dtype=float, ndmin=1)
        s = np.array(self.second, dtype=complex, ndmin=1)
        if a.shape != s.shape:
            raise DomainError("angles and second derivatives must have equal length")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "second", s)
        if self.weights is None:
            object.__setattr__(self, "weights", np.exp(log_weights(s, self.eta)))

    @property
    def k(self) -> int:
        return len(self.angles)

    @property
    def min_spacing(self) -> float:
        if self.k < 2:
            return 2.0
        d = chord(self.angles[:, None], self.angles[None, :])
        return float(np.min(d + 4.0 * np.eye(self.k)))

    @classmethod
    def from_initial(cls, initial: InitialConfig, eta: float) -> "TipState":
        if not initial.arms:
            raise DomainError("tip dynamics need at least one arm")
        return cls(np.array(initial.tip_angles), np.array(initial.tip_second_derivs), float(eta))

    def nearest(self, theta: float) -> tuple:
        """Index of the nearest tip (chordal, ties to the lower index) and its distance."""
        d = chord(self.angles, theta)
        j = int(np.argmin(d))
        return j, float(d[j])


def multinomial_weights(state: TipState, eta: float | None = None) -> np.ndarray:
    """``p_j = |Phi''(x_j)|^{-eta} / sum_l |Phi''(x_l)|^{-eta}`` (log space)."""
    e = state.eta if eta is None else eta
    return np.exp(log_weights(state.second, e))


def attach(chain: ConformalChain, state: TipState, arm: int, theta: float, capacity: float):
    """Attach a slit at ``theta`` and make it the new tip of ``arm``."""
    if not 0 <= arm < state.k:
        raise DomainError("arm index out of range")
    ev = AttachmentEvent(theta, capacity)
    g = slit_geometry(capacity)
    beta = g.half_arc
    tip = cmath.exp(1j * ev.angle)
    d1_out = chain.evaluate_with_derivs(tip * (1.0 + g.length)).first
    angles = state.angles.copy()
    second = state.second.copy()
    second[arm] = g.tip_second_derivative * tip.conjugate() * complex(d1_out)
    angles[arm] = ev.angle
    others = np.arange(state.k) != arm
    if np.any(others):
        rel_old = wrap_angle(state.angles[others] - ev.angle)
        rel = np.asarray(circle_preimage_angle(g, rel_old))
        if np.any(np.abs(np.abs(rel) - beta) < BASE_GUARD * beta):
            raise GeometryError("a tip preimage fell against the base of the new particle")
        _, fp, _ = slit_derivs(np.exp(1j * rel), g.h, g.y0, math.cos(beta))
        second[others] = second[others] * fp * fp
        angles[others] = wrap_angle(ev.angle + rel)
    return chain.append(ev), TipState(angles, second, state.eta)


def attach_at_tip(chain: ConformalChain, state: TipState, arm: int, capacity: float):
    """Grow ``arm`` by a slit of ``capacity`` at its exact tip preimage."""
    return attach(chain, state, arm, float(state.angles[arm]), capacity)


def recompute(chain: ConformalChain, state: TipState) -> TipState:
    """From-scratch ``Phi''`` at the tracked preimages."""
    ev = chain.evaluate_with_derivs(np.exp(1j * state.angles))
    return TipState(state.angles, ev.second, state.eta)


def zero_residual(chain: ConformalChain, state: TipState) -> np.ndarray:
    """``|Phi'(x_j)| / |Phi''(x_j)|`` per arm (exact zeros give ~1e-16)."""
    ev = chain.evaluate_with_derivs(np.exp(1j * state.angles))
    return np.abs(ev.first) / np.abs(ev.second)


@dataclass
class MultinomialTrajectory:
    chain: ConformalChain
    capacity: float
    horizon: float
    angles: np.ndarray  # (n+1, k) tip preimage angles after each step
    weights: np.ndarray  # (n+1, k)
    abs_second: np.ndarray  # (n+1, k)
    choices: np.ndarray  # (n,) arm grown at step n+1
    driving: np.ndarray  # (n,) attachment angle theta_{n+1}
    final_state: TipState = None

    @property
    def times(self) -> np.ndarray:
        return self.capacity * np.arange(len(self.angles))

    def state_index_at(self, t) -> np.ndarray:
        """Index of the state in force at time ``t`` (after ``floor(t/c)`` particles)."""
        idx = np.floor(np.asarray(t, dtype=float) / self.capacity + 1e-9).astype(int)
        return np.clip(idx, 0, len(self.angles) - 1)


def n_events(horizon: float, capacity: float) -> int:
    """``ceil(T/c)`` with a guard against rounding of exact multiples."""
    return max(1, int(math.ceil(horizon / capacity - 1e-9)))


def multinomial_run(
    initial: InitialConfig,
    eta: float,
    capacity: float,
    horizon: float,
    rng: np.random.Generator,
    choose=None,
    max_events: int = 1_000_000,
) -> MultinomialTrajectory:
    """Multinomial model: grow arm ``j ~ p`` at its tip for ``ceil(T/c)`` steps.

    ``choose(n, state, rng)`` overrides the arm draw (used to force a tip
    sequence, e.g. when comparing with the auxiliary model).
    """
    n = n_events(horizon, capacity)
    if n > max_events:
        raise BudgetError(f"run needs {n} events, budget is {max_events}")
    chain = ConformalChain(initial)
    state = TipState.from_initial(initial, eta)
    k = state.k
    angles = np.empty((n + 1, k))
    weights = np.empty((n + 1, k))
    abs2 = np.empty((n + 1, k))
    choices = np.empty(n, dtype=int)
    driving = np.empty(n)
    angles[0], weights[0], abs2[0] = state.angles, state.weights, np.abs(state.second)
    for m in range(n):
        if choose is not None:
            j = int(choose(m, state, rng))
        else:
            j = int(rng.choice(k, p=state.weights)) if k > 1 else 0
        choices[m] = j
        driving[m] = state.angles[j]
        chain, state = attach_at_tip(chain, state, j, capacity)
        angles[m + 1], weights[m + 1], abs2[m + 1] = state.angles, state.weights, np.abs(state.second)
    return MultinomialTrajectory(chain, capacity, horizon, angles, weights, abs2, choices, driving, state)


# ---------------------------------------------------------------------------
# q-identity diagnostics
# ---------------------------------------------------------------------------


def third_derivative(chain: ConformalChain, angle: float, step: float) -> complex:
    """``Phi'''`` at ``e^{i angle}`` by one-sided differences of ``Phi''`` outwards.

    Richardson-combined over steps ``step, step/2, step/4`` (third order).
    """
    x = cmath.exp(1j * angle)
    pts = x * (1.0 + np.array([0.0, step / 4, step / 2, step]))
    d2 = chain.evaluate_with_derivs(pts).second
    h = x * np.array([step / 4, step / 2, step])
    dq = (d2[1:] - d2[0]) / h
    r1 = 2 * dq[0] - dq[1]
    r2 = 2 * dq[1] - dq[2]
    return complex((4 * r1 - r2) / 3)


def third_derivative_residual(chain: ConformalChain, state: TipState, arm: int, step: float | None = None) -> float:
    """``|Phi''' + 3 e^{-i phi} Phi''| / |Phi''|`` at the tip of ``arm``."""
    if step is None:
        caps = chain.event_capacities
        c = caps[-1] if len(caps) else chain.cumulative_capacity
        step = slit_geometry(min(c, 1.0)).half_arc / 50
    phi = float(state.angles[arm])
    s2 = chain.evaluate_with_derivs(cmath.exp(1j * phi)).second
    s3 = third_derivative(chain, phi, step)
    return float(abs(s3 + 3 * cmath.exp(-1j * phi) * s2) / abs(s2))


@dataclass(frozen=True)
class QResiduals:
    tip: np.ndarray  # relative residual of q_h(x_l) per arm (m = 0)
    exterior: np.ndarray  # relative residual of q_h(z) vs z Phi'(z)(z+xi)/(z-xi)
    third: float  # m = 1 identity at the grown tip, in relative form


def q_identity_check(chain: ConformalChain, state: TipState, arm: int, h: float, grow_arm=None, exterior=None):
    """Discrete ``q_h = (Phi_{t+h} - Phi_t)/h`` against the Loewner identities.

    Growth of capacity ``h`` happens at ``grow_arm`` (default ``arm``).  At a
    tip ``x_l`` the limit is ``2 x_l^2 Phi''(x_l)`` for the growing arm and 0
    for the others; at exterior points it is ``z Phi'(z)(z+xi)/(z-xi)``.  The
    ``m = 1`` identity reduces to ``Phi''' + 3 xi^{-1} Phi'' = 0`` because the
    discrete tip stays a zero of ``Phi'``; it is evaluated after the step.
    """
    if not (0.0 < h < 1e-3):
        raise DomainError("h must lie in (0, 1e-3)")
    g_arm = arm if grow_arm is None else grow_arm
    new_chain, new_state = attach_at_tip(chain, state, g_arm, h)
    xs = np.exp(1j * state.angles)
    q = (new_chain.evaluate(xs) - chain.evaluate(xs)) / h
    expect = np.where(np.arange(state.k) == g_arm, 2 * xs * xs * state.second, 0.0)
    tip_res = np.abs(q - expect) / np.abs(state.second)
    if exterior is None:
        exterior = np.array([1.5, -1.5 + 0.5j, 2j, 3.0 - 2j])
    z = np.asarray(exterior, dtype=complex)
    xi = xs[g_arm]
    ev = chain.evaluate_with_derivs(z)
    q_ext = (new_chain.evaluate(z) - ev.value) / h
    pred = z * ev.first * (z + xi) / (z - xi)
    ext_res = np.abs(q_ext - pred) / np.maximum(np.abs(pred), 1.0)
    third = third_derivative_residual(new_chain, new_state, g_arm)
    return QResiduals(tip_res, ext_res, third)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_tip_history(path, times, angles, weights, abs_second):
    """CSV rows ``(n, t, arm, phi, p, abs_second_deriv)``, one per arm and step."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "t", "arm", "phi", "p", "abs_second_deriv"])
        for n, t in enumerate(times):
            for j in range(angles.shape[1]):
                w.writerow([n, repr(float(t)), j, repr(float(angles[n, j])), repr(float(weights[n, j])), repr(float(abs_second[n, j]))])
