"""Two time-scale integration: fast amplitude/phase flow, slow position flow.

Each slow step of size ``h_s`` is preceded by ``round(h_s / h_f)`` fast steps
with effective rate ``h_f / epsilon``. Positions are frozen during the fast
sub-sequence, so position-dependent channel terms are computed once per slow
step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .array_factor import channel_terms
from .gradients import GradientBundle, fast_norm, total_gradients
from .model import ObjectiveValue, Scenario, Swarm, motion_integrand, validate_scenario
from .model import pattern_term as model_pattern_term

log = logging.getLogger(__name__)

DESCENT_TOL = 1e-12


@dataclass
class Snapshot:
    t: float
    swarm: Swarm
    objective: ObjectiveValue


@dataclass
class FlowState:
    t: float
    swarm: Swarm
    motion_term: float = 0.0
    objective_history: list = field(default_factory=list)
    gradient_norm_history: list = field(default_factory=list)
    # (t, fast norm before the fast sub-sequence, fast norm after it)
    separation_history: list = field(default_factory=list)
    fast_steps: int = 0
    slow_steps: int = 0
    rejected_steps: int = 0
    descent_failures: int = 0

    def copy(self) -> "FlowState":
        return FlowState(
            self.t,
            self.swarm.copy(),
            self.motion_term,
            list(self.objective_history),
            list(self.gradient_norm_history),
            list(self.separation_history),
            self.fast_steps,
            self.slow_steps,
            self.rejected_steps,
            self.descent_failures,
        )


@dataclass
class Trajectory:
    samples: list
    final: FlowState
    stop_reason: str
    warnings: list = field(default_factory=list)


class _FrozenPositions:
    """Pattern residual as a function of (a, alpha) with positions held fixed.

    ``evaluate`` fuses the residual and both fast gradients; it is the
    matrix-vector form of :func:`grad_amplitude` and :func:`grad_phase`
    summed over the grid.
    """

    def __init__(self, swarm: Swarm, scenario: Scenario):
        self.f = scenario.grid.desired
        self.guard = 1e-12 * (1.0 + self.f)
        d, clamped, self.zeta, decay = channel_terms(
            swarm.position, scenario.grid.rho, scenario.grid.theta, scenario.constants, scenario.d_min
        )
        self.scale = swarm.gain * decay

    def evaluate(self, a, phase):
        angle = phase + self.zeta
        u = self.scale * np.cos(angle)
        v = self.scale * np.sin(angle)
        au = u @ a
        av = v @ a
        mag = np.sqrt(au * au + av * av)
        res = mag - self.f
        ratio = res / np.maximum(mag, self.guard)
        ru = ratio * au
        rv = ratio * av
        return 0.5 * float(res @ res), ru @ u + rv @ v, a * (rv @ u - ru @ v)


@dataclass
class _FastPoint:
    amplitude: np.ndarray
    phase: np.ndarray
    value: float
    g_a: np.ndarray
    g_alpha: np.ndarray

    @property
    def norm(self) -> float:
        return fast_norm(self.g_a, self.g_alpha, self.amplitude)


def _fast_point(problem: _FrozenPositions, a, phase) -> _FastPoint:
    return _FastPoint(a, phase, *problem.evaluate(a, phase))


def _fast_update(problem: _FrozenPositions, pt: _FastPoint, epsilon, h, method, max_halvings):
    """Backtracked step from ``pt``; returns ``(new point, rejections, failed)``."""
    rate = 1.0 / epsilon
    for rejected in range(max_halvings + 1):
        if method == "rk4":
            k1 = (-rate * pt.g_a, -rate * pt.g_alpha)
            k2 = _slope(problem, pt.amplitude + 0.5 * h * k1[0], pt.phase + 0.5 * h * k1[1], rate)
            k3 = _slope(problem, pt.amplitude + 0.5 * h * k2[0], pt.phase + 0.5 * h * k2[1], rate)
            k4 = _slope(problem, pt.amplitude + h * k3[0], pt.phase + h * k3[1], rate)
            a_new = pt.amplitude + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            al_new = pt.phase + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        else:
            a_new = pt.amplitude - (h * rate) * pt.g_a
            al_new = pt.phase - (h * rate) * pt.g_alpha
        new = _fast_point(problem, np.maximum(a_new, 0.0), al_new)
        if new.value <= pt.value + DESCENT_TOL:
            return new, rejected, False
        h *= 0.5
    return pt, max_halvings + 1, True


def _slope(problem, a, phase, rate):
    _, g_a, g_alpha = problem.evaluate(a, phase)
    return -rate * g_a, -rate * g_alpha


def fast_step(state: FlowState, scenario: Scenario) -> FlowState:
    """One backtracked fast step on amplitudes and phases; positions untouched."""
    sw = state.swarm
    problem = _FrozenPositions(sw, scenario)
    pt = _fast_point(problem, sw.amplitude, sw.phase)
    new, rejected, failed = _fast_update(problem, pt, scenario.epsilon, scenario.h_fast, scenario.method, scenario.max_halvings)
    out = state.copy()
    out.swarm.amplitude = new.amplitude
    out.swarm.phase = new.phase
    out.fast_steps += 1
    out.rejected_steps += rejected
    out.descent_failures += int(failed)
    return out


def _slow_rhs(swarm: Swarm, position, aux, scenario: Scenario):
    moved = Swarm(swarm.amplitude, swarm.phase, swarm.gain, position, swarm.anchor, aux)
    g_r = total_gradients(moved, scenario.grid, scenario.constants, scenario.d_min).g_r
    S = scenario.penalties.matrices
    dv = -2.0 * np.einsum("mij,mj->mi", S, position - swarm.anchor)
    return -g_r + aux, dv


def _slow_update(swarm: Swarm, scenario: Scenario):
    h = scenario.slow_step
    r, v = swarm.position, swarm.motion_aux
    k1 = _slow_rhs(swarm, r, v, scenario)
    if scenario.method == "euler":
        return r + h * k1[0], v + h * k1[1]
    k2 = _slow_rhs(swarm, r + 0.5 * h * k1[0], v + 0.5 * h * k1[1], scenario)
    k3 = _slow_rhs(swarm, r + 0.5 * h * k2[0], v + 0.5 * h * k2[1], scenario)
    k4 = _slow_rhs(swarm, r + h * k3[0], v + h * k3[1], scenario)
    return (
        r + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        v + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
    )


def slow_step(state: FlowState, scenario: Scenario) -> FlowState:
    """One slow step on positions and motion state; amplitudes and phases untouched."""
    out = state.copy()
    sw = out.swarm
    r_old = sw.position
    sw.position, sw.motion_aux = _slow_update(state.swarm, scenario)
    P = scenario.penalties
    out.motion_term += 0.5 * scenario.slow_step * (
        motion_integrand(r_old, sw.anchor, P) + motion_integrand(sw.position, sw.anchor, P)
    )
    out.t = state.t + scenario.slow_step
    out.slow_steps += 1
    return out


def stopping_rule(state: FlowState, scenario: Scenario, grads: GradientBundle | None = None):
    """Return ``None`` to continue, otherwise the stop reason (``"converged"`` or ``"horizon"``)."""
    if grads is None:
        grads = total_gradients(state.swarm, scenario.grid, scenario.constants, scenario.d_min)
    aux = float(np.max(np.linalg.norm(state.swarm.motion_aux, axis=1)))
    if grads.fast_norm < scenario.tol_fast and grads.slow_norm < scenario.tol_slow and aux < scenario.tol_slow:
        return "converged"
    if state.t >= scenario.horizon - 1e-12 * max(1.0, scenario.horizon):
        return "horizon"
    return None


def pattern_term(swarm: Swarm, scenario: Scenario) -> float:
    return model_pattern_term(swarm, scenario.grid, scenario.constants, scenario.d_min)


def _record(state: FlowState, grads: GradientBundle, pattern: float):
    value = ObjectiveValue(pattern, state.motion_term)
    state.objective_history.append((state.t, value))
    state.gradient_norm_history.append(
        (state.t, float(np.linalg.norm(grads.g_a)), float(np.linalg.norm(grads.g_alpha)), grads.slow_norm)
    )
    return value


def integrate(scenario: Scenario, *, validate: bool = True) -> Trajectory:
    """Run the coupled flows until convergence or the horizon."""
    if validate:
        validate_scenario(scenario)
    state = FlowState(0.0, scenario.swarm.copy())
    n_fast = scenario.fast_steps_per_slow
    P = scenario.penalties

    grads = total_gradients(state.swarm, scenario.grid, scenario.constants, scenario.d_min)
    value = _record(state, grads, pattern_term(state.swarm, scenario))
    samples = [Snapshot(state.t, state.swarm.copy(), value)]
    reason = stopping_rule(state, scenario, grads)

    while reason is None:
        sw = state.swarm
        problem = _FrozenPositions(sw, scenario)
        pt = _fast_point(problem, sw.amplitude, sw.phase)
        start_norm = pt.norm
        for _ in range(n_fast):
            pt, rejected, failed = _fast_update(problem, pt, scenario.epsilon, scenario.h_fast, scenario.method, scenario.max_halvings)
            state.fast_steps += 1
            state.rejected_steps += rejected
            if failed:
                state.descent_failures += 1
                break
        sw.amplitude, sw.phase = pt.amplitude, pt.phase
        state.separation_history.append((state.t, start_norm, pt.norm))

        r_old = sw.position
        sw.position, sw.motion_aux = _slow_update(sw, scenario)
        state.motion_term += 0.5 * scenario.slow_step * (
            motion_integrand(r_old, sw.anchor, P) + motion_integrand(sw.position, sw.anchor, P)
        )
        state.slow_steps += 1
        state.t = state.slow_steps * scenario.slow_step

        grads = total_gradients(sw, scenario.grid, scenario.constants, scenario.d_min)
        value = _record(state, grads, pattern_term(sw, scenario))
        reason = stopping_rule(state, scenario, grads)
        if state.slow_steps % scenario.stride == 0 or reason is not None:
            samples.append(Snapshot(state.t, sw.copy(), value))

    warnings = []
    if state.descent_failures:
        msg = f"fast flow failed to descend after {scenario.max_halvings} halvings on {state.descent_failures} step(s)"
        log.warning(msg)
        warnings.append(msg)
    return Trajectory(samples, state, reason, warnings)
