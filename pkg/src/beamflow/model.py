"""Domain types, scenario validation and the scalar objective.

Agent state is kept as a :class:`Swarm` of parallel numpy arrays because every
flow update is vectorised over agents; :class:`AgentState` is the per-agent
view used for reporting and hand-built scenarios.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ScenarioError(ValueError):
    """Raised when a scenario violates one or more invariants.

    ``problems`` lists every violated invariant, not just the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class PhysicalConstants:
    frequency: float
    path_loss_exponent: float = 2.0

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def wave_number(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass(frozen=True)
class AgentState:
    amplitude: float
    phase: float
    gain: float
    position: tuple[float, float]
    anchor: tuple[float, float]
    motion_aux: tuple[float, float] = (0.0, 0.0)


@dataclass
class Swarm:
    """Array form of ``s`` agents.

    ``amplitude``, ``phase`` and ``gain`` have shape ``(s,)``; ``position``,
    ``anchor`` and ``motion_aux`` have shape ``(s, 2)``.
    """

    amplitude: np.ndarray
    phase: np.ndarray
    gain: np.ndarray
    position: np.ndarray
    anchor: np.ndarray
    motion_aux: np.ndarray

    def __post_init__(self):
        self.amplitude = np.array(self.amplitude, dtype=float).reshape(-1)
        self.phase = np.array(self.phase, dtype=float).reshape(-1)
        self.gain = np.array(self.gain, dtype=float).reshape(-1)
        self.position = np.array(self.position, dtype=float).reshape(-1, 2)
        self.anchor = np.array(self.anchor, dtype=float).reshape(-1, 2)
        self.motion_aux = np.array(self.motion_aux, dtype=float).reshape(-1, 2)

    @property
    def size(self) -> int:
        return self.amplitude.shape[0]

    @classmethod
    def at_rest(cls, amplitude, phase, position, gain=None) -> "Swarm":
        """Agents sitting at their anchors with zero motion state."""
        position = np.array(position, dtype=float).reshape(-1, 2)
        amplitude = np.array(amplitude, dtype=float).reshape(-1)
        if gain is None:
            gain = np.ones_like(amplitude)
        return cls(amplitude, phase, gain, position, position.copy(), np.zeros_like(position))

    @classmethod
    def from_agents(cls, agents) -> "Swarm":
        agents = list(agents)
        return cls(
            [ag.amplitude for ag in agents],
            [ag.phase for ag in agents],
            [ag.gain for ag in agents],
            [ag.position for ag in agents],
            [ag.anchor for ag in agents],
            [ag.motion_aux for ag in agents],
        )

    def agents(self) -> list[AgentState]:
        return [
            AgentState(
                float(self.amplitude[m]),
                float(self.phase[m]),
                float(self.gain[m]),
                tuple(float(c) for c in self.position[m]),
                tuple(float(c) for c in self.anchor[m]),
                tuple(float(c) for c in self.motion_aux[m]),
            )
            for m in range(self.size)
        ]

    def copy(self) -> "Swarm":
        return Swarm(
            self.amplitude.copy(),
            self.phase.copy(),
            self.gain.copy(),
            self.position.copy(),
            self.anchor.copy(),
            self.motion_aux.copy(),
        )


@dataclass(frozen=True)
class SampleGrid:
    """Ordered ``(rho, theta)`` samples with the desired magnitude at each."""

    rho: np.ndarray
    theta: np.ndarray
    desired: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.array(self.rho, dtype=float).reshape(-1))
        object.__setattr__(self, "theta", np.array(self.theta, dtype=float).reshape(-1))
        object.__setattr__(self, "desired", np.array(self.desired, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return self.rho.shape[0]

    def with_desired(self, desired) -> "SampleGrid":
        return SampleGrid(self.rho, self.theta, desired)


@dataclass(frozen=True)
class MotionPenalty:
    """One symmetric 2x2 matrix per agent, stacked to shape ``(s, 2, 2)``."""

    matrices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrices", np.array(self.matrices, dtype=float).reshape(-1, 2, 2))

    @classmethod
    def uniform(cls, count: int, matrix=((1.0, 0.0), (0.0, 1.0))) -> "MotionPenalty":
        return cls(np.broadcast_to(np.asarray(matrix, dtype=float), (count, 2, 2)).copy())


@dataclass(frozen=True)
class ObjectiveValue:
    pattern_term: float
    motion_term: float

    @property
    def total(self) -> float:
        return self.pattern_term + self.motion_term

    def as_dict(self) -> dict:
        return {"pattern_term": self.pattern_term, "motion_term": self.motion_term, "total": self.total}


@dataclass(frozen=True)
class Scenario:
    constants: PhysicalConstants
    swarm: Swarm
    grid: SampleGrid
    penalties: MotionPenalty
    epsilon: float = 0.01
    slow_step: float = 1e-2
    fast_step: float | None = None
    horizon: float = 1.0
    rng_seed: int = 0
    min_distance: float | None = None
    method: str = "euler"
    stride: int = 1
    tol_fast: float = 1e-8
    tol_slow: float = 1e-8
    max_halvings: int = 30
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def h_fast(self) -> float:
        if self.fast_step is not None:
            return self.fast_step
        return self.epsilon * self.slow_step / 10.0

    @property
    def d_min(self) -> float:
        if self.min_distance is not None:
            return self.min_distance
        return 1e-3 * self.constants.wavelength

    @property
    def fast_steps_per_slow(self) -> int:
        return max(1, int(round(self.slow_step / self.h_fast)))

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _is_positive_definite(S: np.ndarray) -> bool:
    return bool(np.linalg.det(S) > 0 and np.trace(S) > 0)


def validate_scenario(scenario: Scenario) -> Scenario:
    """Check every scenario invariant; raise :class:`ScenarioError` listing all failures."""
    problems = []
    c = scenario.constants
    if not (np.isfinite(c.frequency) and c.frequency > 0):
        problems.append("frequency must be positive")
    if not c.path_loss_exponent >= 0:
        problems.append("path loss exponent must be >= 0")

    sw = scenario.swarm
    s = sw.size
    if s < 1:
        problems.append("at least one agent is required")
    for name in ("phase", "gain"):
        if getattr(sw, name).shape != (s,):
            problems.append(f"agent {name} has wrong length")
    for name in ("position", "anchor", "motion_aux"):
        if getattr(sw, name).shape != (s, 2):
            problems.append(f"agent {name} has wrong shape")
    if np.any(sw.amplitude < 0):
        problems.append("negative amplitude")
    if sw.gain.shape == (s,) and np.any(sw.gain <= 0):
        problems.append("gain must be positive")
    for name in ("amplitude", "phase", "gain", "position", "anchor", "motion_aux"):
        if not np.all(np.isfinite(getattr(sw, name))):
            problems.append(f"non-finite agent {name}")

    g = scenario.grid
    if len(g) == 0:
        problems.append("empty grid")
    if not (g.theta.shape == g.rho.shape == g.desired.shape):
        problems.append("grid arrays differ in length")
    else:
        if np.any(~(g.rho > 0)):
            problems.append("grid rho must be positive")
        if np.any(~np.isfinite(g.desired)) or np.any(g.desired < 0):
            problems.append("desired magnitudes must be finite and non-negative")
        if len({(float(r), float(t)) for r, t in zip(g.rho, g.theta)}) != len(g):
            problems.append("duplicate grid points")

    S = scenario.penalties.matrices
    if S.shape != (s, 2, 2):
        problems.append("one penalty matrix per agent is required")
    else:
        for m, Sm in enumerate(S):
            if not np.allclose(Sm, Sm.T):
                problems.append(f"penalty {m} not symmetric")
            elif not _is_positive_definite(Sm):
                problems.append(f"penalty {m} not positive definite")

    if not scenario.epsilon > 0:
        problems.append("epsilon must be positive")
    elif scenario.epsilon >= 1:
        problems.append("epsilon must be < 1")
    for name in ("slow_step", "h_fast", "d_min"):
        if not getattr(scenario, name) > 0:
            problems.append(f"{name} must be positive")
    if not scenario.horizon >= 0:
        problems.append("horizon must be >= 0")
    if scenario.method not in ("euler", "rk4"):
        problems.append(f"unknown integration method {scenario.method!r}")
    if scenario.stride < 1:
        problems.append("stride must be >= 1")

    if problems:
        raise ScenarioError(problems)
    if scenario.epsilon > 0.1:
        warnings.warn(f"epsilon={scenario.epsilon} is not small; time-scale separation is weak", stacklevel=2)
    return scenario


def motion_integrand(position, anchor, penalties: MotionPenalty) -> float:
    """Sum over agents of (r - r0)^T S (r - r0)."""
    delta = np.asarray(position) - np.asarray(anchor)
    return float(np.einsum("mi,mij,mj->", delta, penalties.matrices, delta))


def phi_i(amplitude, basis, target):
    """Half squared magnitude residual at one (or, vectorised, every) grid point."""
    from .array_factor import af_magnitude

    return 0.5 * (target - af_magnitude(amplitude, basis)) ** 2


def pattern_term(swarm: Swarm, grid: SampleGrid, constants: PhysicalConstants, d_min: float) -> float:
    from .array_factor import phasor_basis

    basis = phasor_basis(swarm, grid.rho, grid.theta, constants, d_min)
    return float(np.sum(phi_i(swarm.amplitude, basis, grid.desired)))


def objective(swarm: Swarm, scenario: Scenario, motion_term: float = 0.0) -> ObjectiveValue:
    """Objective at the current state.

    ``motion_term`` is the running trapezoidal integral of the motion penalty,
    which only the integrator can accumulate; it defaults to zero (t = t0).
    """
    return ObjectiveValue(
        pattern_term(swarm, scenario.grid, scenario.constants, scenario.d_min),
        float(motion_term),
    )
