"""Distributed beam pattern reconstruction with mobile agents.

A fast gradient flow tunes per-agent amplitudes and phases while a slow flow
moves the agents, both driven by a channel-aware array factor model.
"""

from .array_factor import PhasorBasis, af_complex, af_magnitude, distance, far_field_af, phasor_basis, zeta
from .config import load_scenario, parse_scenario, reference_scenario
from .dynamics import FlowState, Trajectory, fast_step, integrate, slow_step, stopping_rule
from .gradients import (
    GradientBundle,
    fd_gradient,
    grad_amplitude,
    grad_phase,
    grad_position,
    position_partials,
    total_gradients,
)
from .model import (
    AgentState,
    MotionPenalty,
    ObjectiveValue,
    PhysicalConstants,
    SampleGrid,
    Scenario,
    ScenarioError,
    Swarm,
    objective,
    phi_i,
    validate_scenario,
)
from .patterns import DesiredPatternSpec, GridSpec, binomial_taper, desired_pattern, make_esla, make_grid

__version__ = "0.1.0"
