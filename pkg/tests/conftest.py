import numpy as np
import pytest

from beamflow.config import reference_scenario
from beamflow.model import MotionPenalty, PhysicalConstants, SampleGrid, Scenario, Swarm
from beamflow.patterns import make_grid

F40 = 40e6


@pytest.fixture
def consts():
    return PhysicalConstants(F40, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_swarm(rng, s=5, side=15.0, gain_mode="constant"):
    pos = rng.uniform(-side / 2, side / 2, (s, 2))
    gain = rng.rayleigh(np.sqrt(2 / np.pi), s) if gain_mode == "rayleigh" else np.ones(s)
    return Swarm(rng.uniform(0.5, 2.0, s), rng.uniform(0, 2 * np.pi, s), gain, pos, pos.copy(), np.zeros((s, 2)))


def random_grid(rng, consts, theta_count=36, rings=(1.5, 2.0, 2.5)):
    g = make_grid(theta_count, [r * consts.wavelength for r in rings])
    rho, theta = g.points()
    return SampleGrid(rho, theta, rng.uniform(0.0, 1.0, rho.size))


def make_scenario(consts, swarm, grid, S=np.eye(2), **kw):
    return Scenario(consts, swarm, grid, MotionPenalty.uniform(swarm.size, S), **kw)


@pytest.fixture(scope="session")
def reference():
    return reference_scenario()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
