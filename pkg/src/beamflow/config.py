"""Scenario files: an INI-style key/value format read with :mod:`configparser`.

Sections
--------
``[constants]``   frequency (Hz), path_loss_exponent
``[agents]``      count, init = random | explicit, square_side_wavelengths,
                  amplitude, gain_mode = constant | rayleigh; for explicit
                  init: positions (``x y, x y, ...``), phases, amplitudes, gains
``[penalty]``     matrix (``s11 s12 s21 s22``, shared by all agents) or
                  matrices (one 4-tuple per agent, ``;``-separated)
``[grid]``        theta_count, rho_wavelengths or rho (meters), or
                  pattern_file (a ``rho,theta,magnitude`` CSV, relative paths
                  resolved against the scenario file)
``[desired]``     mode = far-field | channel-aware, elements,
                  spacing_wavelengths, taper = binomial | uniform,
                  phase_gradient, path_loss_exponent
``[integration]`` epsilon, slow_step, fast_step, horizon, seed,
                  min_distance, method = euler | rk4, stride, tol_fast,
                  tol_slow, max_halvings

Numbers accept scientific notation. ``BEAMFLOW_SEED`` in the environment
overrides ``[integration] seed``.
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path

import numpy as np

from . import csvio
from .model import MotionPenalty, PhysicalConstants, Scenario, ScenarioError, Swarm
from .patterns import CHANNEL_AWARE, DesiredPatternSpec, binomial_taper, desired_pattern, make_esla, make_grid

SEED_ENV = "BEAMFLOW_SEED"

REFERENCE_SCENARIO = """\
# Five agents at 40 MHz reconstructing a binomially tapered, -pi/2 steered
# half-wavelength ESLA pattern from random positions and phases.
[constants]
frequency = 40e6
path_loss_exponent = 0

[agents]
count = 5
init = random
square_side_wavelengths = 2
amplitude = 1
gain_mode = constant

[penalty]
matrix = 0.1 0 0 0.1

[grid]
theta_count = 36
rho_wavelengths = 1.5 2 2.5

[desired]
mode = channel-aware
elements = 5
spacing_wavelengths = 0.5
taper = binomial
phase_gradient = -1.5707963267948966

[integration]
epsilon = 0.01
slow_step = 0.01
horizon = 2
seed = 42
method = euler
stride = 10
"""


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _rows(text: str, width: int) -> np.ndarray:
    sep = ";" if ";" in text else ","
    rows = [_floats(chunk) for chunk in text.split(sep) if chunk.strip()]
    if any(len(r) != width for r in rows):
        raise ScenarioError([f"expected groups of {width} numbers, got {text!r}"])
    return np.array(rows, dtype=float)


def resolve_seed(file_seed: int, override: int | None = None) -> int:
    """CLI override beats the environment, which beats the file."""
    if override is not None:
        return int(override)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return int(env)
    return int(file_seed)


def random_swarm(count: int, side: float, rng: np.random.Generator, amplitude: float = 1.0, gain_mode: str = "constant") -> Swarm:
    """Positions uniform in a centred square, phases uniform in [0, 2pi)."""
    position = rng.uniform(-side / 2.0, side / 2.0, size=(count, 2))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=count)
    if gain_mode == "rayleigh":
        # sigma = sqrt(2/pi) gives unit mean
        gain = rng.rayleigh(np.sqrt(2.0 / np.pi), size=count)
    elif gain_mode == "constant":
        gain = np.ones(count)
    else:
        raise ScenarioError([f"unknown gain_mode {gain_mode!r}"])
    return Swarm.at_rest(np.full(count, amplitude), phase, position, gain)


def parse_scenario(text: str, *, seed: int | None = None, base_dir: Path | None = None) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError([f"unreadable scenario: {exc}"]) from exc
    try:
        return _build(cp, seed, base_dir or Path("."))
    except (KeyError, ValueError, configparser.Error) as exc:
        if isinstance(exc, (ScenarioError, csvio.CsvFormatError)):
            raise
        raise ScenarioError([f"bad scenario value: {exc}"]) from exc


def load_scenario(path, *, seed: int | None = None) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), seed=seed, base_dir=path.parent)


def reference_scenario(seed: int | None = None) -> Scenario:
    return parse_scenario(REFERENCE_SCENARIO, seed=seed)


def _build(cp: configparser.ConfigParser, seed_override, base_dir: Path) -> Scenario:
    for section in ("constants", "agents", "penalty", "grid", "integration"):
        if not cp.has_section(section):
            raise ScenarioError([f"missing [{section}] section"])
    const = cp["constants"]
    constants = PhysicalConstants(const.getfloat("frequency"), const.getfloat("path_loss_exponent", 2.0))
    lam = constants.wavelength

    integ = cp["integration"]
    seed = resolve_seed(integ.getint("seed", 0), seed_override)
    rng = np.random.default_rng(seed)

    ag = cp["agents"]
    init = ag.get("init", "random")
    if init == "random":
        swarm = random_swarm(
            ag.getint("count"),
            ag.getfloat("square_side_wavelengths", 2.0) * lam,
            rng,
            ag.getfloat("amplitude", 1.0),
            ag.get("gain_mode", "constant"),
        )
    elif init == "explicit":
        position = _rows(ag["positions"], 2)
        s = len(position)
        phase = np.array(_floats(ag.get("phases", "0 " * s)))
        amplitude = np.array(_floats(ag.get("amplitudes", "1 " * s)))
        gain = np.array(_floats(ag.get("gains", "1 " * s)))
        swarm = Swarm(amplitude, phase, gain, position, position.copy(), np.zeros_like(position))
    else:
        raise ScenarioError([f"unknown agent init {init!r}"])
    s = swarm.size

    pen = cp["penalty"]
    if "matrices" in pen:
        penalties = MotionPenalty(_rows(pen["matrices"], 4).reshape(-1, 2, 2))
    else:
        penalties = MotionPenalty.uniform(s, np.array(_floats(pen.get("matrix", "1 0 0 1"))).reshape(2, 2))

    grid_sec = cp["grid"]
    if "pattern_file" in grid_sec:
        pattern_path = Path(grid_sec["pattern_file"])
        if not pattern_path.is_absolute():
            pattern_path = base_dir / pattern_path
        grid = csvio.read_pattern(pattern_path)
    else:
        if "rho" in grid_sec:
            rho = _floats(grid_sec["rho"])
        else:
            rho = [r * lam for r in _floats(grid_sec.get("rho_wavelengths", "1.5 2 2.5"))]
        spec_grid = make_grid(grid_sec.getint("theta_count", 36), rho)
        if not cp.has_section("desired"):
            raise ScenarioError(["grid needs either pattern_file or a [desired] section"])
        spec = desired_spec_from_section(cp["desired"], constants)
        grid = desired_pattern(spec, spec_grid, constants, 1e-3 * lam)

    fast = integ.get("fast_step")
    dmin = integ.get("min_distance")
    return Scenario(
        constants=constants,
        swarm=swarm,
        grid=grid,
        penalties=penalties,
        epsilon=integ.getfloat("epsilon", 0.01),
        slow_step=integ.getfloat("slow_step", 1e-2),
        fast_step=float(fast) if fast else None,
        horizon=integ.getfloat("horizon", 1.0),
        rng_seed=seed,
        min_distance=float(dmin) if dmin else None,
        method=integ.get("method", "euler"),
        stride=integ.getint("stride", 1),
        tol_fast=integ.getfloat("tol_fast", 1e-8),
        tol_slow=integ.getfloat("tol_slow", 1e-8),
        max_halvings=integ.getint("max_halvings", 30),
    )


def desired_spec_from_section(sec, constants: PhysicalConstants) -> DesiredPatternSpec:
    n = sec.getint("elements", 5)
    taper = sec.get("taper", "binomial")
    if taper == "binomial":
        amplitudes = binomial_taper(n)
    elif taper == "uniform":
        amplitudes = np.ones(n)
    else:
        raise ScenarioError([f"unknown taper {taper!r}"])
    return DesiredPatternSpec(
        positions=make_esla(n, sec.getfloat("spacing_wavelengths", 0.5) * constants.wavelength),
        amplitudes=amplitudes,
        phase_gradient=sec.getfloat("phase_gradient", -np.pi / 2.0),
        path_loss_exponent=sec.getfloat("path_loss_exponent", constants.path_loss_exponent),
        mode=sec.get("mode", CHANNEL_AWARE),
    )


def describe(scenario: Scenario) -> dict:
    """Flat scenario parameters for run summaries."""
    return {
        "frequency": scenario.constants.frequency,
        "wavelength": scenario.constants.wavelength,
        "path_loss_exponent": scenario.constants.path_loss_exponent,
        "agents": scenario.swarm.size,
        "grid_points": len(scenario.grid),
        "epsilon": scenario.epsilon,
        "slow_step": scenario.slow_step,
        "fast_step": scenario.h_fast,
        "horizon": scenario.horizon,
        "seed": scenario.rng_seed,
        "min_distance": scenario.d_min,
        "method": scenario.method,
    }
