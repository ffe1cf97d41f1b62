"""Desired beam patterns produced by a fictitious nominal array."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .array_factor import distance, far_field_af
from .model import PhysicalConstants, SampleGrid

FAR_FIELD = "far-field"
CHANNEL_AWARE = "channel-aware"


@dataclass(frozen=True)
class DesiredPatternSpec:
    positions: np.ndarray
    amplitudes: np.ndarray
    phase_gradient: float
    gains: np.ndarray | None = None
    path_loss_exponent: float = 2.0
    mode: str = FAR_FIELD

    def __post_init__(self):
        object.__setattr__(self, "positions", np.array(self.positions, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "amplitudes", np.array(self.amplitudes, dtype=float).reshape(-1))
        gains = np.ones(len(self.amplitudes)) if self.gains is None else self.gains
        object.__setattr__(self, "gains", np.array(gains, dtype=float).reshape(-1))
        n = len(self.amplitudes)
        if n < 1 or self.positions.shape[0] != n or self.gains.shape[0] != n:
            raise ValueError("positions, amplitudes and gains must describe the same n >= 1 elements")
        if np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be non-negative")
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")
        if self.mode not in (FAR_FIELD, CHANNEL_AWARE):
            raise ValueError(f"unknown pattern mode {self.mode!r}")

    @property
    def phases(self) -> np.ndarray:
        return np.arange(len(self.amplitudes)) * self.phase_gradient


@dataclass(frozen=True)
class GridSpec:
    theta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        rho = np.array(self.rho, dtype=float).reshape(-1)
        if theta.size == 0 or rho.size == 0:
            raise ValueError("grid needs at least one theta and one rho")
        if np.any(np.diff(theta) <= 0) or theta[0] < 0 or theta[-1] >= 2 * np.pi:
            raise ValueError("theta must be strictly increasing in [0, 2pi)")
        if np.any(np.diff(rho) <= 0) or rho[0] <= 0:
            raise ValueError("rho must be strictly increasing and positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "rho", rho)

    def __len__(self) -> int:
        return self.theta.size * self.rho.size

    def points(self):
        """Flattened ``(rho, theta)`` arrays, rho-major so each ring is contiguous."""
        rr, tt = np.meshgrid(self.rho, self.theta, indexing="ij")
        return rr.reshape(-1), tt.reshape(-1)


def make_esla(n: int, spacing: float) -> np.ndarray:
    """Equally spaced linear array on the x-axis, centred on the origin."""
    if n < 1 or spacing <= 0:
        raise ValueError("need n >= 1 and spacing > 0")
    x = (np.arange(n) - (n - 1) / 2.0) * spacing
    return np.column_stack([x, np.zeros(n)])


def binomial_taper(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need n >= 1")
    return np.array([comb(n - 1, m) for m in range(n)], dtype=float)


def make_grid(theta_count: int, rho_values) -> GridSpec:
    if theta_count < 1:
        raise ValueError("theta_count must be >= 1")
    return GridSpec(2.0 * np.pi * np.arange(theta_count) / theta_count, rho_values)


def desired_magnitude(spec: DesiredPatternSpec, rho, theta, constants: PhysicalConstants, d_min: float = 0.0):
    """|AF_d| at arbitrary polar points (broadcast over ``rho``/``theta``)."""
    k = constants.wave_number
    if spec.mode == FAR_FIELD:
        theta = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(theta, dtype=float))[1]
        return np.abs(far_field_af(spec.amplitudes, spec.phases, spec.positions, theta, k))
    rho = np.asarray(rho, dtype=float)[..., None]
    theta = np.asarray(theta, dtype=float)[..., None]
    pos = spec.positions
    d = distance(pos, rho, theta, d_min)
    scale = spec.amplitudes * spec.gains * d ** (-0.5 * spec.path_loss_exponent)
    arg = spec.phases + k * pos[:, 0] * np.cos(theta) + k * pos[:, 1] * np.sin(theta) + k * d
    return np.abs(np.sum(scale * np.exp(1j * arg), axis=-1))


def desired_pattern(spec: DesiredPatternSpec, grid: GridSpec, constants: PhysicalConstants, d_min: float = 0.0) -> SampleGrid:
    rho, theta = grid.points()
    return SampleGrid(rho, theta, desired_magnitude(spec, rho, theta, constants, d_min))


def reference_spec(constants: PhysicalConstants, mode: str = FAR_FIELD, n: int = 5) -> DesiredPatternSpec:
    """Binomially tapered half-wavelength ESLA steered with a -pi/2 phase gradient."""
    return DesiredPatternSpec(
        positions=make_esla(n, constants.wavelength / 2.0),
        amplitudes=binomial_taper(n),
        phase_gradient=-np.pi / 2.0,
        path_loss_exponent=constants.path_loss_exponent,
        mode=mode,
    )
