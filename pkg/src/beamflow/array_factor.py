"""Channel-aware array factor and its cosine/sine phasor decomposition.

All functions broadcast: pass scalar ``rho``/``theta`` for a single grid point
or 1-D arrays of length ``N`` to get ``(N, s)`` bases and ``(N,)`` magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PhysicalConstants, Swarm


@dataclass(frozen=True)
class PhasorBasis:
    """Per-agent cosine/sine components at one or more grid points.

    ``u[..., m] = gain_m * d^(-mu/2) * cos(alpha_m + zeta)`` and ``v`` the
    matching sine; amplitudes are deliberately excluded.
    """

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray
    zeta: np.ndarray
    clamped: np.ndarray

    @property
    def size(self) -> int:
        return self.u.shape[-1]


def _offsets(position, rho, theta):
    position = np.asarray(position, dtype=float)
    rho = np.asarray(rho, dtype=float)[..., None]
    theta = np.asarray(theta, dtype=float)[..., None]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    return position[..., 0] - rho * cos_t, position[..., 1] - rho * sin_t, cos_t, sin_t


def distance(position, rho, theta, d_min: float = 0.0):
    """Distance from ``position`` to the polar point ``(rho, theta)``, clamped below by ``d_min``.

    ``position`` has a trailing axis of length 2.
    """
    position = np.asarray(position, dtype=float)
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    dx = position[..., 0] - rho * np.cos(theta)
    dy = position[..., 1] - rho * np.sin(theta)
    return np.maximum(np.hypot(dx, dy), d_min)


def zeta(position, rho, theta, k: float, d_min: float = 0.0):
    """Geometric phase k*x*cos(theta) + k*y*sin(theta) + k*d."""
    position = np.asarray(position, dtype=float)
    return (
        k * position[..., 0] * np.cos(theta)
        + k * position[..., 1] * np.sin(theta)
        + k * distance(position, rho, theta, d_min)
    )


def channel_terms(position, rho, theta, constants: PhysicalConstants, d_min: float):
    """Position-only quantities: clamped distance, clamp mask, ``zeta`` and ``d^(-mu/2)``.

    These stay fixed while only amplitudes and phases evolve, so the fast
    flow computes them once per slow step.
    """
    dx, dy, cos_t, sin_t = _offsets(position, rho, theta)
    raw = np.hypot(dx, dy)
    clamped = raw < d_min
    d = np.where(clamped, d_min, raw)
    position = np.asarray(position, dtype=float)
    k = constants.wave_number
    z = k * position[..., 0] * cos_t + k * position[..., 1] * sin_t + k * d
    decay = d ** (-0.5 * constants.path_loss_exponent)
    return d, clamped, z, decay


def basis_from_terms(phase, gain, d, clamped, z, decay) -> PhasorBasis:
    scale = np.asarray(gain) * decay
    angle = np.asarray(phase) + z
    return PhasorBasis(scale * np.cos(angle), scale * np.sin(angle), d, z, clamped)


def phasor_basis(swarm: Swarm, rho, theta, constants: PhysicalConstants, d_min: float) -> PhasorBasis:
    d, clamped, z, decay = channel_terms(swarm.position, rho, theta, constants, d_min)
    return basis_from_terms(swarm.phase, swarm.gain, d, clamped, z, decay)


def af_components(a, basis: PhasorBasis):
    """Return ``(a.u, a.v)``, the real and imaginary parts of the array factor."""
    a = np.asarray(a, dtype=float)
    return basis.u @ a, basis.v @ a


def af_magnitude(a, basis: PhasorBasis):
    au, av = af_components(a, basis)
    return np.sqrt(au * au + av * av)


def af_complex(swarm: Swarm, rho, theta, constants: PhysicalConstants, d_min: float):
    au, av = af_components(swarm.amplitude, phasor_basis(swarm, rho, theta, constants, d_min))
    return au + 1j * av


def far_field_af(amplitude, phase, position, theta, k: float):
    """Far-field array factor without channel terms: sum a_m exp(j(alpha_m + k r_m . r_hat))."""
    amplitude = np.asarray(amplitude, dtype=float)
    phase = np.asarray(phase, dtype=float)
    position = np.asarray(position, dtype=float)
    theta = np.asarray(theta, dtype=float)[..., None]
    arg = phase + k * (position[:, 0] * np.cos(theta) + position[:, 1] * np.sin(theta))
    return np.sum(amplitude * np.exp(1j * arg), axis=-1)
