"""Analytic gradients of the per-sample residual and a finite-difference oracle.

Per-sample functions broadcast over leading grid axes exactly like
:mod:`beamflow.array_factor`; :func:`total_gradients` sums them over the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_factor import PhasorBasis, af_components, channel_terms, basis_from_terms
from .model import PhysicalConstants, Swarm


def projected_amplitude_gradient(g_a, a):
    """Drop components that would push an amplitude already at zero below zero."""
    return np.where((np.asarray(a) <= 0.0) & (g_a > 0.0), 0.0, g_a)


def fast_norm(g_a, g_alpha, a) -> float:
    """Stationarity measure of the fast flow: |projected g_a| + |g_alpha|."""
    return float(np.linalg.norm(projected_amplitude_gradient(g_a, a)) + np.linalg.norm(g_alpha))


@dataclass(frozen=True)
class GradientBundle:
    g_a: np.ndarray
    g_alpha: np.ndarray
    g_r: np.ndarray
    amplitude: np.ndarray | None = None

    @property
    def fast_norm(self) -> float:
        if self.amplitude is None:
            return float(np.linalg.norm(self.g_a) + np.linalg.norm(self.g_alpha))
        return fast_norm(self.g_a, self.g_alpha, self.amplitude)

    @property
    def slow_norm(self) -> float:
        return float(np.linalg.norm(self.g_r))


def _residual_ratio(a, basis: PhasorBasis, target):
    """Return ``(a.u, a.v, (|AF| - f) / max(|AF|, delta))``."""
    au, av = af_components(a, basis)
    mag = np.sqrt(au * au + av * av)
    target = np.asarray(target, dtype=float)
    guard = 1e-12 * (1.0 + target)
    return au, av, (mag - target) / np.maximum(mag, guard)


def grad_amplitude(a, basis: PhasorBasis, target):
    au, av, ratio = _residual_ratio(a, basis, target)
    return ratio[..., None] * (au[..., None] * basis.u + av[..., None] * basis.v)


def grad_phase(a, basis: PhasorBasis, target):
    a = np.asarray(a, dtype=float)
    au, av, ratio = _residual_ratio(a, basis, target)
    return ratio[..., None] * (-au[..., None] * (a * basis.v) + av[..., None] * (a * basis.u))


def position_partials(swarm: Swarm, rho, theta, constants: PhysicalConstants, d_min: float, basis=None):
    """Derivatives of each agent's cosine and sine terms with respect to its own position.

    Returns ``(du_dx, du_dy, dv_dx, dv_dy)`` where ``du_dx[..., m]`` is the
    derivative of ``a_m gain_m d^(-mu/2) cos(alpha_m + zeta)`` in ``x_m``.
    At clamped distances ``d`` is held constant, so only the ``k cos(theta)``
    and ``k sin(theta)`` phase terms survive.
    """
    if basis is None:
        d, clamped, z, decay = channel_terms(swarm.position, rho, theta, constants, d_min)
        basis = basis_from_terms(swarm.phase, swarm.gain, d, clamped, z, decay)
    mu = constants.path_loss_exponent
    k = constants.wave_number
    rho = np.asarray(rho, dtype=float)[..., None]
    theta = np.asarray(theta, dtype=float)[..., None]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cx = swarm.position[:, 0] - rho * cos_t
    cy = swarm.position[:, 1] - rho * sin_t
    d = basis.d
    live = ~basis.clamped

    a = swarm.amplitude
    # a*u and a*v already carry a_m gain_m d^(-mu/2) cos/sin(alpha_m + zeta)
    U = a * basis.u
    V = a * basis.v
    decay_x = np.where(live, -mu * (2.0 * cx) / (4.0 * d * d), 0.0)
    decay_y = np.where(live, -mu * (2.0 * cy) / (4.0 * d * d), 0.0)
    phase_x = k * cos_t + np.where(live, k * (2.0 * cx) / (2.0 * d), 0.0)
    phase_y = k * sin_t + np.where(live, k * (2.0 * cy) / (2.0 * d), 0.0)

    du_dx = decay_x * U - V * phase_x
    du_dy = decay_y * U - V * phase_y
    dv_dx = decay_x * V + U * phase_x
    dv_dy = decay_y * V + U * phase_y
    return du_dx, du_dy, dv_dx, dv_dy


def grad_position(swarm: Swarm, rho, theta, target, constants: PhysicalConstants, d_min: float, basis=None):
    """Gradient of the residual term with respect to every agent position, shape ``(..., s, 2)``."""
    if basis is None:
        d, clamped, z, decay = channel_terms(swarm.position, rho, theta, constants, d_min)
        basis = basis_from_terms(swarm.phase, swarm.gain, d, clamped, z, decay)
    au, av, ratio = _residual_ratio(swarm.amplitude, basis, target)
    du_dx, du_dy, dv_dx, dv_dy = position_partials(swarm, rho, theta, constants, d_min, basis)
    au = au[..., None]
    av = av[..., None]
    gx = au * du_dx + av * dv_dx
    gy = au * du_dy + av * dv_dy
    return ratio[..., None, None] * np.stack([gx, gy], axis=-1)


def total_gradients(swarm: Swarm, grid, constants: PhysicalConstants, d_min: float, basis=None) -> GradientBundle:
    """Gradients of the summed residual over every grid sample."""
    if basis is None:
        d, clamped, z, decay = channel_terms(swarm.position, grid.rho, grid.theta, constants, d_min)
        basis = basis_from_terms(swarm.phase, swarm.gain, d, clamped, z, decay)
    a = swarm.amplitude
    f = grid.desired
    return GradientBundle(
        np.sum(grad_amplitude(a, basis, f), axis=0),
        np.sum(grad_phase(a, basis, f), axis=0),
        np.sum(grad_position(swarm, grid.rho, grid.theta, f, constants, d_min, basis), axis=0),
        a,
    )


def fd_gradient(fn, x, step=None):
    """Central finite-difference gradient of scalar ``fn`` at ``x``.

    With ``step=None`` each coordinate uses ``h = 1e-6 * (1 + |x_j|)``.
    """
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for j in range(flat.size):
        h = step if step is not None else 1e-6 * (1.0 + abs(flat[j]))
        orig = flat[j]
        flat[j] = orig + h
        f_plus = fn(x)
        flat[j] = orig - h
        f_minus = fn(x)
        flat[j] = orig
        out[j] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic, reference, floor: float = 1e-8, zero_tol: float = 1e-8) -> float:
    """Norm-wise relative error ``|analytic - reference| / max(|analytic|, floor)``.

    An identically zero analytic gradient (zero residual everywhere) has no
    scale to be relative to; it scores 0 if the reference is within
    ``zero_tol`` of zero, which absorbs finite-difference truncation noise.
    """
    analytic = np.asarray(analytic, dtype=float)
    reference = np.asarray(reference, dtype=float)
    diff = float(np.linalg.norm(analytic - reference))
    if not np.any(analytic):
        return 0.0 if diff <= zero_tol else diff / floor
    return diff / max(float(np.linalg.norm(analytic)), floor)
