import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamflow.array_factor import af_complex, af_magnitude, distance, far_field_af, phasor_basis, zeta
from beamflow.model import PhysicalConstants, Swarm
from beamflow.patterns import binomial_taper, make_esla

from conftest import random_swarm


def complex_sum(swarm, rho, theta, consts, d_min):
    """Direct evaluation of the channel-aware array factor, one agent at a time."""
    k, mu = consts.wave_number, consts.path_loss_exponent
    total = 0j
    for m in range(swarm.size):
        x, y = swarm.position[m]
        d = max(np.hypot(x - rho * np.cos(theta), y - rho * np.sin(theta)), d_min)
        phase = swarm.phase[m] + k * x * np.cos(theta) + k * y * np.sin(theta) + k * d
        total += swarm.amplitude[m] * swarm.gain[m] / d ** (mu / 2) * np.exp(1j * phase)
    return total


def test_distance_examples():
    assert distance([0.0, 0.0], 1.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    d_min = 1e-3
    assert distance([3.0, 4.0], d_min, 0.7, d_min) == pytest.approx(5.0, abs=d_min)
    assert distance([1.0, 0.0], 1.0, 0.0, d_min) == d_min


def test_zeta_examples(rng):
    k = 0.83
    for theta in (0.0, 1.1, 4.0):
        assert zeta([0.0, 0.0], 3.0, theta, k) == pytest.approx(3.0 * k, rel=1e-15)
    assert zeta([1.0, 0.0], 2.0, 0.0, np.pi) == pytest.approx(2 * np.pi, rel=1e-15)
    pos = rng.uniform(-5, 5, 2)
    rho, theta = 7.3, 2.2
    terms = k * pos[0] * np.cos(theta) + k * pos[1] * np.sin(theta) + k * np.linalg.norm(pos - rho * np.array([np.cos(theta), np.sin(theta)]))
    assert zeta(pos, rho, theta, k) == terms


def test_single_agent_basis():
    consts = PhysicalConstants(40e6, 0.0)
    k = consts.wave_number
    rho = 2.0
    sw = Swarm.at_rest([1.0], [-k * rho], [[0.0, 0.0]])
    b = phasor_basis(sw, rho, 0.3, consts, 1e-3)
    assert b.u == pytest.approx([1.0], abs=1e-15)
    assert b.v == pytest.approx([0.0], abs=1e-15)

    sw.phase[:] = np.pi / 2 - k * rho
    b = phasor_basis(sw, rho, 0.3, consts, 1e-3)
    assert b.u == pytest.approx([0.0], abs=1e-15)
    assert b.v == pytest.approx([1.0], abs=1e-15)


def test_pythagorean_identity(rng, consts):
    sw = random_swarm(rng, gain_mode="rayleigh")
    for rho, theta in [(12.0, 0.1), (20.0, 2.5), (30.0, 5.9)]:
        b = phasor_basis(sw, rho, theta, consts, 1e-3)
        expected = (sw.gain * b.d ** (-consts.path_loss_exponent / 2)) ** 2
        np.testing.assert_allclose(b.u**2 + b.v**2, expected, rtol=1e-12)


def test_magnitude_examples(consts):
    one = Swarm.at_rest([1.0], [0.3], [[0.0, 0.0]])
    flat = PhysicalConstants(40e6, 0.0)
    assert af_magnitude([1.0], phasor_basis(one, 5.0, 1.0, flat, 1e-3)) == pytest.approx(1.0, rel=1e-15)

    pair = Swarm.at_rest([1.0, 1.0], [0.2, 0.2 + np.pi], [[1.0, 2.0], [1.0, 2.0]])
    assert af_magnitude(pair.amplitude, phasor_basis(pair, 9.0, 0.4, consts, 1e-3)) == pytest.approx(0.0, abs=1e-12)


def test_esla_coherent_peak():
    consts = PhysicalConstants(40e6, 0.0)
    lam, k = consts.wavelength, consts.wave_number
    a = binomial_taper(5)
    alpha = -np.pi / 2 * np.arange(5)
    pos = make_esla(5, lam / 2)
    theta = np.pi / 3
    oracle = sum(a[m] * np.exp(1j * (alpha[m] + k * (m - 2) * lam / 2 * np.cos(theta))) for m in range(5))
    assert abs(oracle) == pytest.approx(16.0, abs=1e-9)
    assert abs(far_field_af(a, alpha, pos, theta, k)) == pytest.approx(16.0, abs=1e-9)


def test_af_complex_examples(consts):
    k = consts.wave_number
    rho, theta = 10.0, 0.0
    sw = Swarm.at_rest([2.0], [0.0], [[0.0, 0.0]])
    sw.phase[:] = -zeta(sw.position[0], rho, theta, k)
    val = af_complex(sw, rho, theta, consts, 1e-3)
    assert val.real == pytest.approx(2.0 / rho, rel=1e-14)
    assert val.imag == pytest.approx(0.0, abs=1e-15)


def test_common_phase_rotates(rng, consts):
    sw = random_swarm(rng)
    base = af_complex(sw, 15.0, 1.2, consts, 1e-3)
    delta = 0.77
    sw.phase += delta
    rotated = af_complex(sw, 15.0, 1.2, consts, 1e-3)
    assert rotated == pytest.approx(base * np.exp(1j * delta), rel=1e-12)
    assert abs(rotated) == pytest.approx(abs(base), rel=1e-12)


def test_uv_matches_complex_exponential_vectorised(rng, consts):
    sw = random_swarm(rng, gain_mode="rayleigh")
    rho = rng.uniform(10, 30, 50)
    theta = rng.uniform(0, 2 * np.pi, 50)
    got = af_complex(sw, rho, theta, consts, 1e-3)
    want = np.array([complex_sum(sw, r, t, consts, 1e-3) for r, t in zip(rho, theta)])
    np.testing.assert_allclose(got, want, rtol=1e-12)


configs = st.tuples(
    st.integers(1, 8),
    st.integers(0, 2**32 - 1),
    st.floats(0.0, 3.0),
)


@settings(max_examples=60, deadline=None)
@given(configs, st.floats(-10, 10), st.just(0.0) | st.floats(1e-6, 10))
def test_magnitude_invariants(cfg, shift, scale):
    s, seed, mu = cfg
    rng = np.random.default_rng(seed)
    consts = PhysicalConstants(40e6, mu)
    sw = random_swarm(rng, s=s, gain_mode="rayleigh")
    rho, theta = rng.uniform(12, 25), rng.uniform(0, 2 * np.pi)
    b = phasor_basis(sw, rho, theta, consts, 1e-3)
    mag = af_magnitude(sw.amplitude, b)

    assert mag <= np.sum(sw.amplitude * sw.gain * b.d ** (-mu / 2)) * (1 + 1e-12)
    assert af_magnitude(scale * sw.amplitude, b) == pytest.approx(scale * mag, rel=1e-12, abs=1e-300)

    sw.phase += shift
    assert af_magnitude(sw.amplitude, phasor_basis(sw, rho, theta, consts, 1e-3)) == pytest.approx(mag, rel=1e-12)
    assert abs(complex_sum(sw, rho, theta, consts, 1e-3)) == pytest.approx(mag, rel=1e-12)


def test_clamped_distance_is_finite(consts):
    sw = Swarm.at_rest([1.0], [0.0], [[10.0, 0.0]])
    b = phasor_basis(sw, 10.0, 0.0, consts, 1e-3)
    assert b.clamped.all()
    assert np.isfinite(b.u).all() and np.isfinite(b.v).all()
