import numpy as np
import pytest

from beamflow.array_factor import af_magnitude, phasor_basis
from beamflow.dynamics import FlowState, fast_step, integrate, pattern_term, slow_step, stopping_rule
from beamflow.gradients import total_gradients
from beamflow.model import PhysicalConstants, SampleGrid, Swarm

from conftest import make_scenario, random_grid, random_swarm


def matched_grid(swarm, consts, grid, d_min):
    b = phasor_basis(swarm, grid.rho, grid.theta, consts, d_min)
    return grid.with_desired(af_magnitude(swarm.amplitude, b))


@pytest.fixture
def small(rng, consts):
    sw = random_swarm(rng, side=10.0)
    grid = random_grid(rng, consts, theta_count=12)
    return make_scenario(consts, sw, grid)


def test_matched_state_is_a_fixed_point(small):
    grid = matched_grid(small.swarm, small.constants, small.grid, small.d_min)
    sc = small.replace(grid=grid)
    st = FlowState(0.0, sc.swarm.copy())
    after = slow_step(fast_step(st, sc), sc)
    np.testing.assert_array_equal(after.swarm.amplitude, sc.swarm.amplitude)
    np.testing.assert_array_equal(after.swarm.phase, sc.swarm.phase)
    np.testing.assert_array_equal(after.swarm.position, sc.swarm.position)
    assert after.motion_term == 0.0


def test_integrate_matched_at_anchor_costs_nothing(small):
    sc = small.replace(grid=matched_grid(small.swarm, small.constants, small.grid, small.d_min), horizon=0.05)
    traj = integrate(sc)
    assert traj.stop_reason == "converged"
    assert traj.final.objective_history[-1][1].total == 0.0


def test_horizon_zero_gives_single_snapshot(small):
    traj = integrate(small.replace(horizon=0.0))
    assert len(traj.samples) == 1
    assert traj.stop_reason == "horizon"
    np.testing.assert_array_equal(traj.final.swarm.position, small.swarm.position)


def test_fast_steps_never_increase_residual(small):
    st = FlowState(0.0, small.swarm.copy())
    values = [pattern_term(st.swarm, small)]
    for _ in range(1000):
        st = fast_step(st, small)
        values.append(pattern_term(st.swarm, small))
    assert np.all(np.diff(values) <= 1e-12)
    assert values[-1] < values[0]
    np.testing.assert_array_equal(st.swarm.position, small.swarm.position)
    assert np.all(st.swarm.amplitude >= 0.0)


def test_fast_step_rk4_descends(small):
    sc = small.replace(method="rk4")
    st = FlowState(0.0, sc.swarm.copy())
    before = pattern_term(st.swarm, sc)
    for _ in range(50):
        st = fast_step(st, sc)
    assert pattern_term(st.swarm, sc) < before


def test_slow_step_stationary_at_anchor_with_zero_amplitude(small):
    sw = small.swarm.copy()
    sw.amplitude[:] = 0.0
    sc = small.replace(swarm=sw, grid=small.grid.with_desired(np.zeros(len(small.grid))))
    out = slow_step(FlowState(0.0, sw), sc)
    np.testing.assert_array_equal(out.swarm.position, sw.position)
    np.testing.assert_array_equal(out.swarm.motion_aux, 0.0)
    assert out.t == pytest.approx(sc.slow_step)


def test_slow_step_pulls_aux_toward_anchor(small):
    sw = small.swarm.copy()
    sw.amplitude[:] = 0.0
    delta = np.array([[0.3, -0.2]] * sw.size)
    sw.position = sw.anchor + delta
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    sc = make_scenario(small.constants, sw, small.grid.with_desired(np.zeros(len(small.grid))), S=S)
    out = slow_step(FlowState(0.0, sw), sc)
    np.testing.assert_allclose(out.swarm.motion_aux, -2 * sc.slow_step * delta @ S.T, rtol=1e-14)
    np.testing.assert_allclose(out.swarm.position, sw.position, rtol=1e-14)
    expected_motion = sc.slow_step * sw.size * float(delta[0] @ S @ delta[0])
    assert out.motion_term == pytest.approx(expected_motion, rel=1e-14)


def test_slow_step_euler_transcription(small):
    sw = small.swarm.copy()
    sw.motion_aux = np.full((sw.size, 2), 0.1)
    sw.position = sw.position + 0.05
    sc = small.replace(swarm=sw)
    g = total_gradients(sw, sc.grid, sc.constants, sc.d_min).g_r
    S = sc.penalties.matrices
    h = sc.slow_step
    r_exp = sw.position + h * (-g + sw.motion_aux)
    v_exp = sw.motion_aux + h * (-2.0 * np.einsum("mij,mj->mi", S, sw.position - sw.anchor))
    out = slow_step(FlowState(0.0, sw), sc)
    np.testing.assert_allclose(out.swarm.position, r_exp, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(out.swarm.motion_aux, v_exp, rtol=1e-14, atol=1e-14)
    np.testing.assert_array_equal(out.swarm.amplitude, sw.amplitude)


@pytest.mark.parametrize("sigma", [0.1, 1.0, 4.0])
def test_explicit_oscillator_energy_growth(sigma, consts):
    # with no pattern force, Euler on r' = v, v' = -2 sigma r grows
    # E = 2 sigma |r|^2 + |v|^2 by exactly (1 + 2 sigma h^2) per step
    sw = Swarm.at_rest([0.0], [0.0], [[0.0, 0.0]])
    sw.position = np.array([[0.5, -0.25]])
    grid = SampleGrid([10.0], [0.0], [0.0])
    sc = make_scenario(consts, sw, grid, S=sigma * np.eye(2))
    h = sc.slow_step

    def energy(s):
        r = s.position - s.anchor
        return 2 * sigma * float(np.sum(r * r)) + float(np.sum(s.motion_aux ** 2))

    st = FlowState(0.0, sw)
    e0 = energy(st.swarm)
    for n in range(1, 51):
        st = slow_step(st, sc)
        assert energy(st.swarm) == pytest.approx(e0 * (1 + 2 * sigma * h * h) ** n, rel=1e-12)


def test_stopping_rule(small):
    st = FlowState(0.0, small.swarm.copy())
    assert stopping_rule(st, small) is None
    st.t = small.horizon
    assert stopping_rule(st, small) == "horizon"
    matched = small.replace(grid=matched_grid(small.swarm, small.constants, small.grid, small.d_min))
    assert stopping_rule(FlowState(0.0, small.swarm.copy()), matched) == "converged"
    moving = FlowState(0.0, small.swarm.copy())
    moving.swarm.motion_aux[0] = [1.0, 0.0]
    assert stopping_rule(moving, matched) is None


def test_integrate_deterministic_and_decreasing(small):
    sc = small.replace(horizon=0.05, stride=2)
    t1 = integrate(sc)
    t2 = integrate(sc)
    np.testing.assert_array_equal(t1.final.swarm.position, t2.final.swarm.position)
    np.testing.assert_array_equal(t1.final.swarm.phase, t2.final.swarm.phase)
    assert t1.final.slow_steps == 5
    assert t1.final.fast_steps == 5 * sc.fast_steps_per_slow
    assert [s.t for s in t1.samples] == pytest.approx([0.0, 0.02, 0.04, 0.05])
    hist = [v.pattern_term for _, v in t1.final.objective_history]
    assert hist[-1] < hist[0]
    assert len(t1.final.separation_history) == 5


def test_integrate_rk4_smoke(small):
    traj = integrate(small.replace(horizon=0.02, method="rk4"))
    hist = [v.pattern_term for _, v in traj.final.objective_history]
    assert hist[-1] < hist[0]
    assert np.all(np.isfinite(traj.final.swarm.position))


def test_default_step_ratio(small):
    assert small.h_fast == pytest.approx(small.epsilon * small.slow_step / 10)
    assert small.fast_steps_per_slow == 1000
