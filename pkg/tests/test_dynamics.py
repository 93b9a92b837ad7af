import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from shuttlesim.dynamics import (
    DEFAULT_DT,
    LaunchDistribution,
    QualificationError,
    ShuttleParams,
    ShuttleState,
    SimulationError,
    Trajectory,
    acceleration,
    aero_length_from_physical,
    drag_jacobian,
    find_crossing_in_trajectory,
    grid_substeps,
    propagate,
    retime_to_target,
    sample_launch,
    sample_launches,
    simulate,
    step_rk4,
    step_rk4_batch,
)

P = ShuttleParams()
NOMINAL = ShuttleState(0.0, [6.5, 0.0, 1.0], [-16.0, 0.0, 12.0])

launch_components = st.tuples(
    st.floats(6, 7), st.floats(-2, 2), st.floats(-0.5, 2.5),
    st.floats(-19, -13), st.floats(-3, 3), st.floats(9, 15),
)


def reference_solution(state, params, t_end):
    """Tight-tolerance adaptive integration, independent of the RK4 kernel."""
    g = np.array(params.gravity)

    def rhs(_, x):
        v = x[3:]
        return np.concatenate([v, g - np.linalg.norm(v) * v * params.inv_length])

    sol = solve_ivp(rhs, (state.t, t_end), np.concatenate([state.p, state.v]),
                    method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y[:, -1]


class TestParamsAndState:
    def test_rejects_non_positive_length_and_mass(self):
        with pytest.raises(ValueError):
            ShuttleParams(aero_length=0.0)
        with pytest.raises(ValueError):
            ShuttleParams(mass=-1.0)

    def test_infinite_length_disables_drag(self):
        params = ShuttleParams(aero_length=math.inf)
        assert params.inv_length == 0.0
        a = acceleration(ShuttleState(0, [0, 0, 0], [30, 0, 0]), params)
        np.testing.assert_array_equal(a, [0, 0, -9.81])

    def test_terminal_speed(self):
        assert P.terminal_speed == pytest.approx(math.sqrt(9.81 * 4.1))

    def test_state_is_immutable_and_validated(self):
        s = ShuttleState(0.0, [1, 2, 3], [4, 5, 6])
        with pytest.raises(ValueError):
            s.p[0] = 9.0
        with pytest.raises(ValueError):
            ShuttleState(0.0, [1, 2], [4, 5, 6])
        with pytest.raises(ValueError):
            ShuttleState(0.0, [1, 2, float("nan")], [4, 5, 6])

    def test_tuple_round_trip(self):
        assert ShuttleState.from_tuple(NOMINAL.t, NOMINAL.as_tuple()) == NOMINAL

    def test_aero_length_from_physical(self):
        assert aero_length_from_physical(0.005, 1.2, 0.0025, 0.8) == pytest.approx(2 * 0.005 / (1.2 * 0.0025 * 0.8))
        with pytest.raises(ValueError):
            aero_length_from_physical(0.005, 0.0, 0.0025, 0.8)
        assert aero_length_from_physical(0.005, 1.2, 0.0028, 0.72) == pytest.approx(4.134, abs=5e-4)


class TestAcceleration:
    def test_at_rest_is_gravity(self):
        np.testing.assert_array_equal(acceleration(ShuttleState(0, [0, 0, 0], [0, 0, 0]), P), [0, 0, -9.81])

    def test_terminal_fall_has_zero_acceleration(self):
        v_term = math.sqrt(9.81 * 4.1)
        a = acceleration(ShuttleState(0, [0, 0, 0], [0, 0, -v_term]), P)
        np.testing.assert_allclose(a, 0, atol=1e-12)

    def test_horizontal_example(self):
        a = acceleration(ShuttleState(0, [0, 0, 0], [10, 0, 0]), P)
        np.testing.assert_allclose(a, [-24.390, 0, -9.81], atol=5e-4)
        # cross-check against the velocity change over one tiny step
        h = 1e-6
        fd = (step_rk4(ShuttleState(0, [0, 0, 0], [10, 0, 0]), P, h).v - [10, 0, 0]) / h
        np.testing.assert_allclose(fd, a, rtol=1e-5)

    @settings(max_examples=60)
    @given(st.tuples(*[st.floats(-30, 30)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3))
    def test_drag_term_magnitude_and_direction(self, v):
        v = np.array(v)
        drag = acceleration(ShuttleState(0, [0, 0, 0], v), P) - np.array(P.gravity)
        speed = np.linalg.norm(v)
        assert np.linalg.norm(drag) == pytest.approx(speed ** 2 / 4.1, rel=1e-12)
        assert drag @ v == pytest.approx(-np.linalg.norm(drag) * speed, rel=1e-12)

    def test_drag_opposes_velocity(self):
        v = np.array([3.0, -4.0, 0.0])
        a = acceleration(ShuttleState(0, [0, 0, 0], v), ShuttleParams(gravity=(0, 0, 0)))
        np.testing.assert_allclose(a, -5.0 * v / 4.1)

    def test_jacobian_matches_finite_differences(self):
        v = np.array([-12.0, 1.5, 7.0])
        J = drag_jacobian(v, P)
        eps = 1e-6
        fd = np.empty((3, 3))
        for j in range(3):
            dv = np.zeros(3)
            dv[j] = eps
            ap = acceleration(ShuttleState(0, [0, 0, 0], v + dv), P)
            am = acceleration(ShuttleState(0, [0, 0, 0], v - dv), P)
            fd[:, j] = (ap - am) / (2 * eps)
        np.testing.assert_allclose(J, fd, atol=1e-8)

    def test_jacobian_zero_at_rest(self):
        np.testing.assert_array_equal(drag_jacobian([0, 0, 0], P), np.zeros((3, 3)))


class TestIntegrator:
    def test_drag_free_flight_is_exact(self):
        params = ShuttleParams(aero_length=math.inf)
        s = propagate(NOMINAL, params, 1.0)
        t = 1.0
        np.testing.assert_allclose(s.p, NOMINAL.p + NOMINAL.v * t + 0.5 * np.array([0, 0, -9.81]) * t**2, atol=1e-12)
        np.testing.assert_allclose(s.v, NOMINAL.v + np.array([0, 0, -9.81]) * t, atol=1e-12)

    def test_vertical_fall_matches_closed_form(self):
        # from rest: v = -vt tanh(g t / vt), z = z0 - L ln cosh(g t / vt)
        vt, g, L = P.terminal_speed, 9.81, 4.1
        start = ShuttleState(0.0, [0, 0, 50.0], [0, 0, 0])
        for t in (0.3, 1.0, 2.5):
            s = propagate(start, P, t)
            assert s.v[2] == pytest.approx(-vt * math.tanh(g * t / vt), abs=1e-9)
            assert s.p[2] == pytest.approx(50.0 - L * math.log(math.cosh(g * t / vt)), abs=1e-9)

    def test_matches_adaptive_reference(self):
        ref = reference_solution(NOMINAL, P, 1.2)
        s = propagate(NOMINAL, P, 1.2)
        np.testing.assert_allclose(np.concatenate([s.p, s.v]), ref, atol=1e-8)

    def test_fourth_order_convergence(self):
        ref = reference_solution(NOMINAL, P, 1.0)

        def err(dt):
            s = propagate(NOMINAL, P, 1.0, dt)
            return np.linalg.norm(np.concatenate([s.p, s.v]) - ref)

        ratio = err(1 / 100) / err(1 / 200)
        assert 14.0 < ratio < 18.0

    def test_drag_off_fall_from_rest(self):
        s = ShuttleState(0, [0, 0, 0], [0, 0, 0])
        params = ShuttleParams(aero_length=math.inf)
        for _ in range(600):
            s = step_rk4(s, params, DEFAULT_DT)
        assert s.p[2] == pytest.approx(-9.81 / 2, abs=1e-9)

    def test_terminal_velocity_is_fixed_point(self):
        v = [0, 0, -math.sqrt(9.81 * 4.1)]
        s = step_rk4(ShuttleState(0, [0, 0, 0], v), P, DEFAULT_DT)
        np.testing.assert_allclose(s.v, v, atol=1e-12)

    def test_step_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            step_rk4(NOMINAL, P, 0.0)

    def test_propagate_rejects_backwards(self):
        with pytest.raises(ValueError):
            propagate(NOMINAL, P, -0.1)

    def test_batch_kernel_matches_scalar(self):
        x = sample_launches(LaunchDistribution(), 20, 3)
        h = np.linspace(1e-4, 1 / 60, 20)
        out = step_rk4_batch(x, P, h)
        for i in range(20):
            s = step_rk4(ShuttleState.from_tuple(0.0, x[i]), P, h[i])
            np.testing.assert_allclose(out[i], s.as_tuple(), rtol=1e-13, atol=1e-13)

    def test_grid_substeps_anchor_to_absolute_grid(self):
        steps = grid_substeps(0.0031, 0.0102, 0.002)
        assert sum(steps) == pytest.approx(0.0102 - 0.0031)
        t = 0.0031 + np.cumsum(steps)
        np.testing.assert_allclose(t[:-1], [0.004, 0.006, 0.008, 0.010])

    def test_path_independence_on_grid(self):
        direct = propagate(NOMINAL, P, 0.7)
        split = propagate(propagate(NOMINAL, P, 0.3), P, 0.7)
        np.testing.assert_allclose(split.as_tuple(), direct.as_tuple(), rtol=0, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(launch_components)
    def test_mechanical_energy_never_increases(self, x):
        # dE/dt = -|v|^3 / L <= 0 for E = |v|^2 / 2 + g z
        traj = simulate(ShuttleState.from_tuple(0.0, x), P, 1 / 120, max_t=1.5)
        energy = 0.5 * np.sum(traj.v**2, axis=1) + 9.81 * traj.p[:, 2]
        assert np.all(np.diff(energy) <= 1e-9)

    @settings(max_examples=30, deadline=None)
    @given(launch_components)
    def test_speed_settles_toward_terminal(self, x):
        traj = simulate(ShuttleState.from_tuple(0.0, x), P, 1 / 60, max_t=8.0)
        assert np.linalg.norm(traj.v[-1]) == pytest.approx(P.terminal_speed, rel=0.01)


class TestSimulate:
    def test_requires_a_stop_condition(self):
        with pytest.raises(ValueError):
            simulate(NOMINAL, P)

    def test_stops_below_ground_while_descending(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        assert traj.p[-1, 2] < -0.1 and traj.p[-2, 2] >= -0.1
        assert traj.v[-1, 2] < 0

    def test_launch_below_ground_rises_first(self):
        low = ShuttleState(0.0, [6.5, 0.0, -0.4], [-16.0, 0.0, 12.0])
        traj = simulate(low, P, z_below=-0.1)
        assert len(traj) > 100 and traj.p[:, 2].max() > 1.5

    def test_max_t_is_absolute(self):
        traj = simulate(ShuttleState(0.5, NOMINAL.p, NOMINAL.v), P, max_t=0.6)
        assert traj.t[-1] == pytest.approx(0.6)

    def test_max_t_zero_gives_single_state(self):
        traj = simulate(NOMINAL, P, max_t=0.0)
        assert len(traj) == 1 and traj[0] == NOMINAL

    def test_upward_gravity_never_lands(self):
        with pytest.raises(SimulationError):
            simulate(NOMINAL, ShuttleParams(gravity=(0, 0, 9.81)), z_below=-0.1, max_steps=5000)

    @settings(max_examples=25)
    @given(launch_components)
    def test_speed_strictly_decreases_without_gravity(self, x):
        traj = simulate(ShuttleState.from_tuple(0.0, x), ShuttleParams(gravity=(0, 0, 0)), max_t=1.0)
        assert np.all(np.diff(np.linalg.norm(traj.v, axis=1)) < 0)

    def test_step_budget(self):
        with pytest.raises(SimulationError):
            simulate(NOMINAL, P, max_t=100.0, max_steps=10)

    def test_uniform_grid(self):
        traj = simulate(NOMINAL, P, max_t=1.0)
        np.testing.assert_allclose(np.diff(traj.t), DEFAULT_DT, atol=1e-12)


class TestTrajectory:
    def test_rejects_irregular_spacing(self):
        with pytest.raises(ValueError):
            Trajectory(0.1, [0.0, 0.1, 0.25], np.zeros((3, 3)), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            Trajectory(0.1, [0.0, 0.1, 0.1], np.zeros((3, 3)), np.zeros((3, 3)))

    def test_csv_round_trip(self, tmp_path):
        traj = simulate(NOMINAL, P, 1 / 120, max_t=0.5)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        back = Trajectory.from_csv(path)
        assert len(back) == len(traj)
        np.testing.assert_allclose(back.p, traj.p, rtol=1e-8)
        np.testing.assert_allclose(back.t, traj.t, atol=1e-9)

    def test_state_at_grid_point_is_exact(self):
        traj = simulate(NOMINAL, P, max_t=0.5)
        assert traj.state_at(traj.t[37]) == traj[37]

    def test_state_at_between_samples_is_accurate(self):
        traj = simulate(NOMINAL, P, 1 / 60, max_t=1.0)
        t = 0.4123
        s = traj.state_at(t)
        ref = propagate(NOMINAL, P, t, 1 / 6000)
        np.testing.assert_allclose(s.p, ref.p, atol=1e-5)

    def test_state_at_outside_span(self):
        traj = simulate(NOMINAL, P, max_t=0.5)
        with pytest.raises(ValueError):
            traj.state_at(0.6)

    def test_translated_and_shifted(self):
        traj = simulate(NOMINAL, P, max_t=0.1)
        moved = traj.translated([1, 2, 0]).shifted(0.5)
        np.testing.assert_allclose(moved.p - traj.p, np.tile([1, 2, 0], (len(traj), 1)))
        np.testing.assert_allclose(moved.t - traj.t, 0.5)


class TestCrossings:
    def brute_force_crossing(self, state, height):
        traj = simulate(state, P, 1e-5, z_below=height - 0.01)
        z = traj.p[:, 2]
        k = np.nonzero((z[:-1] > height) & (z[1:] <= height) & (traj.v[1:, 2] < 0))[0][0]
        return traj.t[k], traj.p[k]

    def test_sampled_crossing_matches_fine_step(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        c = find_crossing_in_trajectory(traj, 1.8)
        t_ref, p_ref = self.brute_force_crossing(NOMINAL, 1.8)
        assert c.t == pytest.approx(t_ref, abs=2e-5)
        np.testing.assert_allclose(c.p, p_ref, atol=2e-4)

    def test_nominal_crosses_near_court_centre(self):
        c = find_crossing_in_trajectory(simulate(NOMINAL, P, z_below=-0.1), 1.8)
        assert abs(c.p[0]) < 0.1 and abs(c.p[1]) < 1e-12

    def test_ascending_crossing(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        up = find_crossing_in_trajectory(traj, 1.8, descending=False)
        down = find_crossing_in_trajectory(traj, 1.8)
        assert up.t < down.t and up.v[2] > 0

    def test_no_crossing_returns_none(self):
        assert find_crossing_in_trajectory(simulate(NOMINAL, P, z_below=-0.1), 20.0) is None


class TestRetime:
    def test_crossing_lands_on_swing_time(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        out = retime_to_target(traj, 1.25, 2.0, base_height=0.5)
        c = find_crossing_in_trajectory(out, 1.75)
        assert c.t == pytest.approx(2.0, abs=1e-9)

    def test_pads_with_launch_state_from_zero(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        out = retime_to_target(traj, 1.25, 2.0, base_height=0.5)
        assert out.t[0] == pytest.approx(0.0, abs=traj.step)
        assert out.t[0] >= -1e-9
        pad = out.t < out.t[0] + 0.5
        np.testing.assert_array_equal(out.p[pad], np.tile(NOMINAL.p, (pad.sum(), 1)))

    def test_drops_samples_before_zero(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        out = retime_to_target(traj, 1.25, 0.5, base_height=0.5)
        assert out.t[0] >= -1e-9
        assert len(out) < len(traj)

    def test_already_on_time_is_identity(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        c = find_crossing_in_trajectory(traj, 1.75)
        assert retime_to_target(traj, 1.25, c.t, base_height=0.5) == traj

    def test_one_second_shift(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        c = find_crossing_in_trajectory(traj, 1.75)
        out = retime_to_target(traj, 1.25, c.t + 1.0, base_height=0.5)
        n_pad = len(out) - len(traj)
        assert n_pad == 600  # 1 s of padding at 600 Hz
        np.testing.assert_allclose(out.t[n_pad:], traj.t + 1.0, atol=1e-9)
        np.testing.assert_array_equal(out.p[n_pad:], traj.p)
        np.testing.assert_array_equal(out.p[:n_pad], np.tile(traj.p[0], (n_pad, 1)))

    @pytest.mark.parametrize("swing", [0.5, 1.1, 2.0])
    def test_idempotent(self, swing):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        once = retime_to_target(traj, 1.25, swing, base_height=0.5)
        assert retime_to_target(once, 1.25, swing, base_height=0.5) == once

    def test_unreachable_height(self):
        traj = simulate(NOMINAL, P, z_below=-0.1)
        with pytest.raises(QualificationError):
            retime_to_target(traj, 10.0, 1.0)


class TestLaunchSampling:
    def test_samples_within_bounds_and_seeded(self):
        d = LaunchDistribution()
        x = sample_launches(d, 500, 11)
        b = d.bounds
        assert np.all((x >= b[:, 0]) & (x <= b[:, 1]))
        np.testing.assert_array_equal(x, sample_launches(d, 500, 11))

    def test_single_sample(self):
        s = sample_launch(LaunchDistribution(), 5)
        assert s.t == 0.0 and 6 <= s.p[0] <= 7

    def test_degenerate_ranges_give_exact_state(self):
        d = LaunchDistribution((6.2, 6.2), (0.5, 0.5), (1.0, 1.0), (-15.0, -15.0), (1.0, 1.0), (11.0, 11.0))
        assert sample_launch(d, 3).as_tuple() == (6.2, 0.5, 1.0, -15.0, 1.0, 11.0)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError):
            LaunchDistribution(px=(7.0, 6.0))

    def test_mean(self):
        m = LaunchDistribution().mean()
        np.testing.assert_allclose(m.as_tuple(), [6.5, 0.0, 1.0, -16.0, 0.0, 12.0])
