"""Tests for quadrotor dynamics, the mixer and the flatness maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from raceplan.errors import SingularFlatness
from raceplan.model import (
    FlatSample, QuadParams, QuadState, RotorThrusts, constraint_residuals,
    dynamics, flat_to_control, flat_to_state, mixer_forward, mixer_inverse,
    quat_to_rotation,
)
from raceplan.spline import BoundaryCondition, construct

IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


def _smooth_sample(rng, accel_scale=3.0):
    """Random flat sample with a clearly non-singular thrust direction."""
    d = np.zeros((5, 4))
    d[0, :3] = rng.normal(size=3)
    d[1, :3] = rng.normal(size=3)
    d[2, :3] = rng.normal(scale=accel_scale, size=3)
    d[3, :3] = rng.normal(scale=accel_scale, size=3)
    d[4, :3] = rng.normal(scale=accel_scale, size=3)
    d[0, 3] = rng.uniform(-1.0, 1.0)
    d[1, 3] = rng.uniform(-1.0, 1.0)
    d[2, 3] = rng.uniform(-1.0, 1.0)
    return FlatSample(d)


class TestQuadParams:
    def test_table_presets(self):
        qa = QuadParams.quad_a()
        assert qa.mass == 0.85
        assert np.allclose(qa.inertia_diag, [1e-3, 1e-3, 1.7e-3])
        qb = QuadParams.quad_b()
        assert qb.f_max == 6.375
        assert np.allclose(qb.omega_max, [8.0, 8.0, 3.0])

    @pytest.mark.parametrize("bad", [
        dict(mass=-1.0),
        dict(arm_length=0.0),
        dict(inertia_diag=[1e-3, -1e-3, 1e-3]),
        dict(torque_const=0.0),
        dict(f_min=-0.1),
        dict(f_min=7.0),           # f_min >= f_max
        dict(omega_max=[1.0, 0.0, 1.0]),
        dict(mass=5.0),            # hover infeasible with quad_a thrust
    ])
    def test_invalid_params_rejected(self, bad):
        base = dict(
            mass=0.85, arm_length=0.15, inertia_diag=[1e-3, 1e-3, 1.7e-3],
            torque_const=0.05, f_min=0.0, f_max=6.88,
            omega_max=[15.0, 15.0, 3.0],
        )
        base.update(bad)
        with pytest.raises(ValueError):
            QuadParams(**base)


class TestDynamics:
    def test_hover_equilibrium(self, quad_a):
        f_hover = quad_a.mass * 9.81 / 4.0
        state = QuadState(position=[0, 0, 1], attitude=IDENTITY_Q,
                          velocity=[0, 0, 0], body_rate=[0, 0, 0])
        xdot = dynamics(state, RotorThrusts([f_hover] * 4), quad_a)
        assert np.allclose(xdot, 0.0, atol=1e-12)

    def test_equal_thrusts_give_zero_torque(self, quad_a):
        state = QuadState(position=[0, 0, 0], attitude=IDENTITY_Q,
                          velocity=[0, 0, 0], body_rate=[0, 0, 0])
        for f in (0.5, 2.0, 6.0):
            xdot = dynamics(state, RotorThrusts([f] * 4), quad_a)
            assert np.allclose(xdot[10:13], 0.0, atol=1e-12)

    def test_free_fall(self, quad_a):
        state = QuadState(position=[0, 0, 10], attitude=IDENTITY_Q,
                          velocity=[1, 2, 3], body_rate=[0, 0, 0])
        xdot = dynamics(state, RotorThrusts([0, 0, 0, 0]), quad_a)
        assert np.allclose(xdot[7:10], [0, 0, -9.81])
        assert np.allclose(xdot[0:3], [1, 2, 3])


class TestMixer:
    def test_symmetric_hover(self, quad_a):
        thrust, torque = mixer_forward(RotorThrusts([1, 1, 1, 1]), quad_a)
        assert thrust == pytest.approx(4.0)
        assert np.allclose(torque, 0.0)

    def test_roll_pair(self, quad_a):
        _, torque = mixer_forward(RotorThrusts([1, 1, 0, 0]), quad_a)
        assert torque[0] == pytest.approx(0.3)

    def test_yaw_pair(self, quad_a):
        _, torque = mixer_forward(RotorThrusts([1, 0, 1, 0]), quad_a)
        assert torque[2] == pytest.approx(0.1)

    def test_inverse_hover(self, quad_a):
        u = mixer_inverse(4.0, [0, 0, 0], quad_a)
        assert np.allclose(u.f, 1.0, atol=1e-12)
        u = mixer_inverse(0.85 * 9.81, [0, 0, 0], quad_a)
        assert np.allclose(u.f, 2.0846250, atol=1e-6)

    def test_round_trip(self, quad_a):
        rng = np.random.default_rng(0)
        for _ in range(100):
            thrust = rng.uniform(0.1, 25.0)
            torque = rng.normal(scale=0.5, size=3)
            back_thrust, back_torque = mixer_forward(
                mixer_inverse(thrust, torque, quad_a), quad_a
            )
            assert back_thrust == pytest.approx(thrust, rel=1e-12)
            assert np.allclose(back_torque, torque, rtol=1e-12, atol=1e-14)

    @given(f=arrays(np.float64, 4, elements=st.floats(0.0, 10.0)))
    @settings(max_examples=50, deadline=None)
    def test_forward_then_inverse(self, f):
        quad = QuadParams.quad_a()
        thrust, torque = mixer_forward(RotorThrusts(f), quad)
        back = mixer_inverse(thrust, torque, quad)
        assert np.allclose(back.f, f, atol=1e-10)


class TestFlatToState:
    def test_rest_sample(self, quad_a):
        state = flat_to_state(FlatSample.rest([1.0, 2.0, 3.0]), quad_a)
        assert np.allclose(state.position, [1, 2, 3])
        assert np.allclose(state.attitude, IDENTITY_Q, atol=1e-12)
        assert np.allclose(state.body_rate, 0.0, atol=1e-12)

    def test_pure_yaw(self, quad_a):
        state = flat_to_state(FlatSample.rest([0, 0, 0], yaw=np.pi / 2), quad_a)
        expected = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])
        assert np.allclose(state.attitude, expected, atol=1e-12)
        assert np.allclose(state.body_rate, 0.0, atol=1e-12)

    def test_body_z_parallel_to_thrust(self, quad_a):
        rng = np.random.default_rng(7)
        for _ in range(50):
            sample = _smooth_sample(rng)
            state = flat_to_state(sample, quad_a)
            rot = quat_to_rotation(state.attitude)
            thrust_dir = sample.derivatives[2, :3] - quad_a.gravity
            thrust_dir /= np.linalg.norm(thrust_dir)
            assert np.allclose(rot[:, 2], thrust_dir, atol=1e-10)

    def test_body_rates_match_attitude_derivative(self, quad_a):
        """omega from the flat map equals the finite-difference rate of the
        attitude along a smooth analytic flat trajectory."""
        rng = np.random.default_rng(3)
        coef = rng.normal(scale=0.4, size=(6, 4))  # quintic flat trajectory

        def sample_at(t):
            from numpy.polynomial import polynomial as poly

            d = np.zeros((5, 4))
            for dim in range(4):
                for order in range(5):
                    d[order, dim] = poly.polyval(t, poly.polyder(coef[:, dim], order))
            return FlatSample(d)

        h = 1e-5
        for t in (0.2, 0.5, 0.9):
            state = flat_to_state(sample_at(t), quad_a)
            r_minus = quat_to_rotation(flat_to_state(sample_at(t - h), quad_a).attitude)
            r_plus = quat_to_rotation(flat_to_state(sample_at(t + h), quad_a).attitude)
            rot = quat_to_rotation(state.attitude)
            omega_hat = rot.T @ (r_plus - r_minus) / (2 * h)  # skew(omega)
            omega_fd = np.array([omega_hat[2, 1], omega_hat[0, 2], omega_hat[1, 0]])
            assert np.allclose(state.body_rate, omega_fd, atol=1e-4)

    def test_free_fall_is_singular(self, quad_a):
        d = np.zeros((5, 4))
        d[2, :3] = quad_a.gravity  # free fall: thrust direction undefined
        with pytest.raises(SingularFlatness):
            flat_to_state(FlatSample(d), quad_a)


class TestFlatToControl:
    def test_hover_thrusts(self, quad_a):
        u = flat_to_control(FlatSample.rest([0, 0, 1]), quad_a)
        assert np.allclose(u.f, 2.0846250, atol=1e-5)

    def test_vertical_acceleration(self, quad_a):
        d = np.zeros((5, 4))
        d[2, 2] = 1.0
        u = flat_to_control(FlatSample(d), quad_a)
        assert np.allclose(u.f, 0.85 * 10.81 / 4.0, atol=1e-5)

    def test_quaternion_norm_preserved(self, quad_a):
        rng = np.random.default_rng(11)
        for _ in range(20):
            state = flat_to_state(_smooth_sample(rng), quad_a)
            assert abs(np.linalg.norm(state.attitude) - 1.0) < 1e-9


class TestConstraintResiduals:
    def test_hover_strictly_feasible(self, quad_a):
        res = constraint_residuals(FlatSample.rest([0, 0, 1]), quad_a)
        assert res.shape == (14,)
        assert np.all(res < 0)

    def test_excess_collective_thrust_violates(self, quad_a):
        d = np.zeros((5, 4))
        d[2, 2] = 4 * quad_a.f_max / quad_a.mass  # F = m*(a+g) > 4 f_max
        res = constraint_residuals(FlatSample(d), quad_a)
        assert np.max(res[:8]) > 0

    def test_boundary_thrust_residual_is_zero(self, quad_a):
        # Vertical acceleration chosen so each rotor sits exactly at f_max.
        a_z = 4 * quad_a.f_max / quad_a.mass - 9.81
        d = np.zeros((5, 4))
        d[2, 2] = a_z
        res = constraint_residuals(FlatSample(d), quad_a)
        assert np.max(np.abs(res[1:8:2])) < 1e-10

    def test_continuity_probe(self, quad_a):
        """Residuals change smoothly along a line in sample space."""
        rng = np.random.default_rng(4)
        base = _smooth_sample(rng).derivatives
        direction = rng.normal(size=base.shape)
        thetas = np.linspace(0.0, 1e-3, 11)
        values = np.array([
            constraint_residuals(FlatSample(base + t * direction), quad_a)
            for t in thetas
        ])
        steps = np.abs(np.diff(values, axis=0))
        assert np.max(steps) < 1e-2  # no jumps at this probe resolution


class TestFlatnessDynamicsConsistency:
    def test_open_loop_rk4_tracks_flat_trajectory(self, quad_a):
        from conftest import rk4_rollout

        bc0 = BoundaryCondition.hover([0.0, 0.0, 1.0])
        bcf = BoundaryCondition.hover([3.0, 1.0, 2.0])
        waypoints = np.array([[1.5, 1.2, 1.3, 0.0]])
        traj = construct(waypoints, [1.3, 1.4], bc0, bcf)
        _, positions, reference = rk4_rollout(traj, quad_a, t0=0.4,
                                              duration=0.5)
        err = np.linalg.norm(positions - reference, axis=1)
        assert np.max(err) < 1e-3
