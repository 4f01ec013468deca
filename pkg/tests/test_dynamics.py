import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from strhc import dynamics
from strhc.params import ControlInput, VehicleParams, VehicleState

P = VehicleParams()

finite = dict(allow_nan=False, allow_infinity=False)
states = st.tuples(
    st.floats(-100, 100, **finite), st.floats(-10, 10, **finite), st.floats(-0.3, 0.3, **finite),
    st.floats(1.0, 24.0, **finite), st.floats(-3, 3, **finite), st.floats(-2, 2, **finite))
# speeds where one RK4 step of at most 0.1 s is stable for the lateral tire modes
cruising = st.tuples(
    st.floats(-100, 100, **finite), st.floats(-10, 10, **finite), st.floats(-0.3, 0.3, **finite),
    st.floats(6.0, 24.0, **finite), st.floats(-3, 3, **finite), st.floats(-2, 2, **finite))
controls = st.tuples(st.floats(-3, 1.5, **finite), st.floats(-0.6, 0.6, **finite))


class TestTireForces:
    def test_zero_slip(self):
        assert dynamics.tire_forces((0, 0, 0, 10, 0, 0), (0, 0), P) == (0.0, 0.0)

    def test_front_steer(self):
        ff, _ = dynamics.tire_forces((0, 0, 0, 10, 0, 0), (0, 0.1), P)
        assert ff == pytest.approx(12891.6, abs=1e-9)

    def test_rear_lateral_velocity(self):
        _, fr = dynamics.tire_forces((0, 0, 0, 10, 1, 0), (0, 0), P)
        assert fr == pytest.approx(-8594.4, abs=1e-9)

    def test_speed_floor_clamps_denominator(self):
        slow = dynamics.tire_forces((0, 0, 0, 0.1, 1, 0), (0, 0), P)
        floor = dynamics.tire_forces((0, 0, 0, 0.5, 1, 0), (0, 0), P)
        assert slow == floor

    @given(states, controls, st.floats(-3, 3, **finite))
    def test_linear_in_slip_arguments(self, x, u, alpha):
        ff, fr = dynamics.tire_forces(x, u, P)
        xs = (x[0], x[1], x[2], x[3], alpha * x[4], alpha * x[5])
        ff2, fr2 = dynamics.tire_forces(xs, (u[0], alpha * u[1]), P)
        assert ff2 == pytest.approx(alpha * ff, rel=1e-9, abs=1e-6)
        assert fr2 == pytest.approx(alpha * fr, rel=1e-9, abs=1e-6)


class TestContinuousDynamics:
    def test_straight_coasting(self):
        np.testing.assert_allclose(dynamics.continuous_dynamics((0, 0, 0, 10, 0, 0), (0, 0), P),
                                   [10, 0, 0, 0, 0, 0], atol=1e-9)

    def test_heading_rotates_velocity(self):
        np.testing.assert_allclose(dynamics.continuous_dynamics((0, 0, math.pi / 2, 10, 0, 0), (0, 0), P),
                                   [0, 10, 0, 0, 0, 0], atol=1e-9)

    def test_acceleration_passes_through(self):
        np.testing.assert_allclose(dynamics.continuous_dynamics((0, 0, 0, 10, 0, 0), (1, 0), P),
                                   [10, 0, 0, 1, 0, 0], atol=1e-9)

    @given(states, controls)
    def test_matches_reference_model(self, x, u):
        np.testing.assert_allclose(dynamics.continuous_dynamics(x, u, P), oracles.f(list(x), list(u)),
                                   rtol=1e-12, atol=1e-9)

    @given(states, controls, st.floats(-math.pi, math.pi, **finite))
    def test_rotation_consistent(self, x, u, theta):
        c, s = math.cos(theta), math.sin(theta)
        rotated = (c * x[0] - s * x[1], s * x[0] + c * x[1], x[2] + theta, x[3], x[4], x[5])
        d0 = dynamics.continuous_dynamics(x, u, P)
        d1 = dynamics.continuous_dynamics(rotated, u, P)
        np.testing.assert_allclose(d1[:2], [c * d0[0] - s * d0[1], s * d0[0] + c * d0[1]], atol=1e-9)
        np.testing.assert_allclose(d1[2:], d0[2:], rtol=1e-12, atol=1e-9)

    @settings(max_examples=50)
    @given(states, controls)
    def test_jacobians_match_finite_differences(self, x, u):
        A, B = dynamics.dynamics_jacobians(x, u, P)
        x, u = np.array(x), np.array(u)
        eps = 1e-6
        for j in range(6):
            e = np.zeros(6)
            e[j] = eps
            fd = (dynamics.continuous_dynamics(x + e, u, P) - dynamics.continuous_dynamics(x - e, u, P)) / (2 * eps)
            np.testing.assert_allclose(A[:, j], fd, rtol=1e-5, atol=1e-4)
        for j in range(2):
            e = np.zeros(2)
            e[j] = eps
            fd = (dynamics.continuous_dynamics(x, u + e, P) - dynamics.continuous_dynamics(x, u - e, P)) / (2 * eps)
            np.testing.assert_allclose(B[:, j], fd, rtol=1e-5, atol=1e-4)


class TestRk4:
    def test_constant_derivative(self):
        x = dynamics.rk4_step((0, 0, 0, 10, 0, 0), (0, 0), 0.1, P)
        assert isinstance(x, VehicleState)
        np.testing.assert_allclose(x, [1.0, 0, 0, 10, 0, 0], atol=1e-9)

    def test_constant_acceleration_is_exact(self):
        x = dynamics.rk4_step((0, 0, 0, 10, 0, 0), (1, 0), 0.1, P)
        assert x.px == pytest.approx(1.005, abs=1e-9)
        assert x.v_lon == pytest.approx(10.1, abs=1e-9)

    @given(states, controls)
    def test_matches_reference_step(self, x, u):
        np.testing.assert_allclose(dynamics.rk4_step(x, u, 0.1, P), oracles.rk4(list(x), list(u), 0.1),
                                   rtol=1e-10, atol=1e-9)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            dynamics.rk4_step((0, 0, 0, 10, 0, 0), (0, 0), 0.0, P)

    def test_fourth_order_on_curve(self):
        x0 = oracles.settled_cornering_state()
        u = (0.0, 0.05)

        def err(dt):
            n = int(round(1.0 / dt))
            x = np.array(x0)
            for _ in range(n):
                x = np.array(dynamics.rk4_step(x, u, dt, P))
            ref = dynamics.shoot_interval(x0, u, 1.0, n * 100, P)
            return float(np.max(np.abs(x - np.array(ref))))

        ratio = err(0.1) / err(0.05)
        assert 12 <= ratio <= 20
        assert math.log2(ratio) >= 3.5


class TestShootInterval:
    def test_single_substep_is_rk4(self):
        x, u = (1, -2, 0.05, 12, 0.3, 0.1), (0.5, 0.05)
        assert dynamics.shoot_interval(x, u, 0.1, 1, P) == dynamics.rk4_step(x, u, 0.1, P)

    def test_substeps_irrelevant_when_coasting(self):
        x = (0, -2, 0, 10, 0, 0)
        np.testing.assert_allclose(dynamics.shoot_interval(x, (0, 0), 0.1, 4, P),
                                   dynamics.shoot_interval(x, (0, 0), 0.1, 1, P), atol=1e-12)

    def test_refinement_approaches_reference(self):
        x, u = (0, 0, 0, 15, 0, 0), (0, 0.1)
        ref = np.array(oracles.integrate(list(x), list(u), 0.001, 100))
        e1 = np.max(np.abs(np.array(dynamics.shoot_interval(x, u, 0.1, 1, P)) - ref))
        e4 = np.max(np.abs(np.array(dynamics.shoot_interval(x, u, 0.1, 4, P)) - ref))
        assert e4 < e1

    @given(cruising, controls, st.integers(1, 4), st.integers(1, 4))
    def test_flow_composition(self, x, u, a, b):
        Ts = 0.1
        whole = dynamics.shoot_interval(x, u, Ts, a + b, P)
        first = dynamics.shoot_interval(x, u, Ts * a / (a + b), a, P)
        split = dynamics.shoot_interval(first, u, Ts * b / (a + b), b, P)
        np.testing.assert_allclose(split, whole, rtol=1e-12, atol=1e-10)

    def test_rejects_zero_substeps(self):
        with pytest.raises(ValueError):
            dynamics.shoot_interval((0, 0, 0, 10, 0, 0), (0, 0), 0.1, 0, P)

    def test_returns_named_state(self):
        x = dynamics.shoot_interval(VehicleState(0, 0, 0, 10, 0, 0), ControlInput(0, 0), 0.1, 2, P)
        assert isinstance(x, VehicleState) and isinstance(x.px, float)


class TestRolloutSensitivities:
    def test_rollout_matches_repeated_shooting(self):
        rng = np.random.default_rng(1)
        U = np.column_stack([rng.uniform(-1, 1, 15), rng.uniform(-0.05, 0.05, 15)])
        x0 = np.array([0, -2, 0, 14, 0, 0.0])
        X = dynamics.rollout(x0, U, 0.1, 1, P.as_array())
        x = x0
        for k in range(15):
            x = np.array(dynamics.shoot_interval(x, U[k], 0.1, 1, P))
            np.testing.assert_allclose(X[k + 1], x, rtol=0, atol=0)

    def test_sensitivities_match_finite_differences(self):
        rng = np.random.default_rng(2)
        N = 8
        U = np.column_stack([rng.uniform(-1, 1, N), rng.uniform(-0.05, 0.05, N)])
        x0 = np.array([0, -2, 0.01, 14, 0.1, 0.02])
        X, S = dynamics.rollout_sens(x0, U, 0.1, 2, P.as_array())
        eps = 1e-6
        for j in range(2 * N):
            e = np.zeros(2 * N)
            e[j] = eps
            Xp = dynamics.rollout(x0, (U.ravel() + e).reshape(N, 2), 0.1, 2, P.as_array())
            Xm = dynamics.rollout(x0, (U.ravel() - e).reshape(N, 2), 0.1, 2, P.as_array())
            np.testing.assert_allclose(S[:, :, j], (Xp - Xm) / (2 * eps), rtol=1e-5, atol=1e-6)
