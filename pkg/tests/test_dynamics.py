"""Rigid-body dynamics: vector field, integrator, and rotation utilities."""

import numpy as np
import pytest

from quadsafe.dynamics import (
    ControlInput,
    NonFiniteState,
    QuadParams,
    QuadState,
    R_of_euler,
    deriv,
    euler_of_R,
    project_to_rotation,
    skew,
    step,
)


def random_state(rng, angle_scale=0.5):
    return QuadState(
        r=rng.normal(size=3),
        R=R_of_euler(*rng.uniform(-angle_scale, angle_scale, size=3)),
        v=rng.normal(size=3),
        omega=rng.normal(size=3),
    )


class TestParams:
    def test_defaults_match_physical_platform(self):
        p = QuadParams()
        assert p.g == 9.81 and p.m == 0.45
        assert p.Ix == p.Iy == 0.091 and p.Iz == 0.182
        assert p.f_max == 36.0 and p.tau_max == (20.0, 20.0)

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            QuadParams(m=0.0)

    def test_rejects_thrust_below_hover(self):
        with pytest.raises(ValueError):
            QuadParams(f_max=0.45 * 9.81 * 0.5)


class TestStateValidation:
    def test_default_state_is_valid(self):
        QuadState().validate()

    def test_rejects_non_rotation(self):
        s = QuadState(R=np.eye(3) * 1.1)
        with pytest.raises(ValueError):
            s.validate()

    def test_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            QuadState(R=R).validate()


class TestSkew:
    def test_matches_cross_product(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            w, x = rng.normal(size=3), rng.normal(size=3)
            assert np.allclose(skew(w) @ x, np.cross(w, x))

    def test_antisymmetric(self):
        S = skew(np.array([1.0, -2.0, 3.0]))
        assert np.allclose(S, -S.T)


class TestVectorField:
    def test_free_fall_accelerates_along_world_z(self):
        # Sign convention: vdot = g z_w - R z_w f/m, so zero thrust gives +g.
        p = QuadParams()
        d = deriv(QuadState(), ControlInput(f=0.0, tau=np.zeros(3)), p)
        assert np.allclose(d.v_dot, [0.0, 0.0, p.g])

    def test_hover_thrust_cancels_gravity(self):
        p = QuadParams()
        d = deriv(QuadState(), ControlInput(f=p.m * p.g, tau=np.zeros(3)), p)
        assert np.allclose(d.v_dot, 0.0, atol=1e-12)
        assert np.allclose(d.R_dot, 0.0)
        assert np.allclose(d.omega_dot, 0.0)

    def test_tilt_produces_lateral_acceleration(self):
        p = QuadParams()
        theta = 0.3
        s = QuadState(R=R_of_euler(0.0, theta, 0.0))
        d = deriv(s, ControlInput(f=p.m * p.g, tau=np.zeros(3)), p)
        # Pitch forward: thrust axis tips, x picks up -R13 f/m.
        assert d.v_dot[0] == pytest.approx(-np.sin(theta) * p.g, rel=1e-12)

    def test_torque_maps_through_inertia(self):
        p = QuadParams()
        tau = np.array([0.5, -0.3, 0.2])
        d = deriv(QuadState(), ControlInput(f=0.0, tau=tau), p)
        assert np.allclose(d.omega_dot, tau / np.array([p.Ix, p.Iy, p.Iz]))

    def test_gyroscopic_coupling(self):
        p = QuadParams()
        w = np.array([1.0, 2.0, 3.0])
        d = deriv(QuadState(omega=w), ControlInput(f=0.0, tau=np.zeros(3)), p)
        Iw = np.array([p.Ix, p.Iy, p.Iz]) * w
        expected = -np.cross(w, Iw) / np.array([p.Ix, p.Iy, p.Iz])
        assert np.allclose(d.omega_dot, expected)


class TestStep:
    def test_rotation_stays_orthonormal(self):
        p = QuadParams()
        s = QuadState(omega=np.array([2.0, -1.5, 1.0]))
        u = ControlInput(f=p.m * p.g, tau=np.array([0.3, -0.2, 0.1]))
        for _ in range(500):
            s = step(s, u, p, 1e-3)
        assert np.allclose(s.R @ s.R.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(s.R) == pytest.approx(1.0, abs=1e-9)

    def test_fourth_order_convergence(self):
        # Halving dt should shrink the one-interval error by about 2^4.
        p = QuadParams()
        rng = np.random.default_rng(3)
        s0 = random_state(rng)
        u = ControlInput(f=5.0, tau=np.array([0.4, -0.6, 0.2]))

        def integrate(n, dt):
            s = s0
            for _ in range(n):
                s = step(s, u, p, dt)
            return s

        ref = integrate(256, 0.04 / 256)
        errs = []
        for n in (2, 4):
            s = integrate(n, 0.04 / n)
            errs.append(
                np.linalg.norm(s.v - ref.v) + np.linalg.norm(s.r - ref.r)
                + np.linalg.norm(s.omega - ref.omega)
            )
        assert errs[1] < errs[0] / 10.0

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            step(QuadState(), ControlInput(f=1.0, tau=np.zeros(3)), QuadParams(), 0.0)

    def test_nonfinite_input_raises(self):
        u = ControlInput(f=float("inf"), tau=np.zeros(3))
        with np.errstate(invalid="ignore"), pytest.raises(NonFiniteState):
            step(QuadState(), u, QuadParams(), 1e-3)


class TestRotationUtilities:
    def test_project_returns_rotation(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            R = R_of_euler(*rng.uniform(-1, 1, size=3)) + 1e-3 * rng.normal(size=(3, 3))
            Q = project_to_rotation(R)
            assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(Q) == pytest.approx(1.0, abs=1e-12)

    def test_project_fixes_rotations(self):
        R = R_of_euler(0.3, -0.4, 1.2)
        assert np.allclose(project_to_rotation(R), R, atol=1e-12)

    def test_euler_roundtrip(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            phi, theta, psi = rng.uniform(-1.4, 1.4), rng.uniform(-1.4, 1.4), rng.uniform(-3.1, 3.1)
            R = R_of_euler(phi, theta, psi)
            phi2, theta2, psi2 = euler_of_R(R)
            assert np.allclose(R_of_euler(phi2, theta2, psi2), R, atol=1e-9)

    def test_euler_gimbal_branch(self):
        R = R_of_euler(0.0, np.pi / 2, 0.0)
        phi, theta, psi = euler_of_R(R)
        assert theta == pytest.approx(np.pi / 2, abs=1e-6)
        assert np.isfinite(phi) and np.isfinite(psi)
