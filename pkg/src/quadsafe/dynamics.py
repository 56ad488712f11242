"""Rigid-body quadrotor dynamics on SE(3) with a fixed-step RK4 integrator.

State is (position r, rotation R, inertial velocity v, body rates omega).
Attitude is kept as a rotation matrix and re-orthonormalized by polar
projection after every step; Euler angles are a derived view only.

Sign convention: translational acceleration is g*z_w - R*z_w*f/m, so the
free-fall acceleration is +g along the world z axis and hover requires
f = m*g/R33.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_Z_W = np.array([0.0, 0.0, 1.0])


class NonFiniteState(RuntimeError):
    """Raised when an integration step produces NaN or Inf."""


@dataclass(frozen=True)
class QuadParams:
    """Physical parameters of the quadrotor (defaults: desk-scale platform)."""

    g: float = 9.81          # m/s^2
    m: float = 0.45          # kg
    Ix: float = 0.091        # kg m^2
    Iy: float = 0.091        # kg m^2
    Iz: float = 0.182        # kg m^2
    f_max: float = 36.0      # N, total thrust bound
    tau_max: tuple[float, float] = (20.0, 20.0)  # N m, bounds about x_B, y_B
    # Geometry/motor constants, carried for completeness; unused by the
    # total-thrust/moment interface.
    L: float = 0.24
    k_f: float = 0.88
    k_w: float = 1.00

    def __post_init__(self) -> None:
        for name in ("g", "m", "Ix", "Iy", "Iz"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.f_max < 0.0 or min(self.tau_max) < 0.0:
            raise ValueError("actuator bounds must be nonnegative")
        if self.f_max <= self.m * self.g:
            raise ValueError("f_max must exceed hover thrust m*g")

    @property
    def inertia(self) -> np.ndarray:
        return np.diag([self.Ix, self.Iy, self.Iz])


@dataclass(frozen=True)
class QuadState:
    """Full rigid-body state: r [m], R (body-to-world), v [m/s], omega [rad/s]."""

    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def validate(self, tol: float = 1e-9) -> None:
        for arr in (self.r, self.R, self.v, self.omega):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteState("non-finite state field")
        err = np.max(np.abs(self.R.T @ self.R - np.eye(3)))
        if err > tol:
            raise ValueError(f"R not orthonormal: max |R'R - I| = {err:.3e}")
        if abs(np.linalg.det(self.R) - 1.0) > tol:
            raise ValueError("det(R) != 1")


@dataclass(frozen=True)
class ControlInput:
    """Total thrust f [N] and body moments tau [N m]."""

    f: float
    tau: np.ndarray


@dataclass(frozen=True)
class StateDerivative:
    r_dot: np.ndarray
    R_dot: np.ndarray
    v_dot: np.ndarray
    omega_dot: np.ndarray


def skew(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that skew(w) @ x == cross(w, x)."""
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def deriv(state: QuadState, u: ControlInput, params: QuadParams) -> StateDerivative:
    """Continuous-time dynamics: rdot=v, vdot=g*z_w - R z_w f/m, Rdot=R[w]x,
    wdot = I^-1 (tau - w x I w)."""
    R = state.R
    w = state.omega
    v_dot = params.g * _Z_W - R[:, 2] * (u.f / params.m)
    R_dot = R @ skew(w)
    gyro = np.array([
        (params.Iz - params.Iy) * w[1] * w[2],
        (params.Ix - params.Iz) * w[0] * w[2],
        (params.Iy - params.Ix) * w[0] * w[1],
    ])
    w_dot = (u.tau - gyro) / np.array([params.Ix, params.Iy, params.Iz])
    return StateDerivative(state.v.copy(), R_dot, v_dot, w_dot)


def _pack(state: QuadState) -> np.ndarray:
    return np.concatenate([state.r, state.R.ravel(), state.v, state.omega])


def _unpack(x: np.ndarray) -> QuadState:
    return QuadState(r=x[:3], R=x[3:12].reshape(3, 3), v=x[12:15], omega=x[15:18])


def _deriv_flat(x: np.ndarray, u: ControlInput, params: QuadParams) -> np.ndarray:
    # Hot path (4 calls per RK4 step): scalar arithmetic, no np.cross.
    R = x[3:12].reshape(3, 3)
    p, q, r = x[15], x[16], x[17]
    out = np.empty(18)
    out[:3] = x[12:15]
    out[3:12:3] = R[:, 1] * r - R[:, 2] * q
    out[4:12:3] = R[:, 2] * p - R[:, 0] * r
    out[5:12:3] = R[:, 0] * q - R[:, 1] * p
    fm = u.f / params.m
    out[12] = -R[0, 2] * fm
    out[13] = -R[1, 2] * fm
    out[14] = params.g - R[2, 2] * fm
    Ix, Iy, Iz = params.Ix, params.Iy, params.Iz
    tau = u.tau
    out[15] = (tau[0] - (Iz - Iy) * q * r) / Ix
    out[16] = (tau[1] - (Ix - Iz) * p * r) / Iy
    out[17] = (tau[2] - (Iy - Ix) * p * q) / Iz
    return out


def project_to_rotation(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar projection via SVD)."""
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0.0:
        U = U.copy()
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


def step(state: QuadState, u: ControlInput, params: QuadParams, dt: float) -> QuadState:
    """One classical RK4 step under zero-order-hold input; R re-projected to SO(3)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x0 = _pack(state)
    k1 = _deriv_flat(x0, u, params)
    k2 = _deriv_flat(x0 + 0.5 * dt * k1, u, params)
    k3 = _deriv_flat(x0 + 0.5 * dt * k2, u, params)
    k4 = _deriv_flat(x0 + dt * k3, u, params)
    x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x1)):
        raise NonFiniteState("integration produced non-finite values")
    new = _unpack(x1)
    return QuadState(r=new.r, R=project_to_rotation(new.R), v=new.v, omega=new.omega)


_GIMBAL_TOL = 1.0 - 1e-9


def euler_of_R(R: np.ndarray) -> tuple[float, float, float]:
    """Z-Y-X Euler angles (roll phi, pitch theta, yaw psi) of R = Rz Ry Rx.

    Near the pitch singularity (|R31| -> 1) the roll/yaw split is ambiguous;
    roll is set to zero and yaw absorbs the remaining in-plane rotation.
    """
    r31 = float(np.clip(R[2, 0], -1.0, 1.0))
    if abs(r31) > _GIMBAL_TOL:
        theta = -np.copysign(np.pi / 2.0, r31)
        phi = 0.0
        psi = float(np.arctan2(-R[0, 1], R[1, 1]))
        return phi, theta, psi
    theta = float(-np.arcsin(r31))
    phi = float(np.arctan2(R[2, 1], R[2, 2]))
    psi = float(np.arctan2(R[1, 0], R[0, 0]))
    return phi, theta, psi


def R_of_euler(phi: float, theta: float, psi: float) -> np.ndarray:
    """Rotation matrix Rz(psi) Ry(theta) Rx(phi)."""
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    Rx = np.array([[1, 0, 0], [0, cf, -sf], [0, sf, cf]])
    Ry = np.array([[ct, 0, st], [0, 1, 0], [-st, 0, ct]])
    Rz = np.array([[cp, -sp, 0], [sp, cp, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx
