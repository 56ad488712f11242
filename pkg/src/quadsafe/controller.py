"""Nominal cascaded flight controller.

Position loop -> commanded accelerations and thrust; attitude loop ->
commanded body rates via first-order regulation of the R13/R23 entries;
body-rate loop -> nominal moments by inverting the Euler equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import QuadParams, QuadState, euler_of_R

R33_MIN = 0.2
SIN_THETA_MAX = 0.9
THRUST_FLOOR_FRAC = 0.05  # of hover thrust, for attitude inversion


class AttitudeSingular(ValueError):
    """R33 too small to invert the thrust/attitude relation."""


class ThrustTooSmall(ValueError):
    """Applied thrust too small to back out commanded tilt entries."""


@dataclass(frozen=True)
class ControllerGains:
    Kp: np.ndarray = field(default_factory=lambda: np.array([8.0, 8.0, 12.0]))
    Kd: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 7.0]))
    k_R: float = 8.0
    k_psi: float = 2.0
    k_omega: np.ndarray = field(default_factory=lambda: np.array([25.0, 25.0, 10.0]))

    def __post_init__(self) -> None:
        # Kp = 0 on an axis gives pure velocity tracking there, which the
        # velocity-barrier scenarios rely on; only negative gains are invalid.
        if (
            np.any(self.Kp < 0)
            or np.any(self.Kd < 0)
            or self.k_R <= 0
            or self.k_psi <= 0
            or np.any(self.k_omega <= 0)
        ):
            raise ValueError("controller gains must be nonnegative")


@dataclass(frozen=True)
class Reference:
    r_d: np.ndarray
    v_d: np.ndarray
    a_d: np.ndarray
    psi_d: float = 0.0


@dataclass(frozen=True)
class NominalCommand:
    f_hat: float
    tau_hat: np.ndarray
    r_ddot_cmd: np.ndarray
    omega_cmd: np.ndarray


def position_loop(state: QuadState, ref: Reference, gains: ControllerGains) -> np.ndarray:
    """Commanded acceleration: feedforward plus PD on (desired - actual)."""
    return ref.a_d + gains.Kp * (ref.r_d - state.r) + gains.Kd * (ref.v_d - state.v)


def thrust_from_accel(z_ddot_cmd: float, R33: float, params: QuadParams) -> float:
    """Nominal thrust f = (m/R33)(g - z_ddot_cmd), clamped to [0, f_max]."""
    if R33 < R33_MIN:
        raise AttitudeSingular(f"R33 = {R33:.3f} below {R33_MIN}")
    f = (params.m / R33) * (params.g - z_ddot_cmd)
    return min(max(f, 0.0), params.f_max)


def attitude_loop(
    state: QuadState,
    r_ddot_cmd: np.ndarray,
    f: float,
    psi_d: float,
    gains: ControllerGains,
    params: QuadParams,
) -> np.ndarray:
    """Commanded body rates [p_cmd, q_cmd, r_cmd].

    Lateral: commanded R13/R23 from inverting the translational dynamics
    (xddot = -R13 f/m), regulated first-order with gain k_R, then mapped to
    (p, q) through W/R33. Yaw: proportional on the wrapped heading error.
    """
    R = state.R
    R33 = R[2, 2]
    if R33 < R33_MIN:
        raise AttitudeSingular(f"R33 = {R33:.3f} below {R33_MIN}")
    f_min = THRUST_FLOOR_FRAC * params.m * params.g
    if f < f_min:
        raise ThrustTooSmall(f"f = {f:.3f} N below attitude-inversion floor")
    R13_cmd = min(max(-r_ddot_cmd[0] * params.m / f, -SIN_THETA_MAX), SIN_THETA_MAX)
    R23_cmd = min(max(-r_ddot_cmd[1] * params.m / f, -SIN_THETA_MAX), SIN_THETA_MAX)
    Rdot13_cmd = gains.k_R * (R13_cmd - R[0, 2])
    Rdot23_cmd = gains.k_R * (R23_cmd - R[1, 2])
    W = np.array([[R[1, 0], -R[0, 0]], [R[1, 1], -R[0, 1]]])
    pq_cmd = (W @ np.array([Rdot13_cmd, Rdot23_cmd])) / R33
    _, _, psi = euler_of_R(R)
    err = _wrap_angle(psi_d - psi)
    r_cmd = gains.k_psi * err
    return np.array([pq_cmd[0], pq_cmd[1], r_cmd])


def body_rate_loop(
    state: QuadState,
    omega_cmd: np.ndarray,
    gains: ControllerGains,
    params: QuadParams,
) -> np.ndarray:
    """Nominal moments: tau = I*wdot_cmd + w x I w, clamped to actuator bounds."""
    w = state.omega
    w_dot_cmd = gains.k_omega * (omega_cmd - w)
    gyro = np.array([
        (params.Iz - params.Iy) * w[1] * w[2],
        (params.Ix - params.Iz) * w[0] * w[2],
        (params.Iy - params.Ix) * w[0] * w[1],
    ])
    tau = np.array([params.Ix, params.Iy, params.Iz]) * w_dot_cmd + gyro
    bound = np.array([params.tau_max[0], params.tau_max[1], params.tau_max[1]])
    return np.clip(tau, -bound, bound)


def nominal_command(
    state: QuadState,
    ref: Reference,
    gains: ControllerGains,
    params: QuadParams,
) -> NominalCommand:
    """Full cascade without safety filtering (thrust used as-is downstream)."""
    r_ddot_cmd = position_loop(state, ref, gains)
    f_hat = thrust_from_accel(r_ddot_cmd[2], state.R[2, 2], params)
    omega_cmd = attitude_loop(state, r_ddot_cmd, f_hat, ref.psi_d, gains, params)
    tau_hat = body_rate_loop(state, omega_cmd, gains, params)
    return NominalCommand(f_hat, tau_hat, r_ddot_cmd, omega_cmd)


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = (a + np.pi) % (2.0 * np.pi) - np.pi
    return float(np.pi) if a == -np.pi else float(a)
