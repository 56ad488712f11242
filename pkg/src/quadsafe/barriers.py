"""Rectellipse barrier functions and their exact Lie-derivative chains.

Four barrier families are supported:

* altitude position (relative degree 2, input = thrust)
* altitude position+velocity (relative degree 1, input = thrust)
* lateral position (relative degree 4, input = [tau_x, tau_y])
* lateral velocity (relative degree 3, input = [tau_x, tau_y])

Each chain returns a linear constraint row  a . u + b >= 0  encoding the
(E)CBF condition  L_f^d h + L_g L_f^(d-1) h . u + K' H >= 0.  All higher
derivatives of position are closed-form functions of the rigid-body state;
no numerical differentiation is involved.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dynamics import QuadParams, QuadState

DET_MIN = 1e-3  # lower bound on |det W| before the lateral map is declared singular


class LateralSingular(ValueError):
    """W (lateral rate map) is numerically singular, e.g. near 90 deg tilt."""


class InvalidPoles(ValueError):
    """ECBF pole placement requires strictly negative real poles."""


class BarrierDomain(enum.Enum):
    ALTITUDE_POSITION = "altitude_position"
    ALTITUDE_POSVEL = "altitude_posvel"
    LATERAL_POSITION = "lateral_position"
    LATERAL_VELOCITY = "lateral_velocity"


#: Relative degree of each barrier family.
RELATIVE_DEGREE = {
    BarrierDomain.ALTITUDE_POSITION: 2,
    BarrierDomain.ALTITUDE_POSVEL: 1,
    BarrierDomain.LATERAL_POSITION: 4,
    BarrierDomain.LATERAL_VELOCITY: 3,
}


@dataclass(frozen=True)
class BarrierSpec:
    """One rectellipse safety region.

    ``center`` and ``half_width`` are per constrained state, in the order
    the domain lists them: (z,) / (z, zdot) / (x, y) / (xdot, ydot).
    Velocity states in mixed barriers are always centered at zero.
    """

    domain: BarrierDomain
    center: np.ndarray
    half_width: np.ndarray
    exponent: int = 4
    active_from: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_width", np.asarray(self.half_width, dtype=float))
        if np.any(self.half_width <= 0.0):
            raise ValueError("half_width must be strictly positive")
        if self.exponent < 2 or self.exponent % 2 != 0:
            raise ValueError("exponent must be an even integer >= 2")
        n_expected = {
            BarrierDomain.ALTITUDE_POSITION: 1,
            BarrierDomain.ALTITUDE_POSVEL: 2,
            BarrierDomain.LATERAL_POSITION: 2,
            BarrierDomain.LATERAL_VELOCITY: 2,
        }[self.domain]
        if len(self.center) != n_expected or len(self.half_width) != n_expected:
            raise ValueError(
                f"{self.domain.value} expects {n_expected} constrained state(s)"
            )


@dataclass(frozen=True)
class EcbfGains:
    """Gain vector K for one ECBF chain (or the class-kappa slope for delta=1).

    ``K[j]`` is the coefficient of s^j in prod(s - pole_i); for delta=1 the
    constraint reduces to hdot + alpha*h >= 0 with alpha = K[0].
    """

    delta: int
    poles: tuple[float, ...]
    K: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.delta not in (1, 2, 3, 4):
            raise ValueError("relative degree must be in 1..4")
        if len(self.poles) != self.delta:
            raise ValueError("need one pole per relative degree")
        K = pole_place(self.delta, self.poles) if self.K is None else np.asarray(self.K)
        object.__setattr__(self, "K", K)

    @property
    def alpha(self) -> float:
        return float(self.K[0])


@dataclass(frozen=True)
class ConstraintRow:
    """Linear safety constraint a . u + b >= 0 over the QP decision variable."""

    a: np.ndarray
    b: float
    h_value: float
    H: np.ndarray  # [h, L_f h, ..., L_f^(d-1) h]


@dataclass(frozen=True)
class LateralChainTerms:
    """Shared kinematic terms for the lateral chains (paper's W, V, A, J, L)."""

    W: np.ndarray
    V: np.ndarray
    A: np.ndarray
    Vdot: np.ndarray
    R33dot: float
    J: np.ndarray
    L_mat: np.ndarray


def pole_place(delta: int, poles) -> np.ndarray:
    """Chain gains from desired closed-loop poles.

    Returns K with K[j] = coefficient of s^j in prod_i (s - pole_i),
    excluding the leading s^delta term, so that the companion matrix of
    s^delta + K[delta-1] s^(delta-1) + ... + K[0] has exactly these poles.
    """
    poles = tuple(float(p) for p in poles)
    if len(poles) != delta or delta < 1:
        raise InvalidPoles("need exactly delta poles")
    if any(p >= 0.0 for p in poles):
        raise InvalidPoles("all poles must be strictly negative")
    coeffs = np.poly(poles)  # highest degree first, leading 1
    return coeffs[1:][::-1].copy()  # [k0, ..., k_{delta-1}]


def _require_quartic(spec: "BarrierSpec") -> None:
    # The closed-form chains below are derived for the rectellipse r=4.
    if spec.exponent != 4:
        raise ValueError("Lie-derivative chains require exponent 4")


def rectellipse_h(values: np.ndarray, spec: BarrierSpec) -> float:
    """h = 1 - sum_j ((x_j - c_j)/p_j)^r ; >= 0 inside the safe region."""
    s = (np.asarray(values, dtype=float) - spec.center) / spec.half_width
    return float(1.0 - np.sum(s**spec.exponent))


def altitude_position_chain(
    state: QuadState, spec: BarrierSpec, gains: EcbfGains, params: QuadParams
) -> ConstraintRow:
    """ECBF row (delta=2) for h(z) = 1 - ((z-c)/p_z)^4; decision variable = thrust."""
    assert spec.domain is BarrierDomain.ALTITUDE_POSITION
    _require_quartic(spec)
    c, pz = float(spec.center[0]), float(spec.half_width[0])
    z = float(state.r[2])
    zd = float(state.v[2])
    R33 = float(state.R[2, 2])
    s = z - c
    pz4 = pz**4
    h = 1.0 - (s / pz) ** 4
    Lfh = -4.0 * s**3 * zd / pz4
    Lf2h = -4.0 * s**3 * params.g / pz4 - 12.0 * s**2 * zd**2 / pz4
    a = 4.0 * s**3 * R33 / (pz4 * params.m)
    H = np.array([h, Lfh])
    b = Lf2h + float(gains.K @ H)
    return ConstraintRow(a=np.array([a]), b=b, h_value=h, H=H)


def altitude_posvel_chain(
    state: QuadState, spec: BarrierSpec, gains: EcbfGains, params: QuadParams
) -> ConstraintRow:
    """CBF row (delta=1) for h(z, zdot) = 1 - ((z-c)/p_z)^4 - (zdot/v_z)^4."""
    assert spec.domain is BarrierDomain.ALTITUDE_POSVEL
    _require_quartic(spec)
    cz, pz, vz = float(spec.center[0]), float(spec.half_width[0]), float(spec.half_width[1])
    z = float(state.r[2])
    zd = float(state.v[2])
    R33 = float(state.R[2, 2])
    s = z - cz
    h = 1.0 - (s / pz) ** 4 - (zd / vz) ** 4
    Lfh = -4.0 * s**3 * zd / pz**4 - 4.0 * zd**3 * params.g / vz**4
    a = 4.0 * zd**3 * R33 / (vz**4 * params.m)
    b = Lfh + gains.alpha * h
    return ConstraintRow(a=np.array([a]), b=b, h_value=h, H=np.array([h]))


def lateral_chain_terms(state: QuadState, params: QuadParams) -> LateralChainTerms:
    """Kinematic terms shared by both lateral chains.

    W maps (Rdot13, Rdot23) to R33*(p, q); its inverse V, the exact Vdot
    (from Rdot = R [w]x), and the drift/input maps J, L of the second
    derivative of (R13, R23).
    """
    R = state.R
    p, q, r_rate = (float(w) for w in state.omega)
    W = np.array([[R[1, 0], -R[0, 0]], [R[1, 1], -R[0, 1]]])
    detW = W[0, 0] * W[1, 1] - W[0, 1] * W[1, 0]
    if abs(detW) < DET_MIN:
        raise LateralSingular(f"|det W| = {abs(detW):.2e} below {DET_MIN}")
    V = np.array([[W[1, 1], -W[0, 1]], [-W[1, 0], W[0, 0]]]) / detW
    # Entry-wise Rdot from Rdot = R [w]x.
    Rd11 = R[0, 1] * r_rate - R[0, 2] * q
    Rd21 = R[1, 1] * r_rate - R[1, 2] * q
    Rd12 = -R[0, 0] * r_rate + R[0, 2] * p
    Rd22 = -R[1, 0] * r_rate + R[1, 2] * p
    R33dot = R[2, 0] * q - R[2, 1] * p
    Wdot = np.array([[Rd21, -Rd11], [Rd22, -Rd12]])
    Vdot = -V @ Wdot @ V
    A = np.array([p, q])
    gyro = np.array(
        [
            (params.Iy - params.Iz) / params.Ix * q * r_rate,
            (params.Iz - params.Ix) / params.Iy * p * r_rate,
        ]
    )
    R33 = float(R[2, 2])
    J = R33dot * (V @ A) + R33 * (Vdot @ A) + R33 * (V @ gyro)
    L_mat = R33 * V @ np.diag([1.0 / params.Ix, 1.0 / params.Iy])
    return LateralChainTerms(W=W, V=V, A=A, Vdot=Vdot, R33dot=float(R33dot), J=J, L_mat=L_mat)


def _lateral_kinematics(state: QuadState, f: float, params: QuadParams, terms: LateralChainTerms):
    """First three time derivatives of (x, y) under frozen thrust f."""
    R = state.R
    xy_d = state.v[:2].copy()
    xy_dd = -(f / params.m) * np.array([R[0, 2], R[1, 2]])
    xy_ddd = -(f / params.m) * R[2, 2] * (terms.V @ terms.A)
    return xy_d, xy_dd, xy_ddd


def lateral_position_chain(
    state: QuadState,
    f_applied: float,
    spec: BarrierSpec,
    gains: EcbfGains,
    params: QuadParams,
) -> ConstraintRow:
    """ECBF row (delta=4) for h(x, y); decision variable = [tau_x, tau_y].

    The thrust already fixed for this step enters the drift; the chain is
    exact for zero-order-hold thrust.
    """
    assert spec.domain is BarrierDomain.LATERAL_POSITION
    _require_quartic(spec)
    terms = lateral_chain_terms(state, params)
    cx, cy = spec.center
    px4, py4 = spec.half_width**4
    sx = float(state.r[0]) - cx
    sy = float(state.r[1]) - cy
    eta = [np.array([sx**i / px4, sy**i / py4]) for i in range(4)]
    xy_d, xy_dd, xy_ddd = _lateral_kinematics(state, f_applied, params, terms)

    h = 1.0 - sx**4 / px4 - sy**4 / py4
    Lfh = -4.0 * eta[3] @ xy_d
    Lf2h = -4.0 * eta[3] @ xy_dd - 12.0 * eta[2] @ xy_d**2
    Lf3h = (
        -4.0 * eta[3] @ xy_ddd
        - 36.0 * eta[2] @ (xy_d * xy_dd)
        - 24.0 * eta[1] @ xy_d**3
    )
    fm4 = 4.0 * f_applied / params.m
    Lf4h = (
        fm4 * eta[3] @ terms.J
        - 48.0 * eta[2] @ (xy_d * xy_ddd)
        - 36.0 * eta[2] @ xy_dd**2
        - 144.0 * eta[1] @ (xy_d**2 * xy_dd)
        - 24.0 * eta[0] @ xy_d**4
    )
    a = fm4 * (eta[3] @ terms.L_mat)
    H = np.array([h, Lfh, Lf2h, Lf3h])
    b = Lf4h + float(gains.K @ H)
    return ConstraintRow(a=a, b=b, h_value=h, H=H)


def lateral_velocity_chain(
    state: QuadState,
    f_applied: float,
    spec: BarrierSpec,
    gains: EcbfGains,
    params: QuadParams,
) -> ConstraintRow:
    """ECBF row (delta=3) for h(xdot, ydot); decision variable = [tau_x, tau_y]."""
    assert spec.domain is BarrierDomain.LATERAL_VELOCITY
    _require_quartic(spec)
    terms = lateral_chain_terms(state, params)
    vx4, vy4 = spec.half_width**4
    terms_xy = _lateral_kinematics(state, f_applied, params, terms)
    xy_d, xy_dd, xy_ddd = terms_xy
    sx = float(xy_d[0]) - float(spec.center[0])
    sy = float(xy_d[1]) - float(spec.center[1])
    mu = [np.array([sx**i / vx4, sy**i / vy4]) for i in range(4)]

    h = 1.0 - sx**4 / vx4 - sy**4 / vy4
    Lfh = -4.0 * mu[3] @ xy_dd
    Lf2h = -4.0 * mu[3] @ xy_ddd - 12.0 * mu[2] @ xy_dd**2
    fm4 = 4.0 * f_applied / params.m
    Lf3h = (
        fm4 * mu[3] @ terms.J
        - 36.0 * mu[2] @ (xy_dd * xy_ddd)
        - 24.0 * mu[1] @ xy_dd**3
    )
    a = fm4 * (mu[3] @ terms.L_mat)
    H = np.array([h, Lfh, Lf2h])
    b = Lf3h + float(gains.K @ H)
    return ConstraintRow(a=a, b=b, h_value=h, H=H)


def barrier_h(state: QuadState, spec: BarrierSpec) -> float:
    """Current barrier value for any domain (logging/diagnostics)."""
    if spec.domain is BarrierDomain.ALTITUDE_POSITION:
        vals = np.array([state.r[2]])
    elif spec.domain is BarrierDomain.ALTITUDE_POSVEL:
        vals = np.array([state.r[2], state.v[2]])
    elif spec.domain is BarrierDomain.LATERAL_POSITION:
        vals = state.r[:2]
    else:
        vals = state.v[:2]
    return rectellipse_h(vals, spec)
