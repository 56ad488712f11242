"""Scenario-driven closed-loop simulation.

Single-rate loop: analytic sinusoidal reference -> cascaded controller ->
high-level thrust QP -> attitude/body-rate loops -> low-level torque QP ->
RK4 dynamics step, with full per-step trace logging. All QP and
singularity events are recorded in the trace, never fatal; only a
non-finite state aborts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from .barriers import (
    RELATIVE_DEGREE,
    BarrierDomain,
    BarrierSpec,
    EcbfGains,
    LateralSingular,
    barrier_h,
)
from .controller import ControllerGains, Reference
from .dynamics import ControlInput, QuadParams, QuadState, euler_of_R, step
from .qp import InfeasiblePolicy, QpStatus, filter_thrust, filter_torque

ALTITUDE_DOMAINS = (BarrierDomain.ALTITUDE_POSITION, BarrierDomain.ALTITUDE_POSVEL)
LATERAL_DOMAINS = (BarrierDomain.LATERAL_POSITION, BarrierDomain.LATERAL_VELOCITY)


@dataclass(frozen=True)
class ReferenceConfig:
    """Sinusoidal trajectory source: r_d = a * sin(w t) per axis."""

    amplitude: np.ndarray = field(default_factory=lambda: np.array([2.5, 2.5, 2.5]))
    frequency: np.ndarray = field(default_factory=lambda: np.array([0.4, 0.5, 0.3]))
    yaw_mode: str = "atan2"          # "atan2" -> psi_d = atan2(y_d, x_d)
    yaw_constant: float = 0.0

    def __post_init__(self) -> None:
        if self.yaw_mode not in ("atan2", "constant"):
            raise ValueError("yaw_mode must be 'atan2' or 'constant'")


@dataclass(frozen=True)
class ScheduledBarrier:
    """A barrier region plus its chain gains; active from spec.active_from
    until superseded by a later spec on the same domain."""

    spec: BarrierSpec
    gains: EcbfGains

    def __post_init__(self) -> None:
        if self.gains.delta != RELATIVE_DEGREE[self.spec.domain]:
            raise ValueError(
                f"{self.spec.domain.value} has relative degree "
                f"{RELATIVE_DEGREE[self.spec.domain]}, gains say {self.gains.delta}"
            )


@dataclass(frozen=True)
class Scenario:
    duration: float = 40.0
    dt: float = 1e-3
    initial_state: QuadState = field(default_factory=QuadState)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    barriers: tuple[ScheduledBarrier, ...] = ()
    gains: ControllerGains = field(default_factory=ControllerGains)
    params: QuadParams = field(default_factory=QuadParams)
    filter_high: bool = True
    filter_low: bool = True
    infeasible_policy: InfeasiblePolicy = InfeasiblePolicy.LEAST_INFEASIBLE

    def __post_init__(self) -> None:
        if self.duration <= 0 or self.dt <= 0:
            raise ValueError("duration and dt must be positive")
        by_domain: dict[BarrierDomain, list[float]] = {}
        for sb in self.barriers:
            by_domain.setdefault(sb.spec.domain, []).append(sb.spec.active_from)
        for domain, starts in by_domain.items():
            if len(starts) != len(set(starts)):
                raise ValueError(
                    f"overlapping schedule for {domain.value}: duplicate "
                    f"activation times {sorted(starts)}"
                )


@dataclass
class TraceRecord:
    t: float
    r: np.ndarray
    euler: tuple[float, float, float]
    v: np.ndarray
    omega: np.ndarray
    ref: Reference
    f_hat: float
    tau_hat: np.ndarray
    f_star: float
    m_star: np.ndarray
    tau_z: float
    h: dict[BarrierDomain, float]
    H: dict[BarrierDomain, np.ndarray]
    qp_hi_status: str
    qp_lo_status: str
    events: tuple[str, ...] = ()


def reference_at(t: float, cfg: ReferenceConfig) -> Reference:
    """Closed-form reference position/velocity/acceleration and yaw."""
    a = cfg.amplitude
    w = cfg.frequency
    wt = w * t
    r_d = a * np.sin(wt)
    v_d = a * w * np.cos(wt)
    a_d = -a * w**2 * np.sin(wt)
    if cfg.yaw_mode == "atan2":
        psi_d = 0.0 if (r_d[0] == 0.0 and r_d[1] == 0.0) else float(
            np.arctan2(r_d[1], r_d[0])
        )
    else:
        psi_d = cfg.yaw_constant
    return Reference(r_d=r_d, v_d=v_d, a_d=a_d, psi_d=psi_d)


def active_barriers(
    barriers: tuple[ScheduledBarrier, ...], t: float, domains
) -> list[ScheduledBarrier]:
    """Latest activated spec per domain (later specs supersede earlier ones)."""
    out = []
    for domain in domains:
        candidates = [
            sb for sb in barriers
            if sb.spec.domain is domain and sb.spec.active_from <= t
        ]
        if candidates:
            out.append(max(candidates, key=lambda sb: sb.spec.active_from))
    return out


def run(scenario: Scenario) -> list[TraceRecord]:
    """Simulate the closed loop; returns one TraceRecord per step."""
    params = scenario.params
    gains = scenario.gains
    dt = scenario.dt
    n_steps = int(round(scenario.duration / dt))
    state = scenario.initial_state
    state.validate(tol=1e-6)
    trace: list[TraceRecord] = []
    prev_active: dict[BarrierDomain, float] = {}
    last_f: float | None = None
    last_m: np.ndarray | None = None

    for k in range(n_steps):
        t = k * dt
        events: list[str] = []
        ref = reference_at(t, scenario.reference)

        hi_active = active_barriers(scenario.barriers, t, ALTITUDE_DOMAINS)
        lo_active = active_barriers(scenario.barriers, t, LATERAL_DOMAINS)
        for sb in hi_active + lo_active:
            domain = sb.spec.domain
            if prev_active.get(domain) not in (None, sb.spec.active_from):
                events.append(f"barrier-switch:{domain.value}")
            prev_active[domain] = sb.spec.active_from

        h_vals: dict[BarrierDomain, float] = {}
        H_vals: dict[BarrierDomain, np.ndarray] = {}
        for sb in hi_active + lo_active:
            h_vals[sb.spec.domain] = barrier_h(state, sb.spec)

        r_ddot_cmd = ctl.position_loop(state, ref, gains)
        try:
            f_hat = ctl.thrust_from_accel(r_ddot_cmd[2], state.R[2, 2], params)
        except ctl.AttitudeSingular:
            f_hat = float(np.clip(params.m * params.g, 0.0, params.f_max))
            events.append("attitude-singular:thrust")

        qp_hi_status = ""
        if scenario.filter_high and hi_active:
            res = filter_thrust(
                state, f_hat, [(sb.spec, sb.gains) for sb in hi_active], params,
                policy=scenario.infeasible_policy, last=last_f,
            )
            f_star = float(res.u_star[0])
            qp_hi_status = res.solution.status.value
            for sb, row in zip(hi_active, res.rows):
                H_vals[sb.spec.domain] = row.H.copy()
            if res.solution.status is QpStatus.INFEASIBLE:
                events.append("infeasible:high")
        else:
            f_star = f_hat

        try:
            omega_cmd = ctl.attitude_loop(
                state, r_ddot_cmd, f_star, ref.psi_d, gains, params
            )
        except (ctl.AttitudeSingular, ctl.ThrustTooSmall) as exc:
            omega_cmd = np.zeros(3)
            events.append(
                "attitude-singular:rates"
                if isinstance(exc, ctl.AttitudeSingular)
                else "thrust-floor:rates"
            )
        tau_hat = ctl.body_rate_loop(state, omega_cmd, gains, params)

        qp_lo_status = ""
        m_star = tau_hat[:2].copy()
        if scenario.filter_low and lo_active:
            try:
                res = filter_torque(
                    state, tau_hat[:2], f_star,
                    [(sb.spec, sb.gains) for sb in lo_active], params,
                    policy=scenario.infeasible_policy, last=last_m,
                )
                m_star = res.u_star
                qp_lo_status = res.solution.status.value
                for sb, row in zip(lo_active, res.rows):
                    H_vals[sb.spec.domain] = row.H.copy()
                if res.solution.status is QpStatus.INFEASIBLE:
                    events.append("infeasible:low")
            except LateralSingular:
                bound = np.array([params.tau_max[0], params.tau_max[1]])
                m_star = np.clip(tau_hat[:2], -bound, bound)
                qp_lo_status = "singular"
                events.append("lateral-singular")

        u = ControlInput(f=f_star, tau=np.array([m_star[0], m_star[1], tau_hat[2]]))
        trace.append(
            TraceRecord(
                t=t,
                r=state.r.copy(),
                euler=euler_of_R(state.R),
                v=state.v.copy(),
                omega=state.omega.copy(),
                ref=ref,
                f_hat=f_hat,
                tau_hat=tau_hat.copy(),
                f_star=f_star,
                m_star=np.asarray(m_star, float).copy(),
                tau_z=float(tau_hat[2]),
                h=h_vals,
                H=H_vals,
                qp_hi_status=qp_hi_status,
                qp_lo_status=qp_lo_status,
                events=tuple(events),
            )
        )
        state = step(state, u, params, dt)
        last_f = f_star
        last_m = np.asarray(m_star, float)
    return trace
