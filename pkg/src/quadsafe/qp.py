"""Safety-filter quadratic programs.

Both filters minimize the deviation from the nominal input subject to
stacked barrier rows (a . u + b >= 0) and actuator box bounds:

* high level: scalar thrust, solved by exact interval intersection;
* low level: 2-D moment vector, solved by exhaustive active-set (KKT)
  enumeration, exact at this dimension.

On infeasibility the configurable fallback keeps the simulation alive; the
default picks the least-infeasible admissible input (min-max violation).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .barriers import (
    BarrierDomain,
    BarrierSpec,
    ConstraintRow,
    EcbfGains,
    altitude_position_chain,
    altitude_posvel_chain,
    lateral_position_chain,
    lateral_velocity_chain,
)
from .dynamics import QuadParams, QuadState

_A_EPS = 1e-12       # below this, a row does not involve the decision variable
_FEAS_TOL = 1e-9
_LAMBDA_TOL = 1e-12


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class InfeasiblePolicy(enum.Enum):
    LEAST_INFEASIBLE = "least_infeasible"
    NOMINAL = "nominal"
    HOLD_LAST = "hold_last"


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 ||u - u_hat||^2  s.t.  a_i . u + b_i >= 0,  lower <= u <= upper."""

    u_hat: np.ndarray
    rows: tuple[ConstraintRow, ...]
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.u_hat)


@dataclass(frozen=True)
class QpSolution:
    u_star: np.ndarray
    status: QpStatus
    active_set: tuple[int, ...] = ()
    kkt_residual: float = 0.0


def solve_qp(p: QpProblem) -> QpSolution:
    if p.dim == 1:
        return _solve_1d(p)
    if p.dim == 2:
        return _solve_2d(p)
    raise ValueError("solver supports dim 1 or 2 only")


def _constraint_list(p: QpProblem) -> list[tuple[np.ndarray, float]]:
    """Barrier rows followed by box faces, all as a . u + b >= 0."""
    cons = [(np.asarray(r.a, dtype=float), float(r.b)) for r in p.rows]
    for j in range(p.dim):
        e = np.zeros(p.dim)
        e[j] = 1.0
        cons.append((e.copy(), -float(p.lower[j])))
        cons.append((-e, float(p.upper[j])))
    return cons


def _solve_1d(p: QpProblem) -> QpSolution:
    lo = float(p.lower[0])
    hi = float(p.upper[0])
    lo_idx = hi_idx = -1
    for i, row in enumerate(p.rows):
        a = float(row.a[0])
        b = float(row.b)
        if abs(a) < _A_EPS:
            if b < -_FEAS_TOL:
                return QpSolution(np.array([np.clip(p.u_hat[0], lo, hi)]),
                                  QpStatus.INFEASIBLE)
            continue
        bound = -b / a
        if a > 0.0:
            if bound > lo:
                lo, lo_idx = bound, i
        else:
            if bound < hi:
                hi, hi_idx = bound, i
    if lo > hi:
        return QpSolution(np.array([np.clip(p.u_hat[0], p.lower[0], p.upper[0])]),
                          QpStatus.INFEASIBLE)
    u = float(np.clip(p.u_hat[0], lo, hi))
    active = []
    if u == lo and lo_idx >= 0:
        active.append(lo_idx)
    if u == hi and hi_idx >= 0:
        active.append(hi_idx)
    return QpSolution(np.array([u]), QpStatus.OPTIMAL, tuple(active),
                      _primal_residual(p, np.array([u])))


def _solve_2d(p: QpProblem) -> QpSolution:
    cons = _constraint_list(p)
    # Rows not involving u must hold on their own.
    for a, b in cons[: len(p.rows)]:
        if np.linalg.norm(a) < _A_EPS and b < -_FEAS_TOL:
            return QpSolution(np.clip(p.u_hat, p.lower, p.upper), QpStatus.INFEASIBLE)
    cons_idx = [(i, a, b) for i, (a, b) in enumerate(cons) if np.linalg.norm(a) >= _A_EPS]

    def feasible(u: np.ndarray) -> bool:
        return all(a @ u + b >= -_FEAS_TOL for _, a, b in cons_idx)

    best: tuple[float, np.ndarray, tuple[int, ...]] | None = None

    def consider(u: np.ndarray, active: tuple[int, ...]) -> None:
        nonlocal best
        if not feasible(u):
            return
        obj = 0.5 * float(np.sum((u - p.u_hat) ** 2))
        if best is None or obj < best[0] - 1e-15:
            best = (obj, u, active)

    consider(p.u_hat.astype(float).copy(), ())
    for (i, a, b) in cons_idx:
        viol = a @ p.u_hat + b
        lam = -viol / float(a @ a)
        if lam >= -_LAMBDA_TOL:
            consider(p.u_hat + lam * a, (i,))
    for (i, ai, bi), (j, aj, bj) in itertools.combinations(cons_idx, 2):
        A = np.array([ai, aj])
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) < 1e-12:
            continue
        try:
            u = np.linalg.solve(A, -np.array([bi, bj]))
            lam = np.linalg.solve(A @ A.T, A @ (u - p.u_hat))
        except np.linalg.LinAlgError:  # near-parallel pair, ill-conditioned
            continue
        if np.all(lam >= -_LAMBDA_TOL):
            consider(u, (i, j))
    if best is None:
        return QpSolution(np.clip(p.u_hat, p.lower, p.upper), QpStatus.INFEASIBLE)
    obj, u, active = best
    return QpSolution(u, QpStatus.OPTIMAL, active, _primal_residual(p, u))


def _primal_residual(p: QpProblem, u: np.ndarray) -> float:
    res = 0.0
    for a, b in _constraint_list(p):
        res = max(res, -(float(a @ u) + b))
    return max(res, 0.0)


def kkt_residual(p: QpProblem, sol: QpSolution) -> float:
    """Max norm of the full KKT residual at sol (stationarity with
    nonnegative multipliers over tight constraints, plus primal violation)."""
    from scipy.optimize import nnls

    if sol.status is not QpStatus.OPTIMAL:
        return float("inf")
    cons = _constraint_list(p)
    u = sol.u_star
    tight = [
        a for a, b in cons
        if np.linalg.norm(a) >= _A_EPS
        and abs(a @ u + b) <= 1e-7 * (1.0 + abs(b) + np.linalg.norm(a) * np.linalg.norm(u))
    ]
    grad = u - p.u_hat
    if tight:
        A = np.array(tight)
        _, stat = nnls(A.T, grad)
    else:
        stat = float(np.max(np.abs(grad))) if grad.size else 0.0
    return max(float(stat), _primal_residual(p, u))


def least_infeasible(p: QpProblem) -> np.ndarray:
    """Admissible input minimizing the worst constraint violation, breaking
    ties toward the nominal input.

    Epigraph linear program: min t  s.t.  -a_i.u - t <= b_i, box, t >= 0,
    solved with scipy's HiGHS. The LP alone lands on an arbitrary vertex
    (often a torque-box corner, which kicks the attitude hard), so the rows
    are then relaxed by the optimal violation t* and re-solved as the usual
    projection QP: the result is the point nearest the nominal among the
    least-infeasible inputs.
    """
    from scipy.optimize import linprog

    n = p.dim
    rows = [(np.asarray(r.a, float), float(r.b)) for r in p.rows]
    if not rows:
        return np.clip(p.u_hat, p.lower, p.upper)
    A_ub = np.array([np.concatenate([-a, [-1.0]]) for a, _ in rows])
    b_ub = np.array([b for _, b in rows])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    bounds = [(float(p.lower[j]), float(p.upper[j])) for j in range(n)] + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:  # should not happen: the epigraph LP is always feasible
        return np.clip(p.u_hat, p.lower, p.upper)
    t_star = float(res.x[-1])
    slack = t_star * (1.0 + 1e-9) + 1e-12
    relaxed = QpProblem(
        u_hat=p.u_hat,
        rows=tuple(
            ConstraintRow(a=r.a, b=r.b + slack, h_value=r.h_value, H=r.H)
            for r in p.rows
        ),
        lower=p.lower,
        upper=p.upper,
    )
    sol = solve_qp(relaxed)
    if sol.status is QpStatus.OPTIMAL:
        return sol.u_star
    return res.x[:n]


@dataclass
class FilterResult:
    u_star: np.ndarray
    solution: QpSolution
    rows: tuple[ConstraintRow, ...]


def _fallback(
    p: QpProblem, policy: InfeasiblePolicy, last: np.ndarray | None
) -> np.ndarray:
    if policy is InfeasiblePolicy.LEAST_INFEASIBLE:
        return least_infeasible(p)
    if policy is InfeasiblePolicy.HOLD_LAST and last is not None:
        return np.clip(np.asarray(last, float), p.lower, p.upper)
    return np.clip(p.u_hat, p.lower, p.upper)


def filter_thrust(
    state: QuadState,
    f_hat: float,
    active_specs: list[tuple[BarrierSpec, EcbfGains]],
    params: QuadParams,
    policy: InfeasiblePolicy = InfeasiblePolicy.LEAST_INFEASIBLE,
    last: float | None = None,
) -> FilterResult:
    """High-level QP: modify thrust to honor the active altitude barriers."""
    rows = []
    for spec, gains in active_specs:
        if spec.domain is BarrierDomain.ALTITUDE_POSITION:
            rows.append(altitude_position_chain(state, spec, gains, params))
        elif spec.domain is BarrierDomain.ALTITUDE_POSVEL:
            rows.append(altitude_posvel_chain(state, spec, gains, params))
        else:
            raise ValueError(f"not an altitude barrier: {spec.domain}")
    p = QpProblem(
        u_hat=np.array([float(np.clip(f_hat, 0.0, params.f_max))]),
        rows=tuple(rows),
        lower=np.array([0.0]),
        upper=np.array([params.f_max]),
    )
    sol = solve_qp(p)
    if sol.status is QpStatus.OPTIMAL:
        u = sol.u_star
    else:
        u = _fallback(p, policy, None if last is None else np.array([last]))
    return FilterResult(u, sol, tuple(rows))


def filter_torque(
    state: QuadState,
    tau_hat_xy: np.ndarray,
    f_star_applied: float,
    active_specs: list[tuple[BarrierSpec, EcbfGains]],
    params: QuadParams,
    policy: InfeasiblePolicy = InfeasiblePolicy.LEAST_INFEASIBLE,
    last: np.ndarray | None = None,
) -> FilterResult:
    """Low-level QP: modify [tau_x, tau_y] given the thrust fixed this step.

    Raises LateralSingular (from the chains) when the attitude is near the
    W-inversion singularity; the caller decides the pass-through policy.
    """
    rows = []
    for spec, gains in active_specs:
        if spec.domain is BarrierDomain.LATERAL_POSITION:
            rows.append(lateral_position_chain(state, f_star_applied, spec, gains, params))
        elif spec.domain is BarrierDomain.LATERAL_VELOCITY:
            rows.append(lateral_velocity_chain(state, f_star_applied, spec, gains, params))
        else:
            raise ValueError(f"not a lateral barrier: {spec.domain}")
    bound = np.array([params.tau_max[0], params.tau_max[1]])
    p = QpProblem(
        u_hat=np.clip(np.asarray(tau_hat_xy, float), -bound, bound),
        rows=tuple(rows),
        lower=-bound,
        upper=bound,
    )
    sol = solve_qp(p)
    if sol.status is QpStatus.OPTIMAL:
        u = sol.u_star
    else:
        u = _fallback(p, policy, last)
    return FilterResult(u, sol, tuple(rows))
