"""Quadrotor flight-safety simulator.

Cascaded flight control with two-level quadratic-program safety filtering:
rectellipse control barrier functions on position and velocity, exponential
CBF constraint chains up to relative degree four, and scenario presets
reproducing the trajectory-rectification experiments.
"""

from .barriers import BarrierDomain, BarrierSpec, EcbfGains, pole_place, rectellipse_h
from .controller import ControllerGains, Reference
from .dynamics import ControlInput, QuadParams, QuadState
from .qp import InfeasiblePolicy, QpProblem, QpSolution, solve_qp
from .sim import Scenario, ScheduledBarrier, TraceRecord, reference_at, run

__all__ = [
    "BarrierDomain",
    "BarrierSpec",
    "ControlInput",
    "ControllerGains",
    "EcbfGains",
    "InfeasiblePolicy",
    "QpProblem",
    "QpSolution",
    "QuadParams",
    "QuadState",
    "Reference",
    "Scenario",
    "ScheduledBarrier",
    "TraceRecord",
    "pole_place",
    "rectellipse_h",
    "reference_at",
    "run",
    "solve_qp",
]

__version__ = "0.1.0"
