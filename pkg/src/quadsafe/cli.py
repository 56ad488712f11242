"""Command-line front end: run scenarios, validate them, export traces.

Subcommands:
  run <scenario> [--out DIR] [--dt S] [--seed N]   simulate and write trace files
  presets                                          list built-in scenarios
  check <scenario>                                 validate without running
  oracle                                           finite-difference chain check

``<scenario>`` is either a YAML file path or ``presets:<name>``.
Exit codes: 0 success, 1 validation error, 2 non-finite state abort.
QP infeasibility events are data, not failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import tempfile
import time

from .barriers import BarrierDomain
from .config import PRESETS, ScenarioError, load_preset, load_scenario
from .dynamics import NonFiniteState
from .oracle import check_all_chains
from .sim import Scenario, TraceRecord, run

EPS_NUM = 0.02  # discretization slack on barrier invariance, for summaries

TRACE_HEADER = (
    "t,x,y,z,phi,theta,psi,vx,vy,vz,p,q,r_rate,f_hat,F_star,taux_hat,tauy_hat,"
    "Mx_star,My_star,tauz,h_alt,h_altvel,h_latpos,h_latvel,qp_hi_status,qp_lo_status"
)

_H_COLUMNS = (
    BarrierDomain.ALTITUDE_POSITION,
    BarrierDomain.ALTITUDE_POSVEL,
    BarrierDomain.LATERAL_POSITION,
    BarrierDomain.LATERAL_VELOCITY,
)


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_csv_lines(records: list[TraceRecord]) -> list[str]:
    lines = [TRACE_HEADER]
    for rec in records:
        phi, theta, psi = rec.euler
        cols = [
            _fmt(rec.t),
            _fmt(rec.r[0]), _fmt(rec.r[1]), _fmt(rec.r[2]),
            _fmt(phi), _fmt(theta), _fmt(psi),
            _fmt(rec.v[0]), _fmt(rec.v[1]), _fmt(rec.v[2]),
            _fmt(rec.omega[0]), _fmt(rec.omega[1]), _fmt(rec.omega[2]),
            _fmt(rec.f_hat), _fmt(rec.f_star),
            _fmt(rec.tau_hat[0]), _fmt(rec.tau_hat[1]),
            _fmt(rec.m_star[0]), _fmt(rec.m_star[1]),
            _fmt(rec.tau_z),
        ]
        for domain in _H_COLUMNS:
            cols.append(_fmt(rec.h[domain]) if domain in rec.h else "")
        cols.append(rec.qp_hi_status)
        cols.append(rec.qp_lo_status)
        lines.append(",".join(cols))
    return lines


def export_trace(records: list[TraceRecord], out_dir: str, wall_time_s: float = 0.0) -> None:
    """Write trace.csv, events.csv, summary.txt (atomically) into out_dir."""
    if not records:
        raise ValueError("empty trace")
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write(os.path.join(out_dir, "trace.csv"),
                  "\n".join(trace_csv_lines(records)) + "\n")

    event_lines = ["t,event_type,detail"]
    for rec in records:
        for ev in rec.events:
            ev_type, _, detail = ev.partition(":")
            event_lines.append(f"{_fmt(rec.t)},{ev_type},{detail}")
    _atomic_write(os.path.join(out_dir, "events.csv"), "\n".join(event_lines) + "\n")

    _atomic_write(os.path.join(out_dir, "summary.txt"),
                  summary_text(records, wall_time_s))


def summary_text(records: list[TraceRecord], wall_time_s: float) -> str:
    dt = records[1].t - records[0].t if len(records) > 1 else 0.0
    lines = [f"steps: {len(records)}", f"wall_time_s: {wall_time_s:.3f}"]
    for domain in _H_COLUMNS:
        hs = [rec.h[domain] for rec in records if domain in rec.h]
        if not hs:
            continue
        min_h = min(hs)
        violation_s = sum(dt for h in hs if h < -EPS_NUM)
        lines.append(
            f"barrier {domain.value}: min_h={min_h:.6f} "
            f"violation_beyond_eps_s={violation_s:.3f}"
        )
    n_infeasible = sum(
        1 for rec in records if any(ev.startswith("infeasible") for ev in rec.events)
    )
    lines.append(f"infeasible_steps: {n_infeasible}")
    return "\n".join(lines) + "\n"


def _load(spec_arg: str) -> Scenario:
    if spec_arg.startswith("presets:"):
        return load_preset(spec_arg.split(":", 1)[1])
    if not os.path.exists(spec_arg):
        raise ScenarioError(f"scenario file not found: {spec_arg}")
    return load_scenario(spec_arg)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="quadsafe",
        description="Quadrotor safety-filter simulator (cascaded CBF/ECBF QPs).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and export the trace")
    p_run.add_argument("scenario", help="YAML scenario file or presets:<name>")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--dt", type=float, default=None, help="override step size [s]")
    p_run.add_argument("--seed", type=int, default=0,
                       help="reserved for future noise injection; must be 0")

    sub.add_parser("presets", help="list built-in scenario presets")

    p_check = sub.add_parser("check", help="validate a scenario without running it")
    p_check.add_argument("scenario", help="YAML scenario file or presets:<name>")

    p_oracle = sub.add_parser(
        "oracle", help="verify barrier chains against finite differences"
    )
    p_oracle.add_argument("--states", type=int, default=100)

    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in sorted(PRESETS):
            first_comment = PRESETS[name].splitlines()[0].lstrip("# ")
            print(f"{name}: {first_comment}")
        return 0

    if args.command == "oracle":
        ok = True
        for chk in check_all_chains(n_states=args.states):
            print(
                f"{chk.domain.value}: max_rel_err lower-derivatives="
                f"{chk.max_rel_lower:.3e} top-derivative={chk.max_rel_top:.3e}"
            )
            ok = ok and chk.max_rel_lower <= 1e-4 and chk.max_rel_top <= 1e-3
        print("oracle:", "PASS" if ok else "FAIL")
        return 0 if ok else 1

    try:
        scenario = _load(args.scenario)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.command == "check":
        print("ok")
        return 0

    if args.seed != 0:
        print("error: --seed is reserved and must be 0 (or absent)", file=sys.stderr)
        return 1
    if args.dt is not None:
        if args.dt <= 0:
            print("error: --dt must be positive", file=sys.stderr)
            return 1
        scenario = dataclasses.replace(scenario, dt=args.dt)

    t0 = time.perf_counter()
    try:
        records = run(scenario)
    except NonFiniteState as exc:
        print(f"error: simulation aborted on non-finite state: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    try:
        export_trace(records, args.out, wall)
    except OSError as exc:
        print(f"error writing {args.out}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(records)} steps to {args.out} ({wall:.2f} s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
