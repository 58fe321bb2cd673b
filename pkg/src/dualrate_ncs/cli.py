"""Command-line entry point: simulate, stability, sweep, cost, live-local, live-remote."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .cost import compute_j1_j2, sweep_mismatch
from .live import run_live
from .network import DelayModel, DropoutModel
from .scenario import MODES, Scenario, default_scenario, load_scenario
from .simulation import SimulationTrace, run_simulation
from .stability import build_closed_loop, check_feasibility, grid_delays
from .transport import LOCAL, REMOTE


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_scenario_args(p: argparse.ArgumentParser, mismatch_lists: bool = False):
    p.add_argument("--config", type=Path, help="scenario file (INI sections mirroring the Scenario fields)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, help="seconds")
    p.add_argument("--delay-eta", type=float, help="minimum delay (s)")
    p.add_argument("--delay-phi", type=float, help="exponential scale of the delay (s)")
    p.add_argument("--delay-max", type=float, help="delay bound tau_max (s)")
    p.add_argument("--drop-p", type=float, help="dropout probability on both links")
    p.add_argument("--m-bound", type=int, help="prediction horizon M")
    if mismatch_lists:
        p.add_argument("--q", dest="q_values", default="0,20,30", help="comma-separated gain mismatches (percent)")
        p.add_argument("--r", dest="r_values", default="0,8,12",
                       help="comma-separated time-constant mismatches (percent)")
    else:
        p.add_argument("--q", dest="q_percent", type=float, help="gain mismatch in percent")
        p.add_argument("--r", dest="r_percent", type=float, help="time-constant mismatch in percent")


def scenario_from_args(args) -> Scenario:
    s = load_scenario(args.config) if args.config else default_scenario()
    changes = {}
    for name in ("mode", "seed", "duration"):
        if getattr(args, name, None) is not None:
            changes[name] = getattr(args, name)
    for name in ("q_percent", "r_percent"):
        if getattr(args, name, None) is not None:
            changes[name] = getattr(args, name)
    d = s.delay
    if any(getattr(args, f, None) is not None for f in ("delay_eta", "delay_phi", "delay_max")):
        changes["delay"] = DelayModel(
            args.delay_eta if args.delay_eta is not None else d.eta,
            args.delay_phi if args.delay_phi is not None else d.phi,
            args.delay_max if args.delay_max is not None else d.tau_max,
            d.tau_c,
        )
    if args.drop_p is not None or args.m_bound is not None:
        dr = s.dropout
        p_lr = args.drop_p if args.drop_p is not None else dr.p_lr
        p_rl = args.drop_p if args.drop_p is not None else dr.p_rl
        changes["dropout"] = DropoutModel(p_lr, p_rl, args.m_bound if args.m_bound is not None else dr.m_bound)
    return s.with_(**changes).validate()


def cmd_simulate(args) -> int:
    s = scenario_from_args(args)
    tr = run_simulation(s)
    tr.to_csv(args.out)
    flags = [f for f, on in (("fallback", tr.fallback), ("diverged", tr.diverged)) if on]
    print(f"{len(tr)} rows ({s.mode}, seed {s.seed}) -> {args.out}" + (f" [{', '.join(flags)}]" if flags else ""))
    return 1 if tr.diverged else 0


def cmd_stability(args) -> int:
    s = scenario_from_args(args)
    cl = build_closed_loop(s.plant, s.gains, s.timing, reduced=not args.full)
    grid = grid_delays(s.delay, s.grid_points)
    cert = check_feasibility(cl, grid, time_limit=args.time_limit)
    print(cert.summary())
    print(f"residual max-eigenvalues: {cert.residual_0:.6g} {cert.residual_1:.6g}")
    w = csv.writer(sys.stdout)
    for row in cert.q:
        w.writerow([f"{v:.9g}" for v in row])
    return 0 if cert.feasible else 2


def cmd_sweep(args) -> int:
    s = scenario_from_args(args)
    rep = sweep_mismatch(s, _floats(args.q_values), _floats(args.r_values))
    rep.write_csv(args.out)
    with np.printoptions(precision=2, suppress=True):
        print(f"J3 (rows r, columns q):\n{rep.j3}\nJ4:\n{rep.j4}")
    return 0


def cmd_cost(args) -> int:
    traces = {"nominal": SimulationTrace.from_csv(args.nominal)}
    cands = [Path(c) for c in args.candidates.split(",") if c]
    names = [c.stem for c in cands]
    for name, path in zip(names, cands):
        traces[name] = SimulationTrace.from_csv(path)
    worst = Path(args.worst).stem if args.worst else names[0]
    if args.worst and worst not in traces:
        traces[worst] = SimulationTrace.from_csv(args.worst)
    gamma = tuple(_floats(args.gamma)) if args.gamma else None
    rep = compute_j1_j2(traces, gamma=gamma, worst=worst)
    rep.write_csv(args.out)
    for name in rep.e_y:
        print(f"{name}: E_Y={rep.e_y[name]:.6g} J1={rep.j1[name]:.2f} O_Y={rep.o_y[name]:.6g} J2={rep.j2[name]:.2f}")
    return 0


def cmd_live(args, role) -> int:
    s = scenario_from_args(args)
    result = run_live(role, s, args.bind, args.peer, session_timeout=args.session_timeout)
    if args.out:
        result.to_csv(args.out)
    if role == LOCAL:
        print(f"{len(result)} rows" + (" [fallback]" if result.fallback else ""))
        return 0
    if result.timed_out:
        print("no session received; nothing to do")
    else:
        print(f"served {len(result.seqs)} periods, {sum(result.measured)} with a measurement")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualrate-ncs", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its trace CSV")
    _add_scenario_args(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="search for a Lyapunov certificate")
    _add_scenario_args(p)
    p.add_argument("--full", action="store_true", help="full closed-loop form instead of the reduced one")
    p.add_argument("--time-limit", type=float, default=10.0)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sweep", help="model-mismatch grid, J3 and J4")
    _add_scenario_args(p, mismatch_lists=True)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost", help="J1 and J2 from trace CSV files")
    p.add_argument("--nominal", required=True, type=Path)
    p.add_argument("--candidates", required=True, help="comma-separated trace CSVs")
    p.add_argument("--worst", help="normalizing trace; defaults to the first candidate")
    p.add_argument("--gamma", help="evaluation window 'start,stop' in seconds")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_cost)

    for name, role in (("live-local", LOCAL), ("live-remote", REMOTE)):
        p = sub.add_parser(name, help=f"real-time {role} role over UDP")
        _add_scenario_args(p)
        p.add_argument("--bind", default="0.0.0.0:47001" if role == REMOTE else "0.0.0.0:47000")
        p.add_argument("--peer", default="127.0.0.1:47000" if role == REMOTE else "127.0.0.1:47001")
        p.add_argument("--session-timeout", type=float, default=30.0)
        p.add_argument("--out", type=Path)
        p.set_defaults(func=lambda a, r=role: cmd_live(a, r))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
