"""Command-line entry point: ``edgebound {bounds,simulate,verify,experiment}``.

Exit codes: 0 all checks passed, 1 configuration error or admission
rejection, 2 bound or invariant violation.  Output directories default to
``$EDGEBOUND_OUT`` (or ``./out``).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import metrics
from .bounds import ConditionError, InfeasibleBound, scenario_bounds
from .engine import PACKET_COLUMNS, TRACE_COLUMNS, EventTrace, Simulation
from .experiments import SUITES, run_suite
from .model import ConfigError, load_scenario

OK, CONFIG_ERROR, VIOLATION = 0, 1, 2


def _out_dir(arg) -> Path:
    d = Path(arg or os.environ.get("EDGEBOUND_OUT", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=str) + "\n")


def cmd_bounds(args) -> int:
    sc = load_scenario(args.scenario)
    report = scenario_bounds(sc, restricted=False if args.general else None)
    out = _out_dir(args.out)
    _dump(out / "bounds.json", report.to_dict())
    print(report.table())
    if not report.admitted:
        print("admission rejected: " + "; ".join(report.reasons), file=sys.stderr)
        return CONFIG_ERROR
    return OK


def write_trace(path: Path, trace: EventTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        w.writerows(trace.records)


def read_trace(path) -> EventTrace:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        if header != TRACE_COLUMNS:
            raise ConfigError(f"{path}: unexpected header {header}")
        recs = []
        for row in r:
            t, seq, kind, pid, flow, cls, stage, node, size = row
            recs.append((int(t), int(seq), kind, int(pid), flow, int(cls), int(stage), node, int(size)))
    return EventTrace(recs)


def write_packets(path: Path, packets) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PACKET_COLUMNS)
        for p in packets:
            delivered = p.hops[-1].departure if p.delivered else ""
            shaper_delay = p.ingress_time - p.emit_time if p.ingress_time is not None else ""
            w.writerow([p.id, p.flow_id, p.class_id, p.size, p.emit_time,
                        "" if p.ingress_time is None else p.ingress_time, delivered,
                        "" if p.delay is None else p.delay, shaper_delay])


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc.run.seed = args.seed
    report = scenario_bounds(sc)
    res = Simulation(sc).run(args.horizon)
    out = _out_dir(args.out)
    write_trace(out / "trace.csv", res.trace)
    write_packets(out / "packets.csv", res.packets)
    summary = res.summary(report if report.admitted else None)
    summary["admitted"] = report.admitted
    _dump(out / "summary.json", summary)
    bad = sum(c.get("violations", 0) for c in summary["classes"].values())
    print(f"{summary['delivered']} delivered, {summary['in_flight']} in flight, "
          f"max BI {summary['max_BI']}, bound violations {bad}")
    return VIOLATION if bad else OK


def _parse_budgets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"budget {item!r} must look like FLOW=BITS")
        k, v = item.split("=", 1)
        out[k] = int(v)
    return out


def cmd_verify(args) -> int:
    trace = read_trace(args.trace)
    budgets = _parse_budgets(args.budget)
    failed = False
    stage1 = [r for r in trace.records if r[2] == "arrival" and r[6] == args.stage]
    checks = [(f, [r for r in stage1 if r[4] == f], b) for f, b in sorted(budgets.items())]
    if args.aggregate is not None:
        checks.append(("*", stage1, args.aggregate))
    for name, recs, budget in checks:
        times = [r[0] for r in recs]
        sizes = [r[8] for r in recs]
        worst, at = metrics.sliding_window_max(times, sizes, args.window)
        bad = metrics.window_violations(times, sizes, args.window, budget)
        status = "PASS" if not bad else "FAIL"
        failed |= bool(bad)
        print(f"{status} flow={name} window={args.window} budget={budget} max={worst} at t={at}")
        for t, vol in bad[:10]:
            print(f"    witness [{t}, {t + args.window}) carries {vol} bits")
    if args.work_conserving:
        gaps = metrics.audit_work_conservation(trace)
        print(f"{'PASS' if not gaps else 'FAIL'} work conservation ({len(gaps)} idle gaps with backlog)")
        failed |= bool(gaps)
    return VIOLATION if failed else OK


def _seeds(spec: str):
    if "-" in spec:
        a, b = spec.split("-", 1)
        return range(int(a), int(b) + 1)
    return range(int(spec))


def cmd_experiment(args) -> int:
    summary = run_suite(args.suite, _seeds(args.seeds))
    out = _out_dir(args.out)
    _dump(out / f"{args.suite}.json", summary)
    if summary.get("reproduction"):
        _dump(out / f"{args.suite}-reproduction.json", summary["reproduction"])
    brief = {k: v for k, v in summary.items() if k not in ("results", "reproduction")}
    print(json.dumps(brief, indent=2, default=str))
    return OK if summary["ok"] else VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgebound", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="compute per-class delay bounds and admission")
    b.add_argument("--scenario", required=True)
    b.add_argument("--out")
    b.add_argument("--general", action="store_true", help="use the general (non-integral ratio) form")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="run a scenario and write trace/packet/summary files")
    s.add_argument("--scenario", required=True)
    s.add_argument("--horizon", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check window budgets on a trace.csv")
    v.add_argument("--trace", required=True)
    v.add_argument("--window", type=int, required=True)
    v.add_argument("--budget", action="append", help="FLOW=BITS, repeatable")
    v.add_argument("--aggregate", type=int, help="budget for all flows together")
    v.add_argument("--stage", type=int, default=1)
    v.add_argument("--work-conserving", action="store_true")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="run a named scenario family")
    e.add_argument("--suite", required=True, choices=SUITES)
    e.add_argument("--seeds", default="100", help="count N or inclusive range A-B")
    e.add_argument("--out")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConditionError, InfeasibleBound, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
