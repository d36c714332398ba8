"""Command-line front end: ``latticemon replay | simulate | paths``.

Exit status: 0 when no formula in the frontier bag is false, 1 when one is,
2 on malformed input or protocol errors, 3 when a budget is exceeded.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, load_config
from .errors import BudgetExceeded, LatticemonError, ParseError
from .instrumentation import format_event_log, parse_event_line
from .lattice import Lattice
from .ltl import show
from .sim import Scenario, inject_fault, run_scenario

EXIT_OK, EXIT_FALSE, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2, 3

KV_KEYS = (
    "observed_events", "live_nodes", "removed_nodes", "created_nodes", "frontier_clock",
    "path_count", "formulas_false", "formulas_open", "formulas_true",
)


def _clock_text(c) -> str:
    return ",".join(map(str, c))


def format_report(report: dict, fmt: str = "text", prop=None, prop_name: str = "φ") -> str:
    """Render a lattice report; ``kv`` is one ``key=value`` per line."""
    if fmt == "kv":
        lines = []
        for key in KV_KEYS:
            v = report[key]
            lines.append(f"{key}={_clock_text(v) if key == 'frontier_clock' else v}")
        return "\n".join(lines) + "\n"
    names = {prop: prop_name} if prop is not None else {}
    lines = [f"{key}: {_clock_text(report[key]) if key == 'frontier_clock' else report[key]}" for key in KV_KEYS]
    bag = report["frontier_formulas"]
    if bag:
        lines.append("frontier_formulas:")
        for text, mult in sorted((show(f, names), n) for f, n in bag.items()):
            lines.append(f"  {mult} x {text}")
    return "\n".join(lines) + "\n"


def exit_status(report: dict) -> int:
    return EXIT_FALSE if report["formulas_false"] else EXIT_OK


def _read_events(path: str, lattice: Lattice | None = None) -> list:
    """Parse an event log; when ``lattice`` is given each event is fed as soon as it is read."""
    stream = sys.stdin if path == "-" else open(path, encoding="utf-8")
    events = []
    try:
        for n, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            e = parse_event_line(line, n)
            if lattice is not None:
                try:
                    lattice.make(e)
                except LatticemonError as exc:
                    raise ParseError(str(exc), n) from None
            events.append(e)
    finally:
        if stream is not sys.stdin:
            stream.close()
    return events


def _lattice(cfg: RunConfig, prune: bool) -> Lattice:
    return Lattice(cfg.system, cfg.formula, prune=prune)


def cmd_replay(args) -> int:
    cfg = load_config(args.config)
    lat = _lattice(cfg, cfg.prune and not args.no_prune)
    _read_events(args.events, lat)
    report = lat.report(with_paths=False)
    sys.stdout.write(format_report(report, args.report or cfg.format, cfg.formula))
    return exit_status(report)


def scenario_from_config(cfg: RunConfig, seed: int | None = None) -> Scenario:
    s = Scenario(
        system=cfg.system,
        policy=cfg.policy,
        seed=cfg.seed if seed is None else seed,
        script=cfg.script,
        delivery=cfg.delivery,
        delivery_seed=cfg.delivery_seed if seed is None else seed,
        delivery_script=cfg.delivery_script,
        steps=cfg.steps,
        property=cfg.formula,
        prune=cfg.prune,
    )
    if cfg.fault:
        s = inject_fault(s, cfg.fault)
    return s


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    result = run_scenario(scenario_from_config(cfg, args.seed))
    if args.emit_events:
        with open(args.emit_events, "w", encoding="utf-8") as fh:
            fh.write(format_event_log(result.events))
    report = result.lattice.report(with_paths=False)
    sys.stdout.write(format_report(report, args.report or cfg.format, cfg.formula))
    return exit_status(report)


def format_path(states, labels) -> str:
    def st(q):
        return "(" + ",".join(str(x) for x in q) + ")"

    out = [st(states[0])]
    for lab, q in zip(labels, states[1:]):
        out.append("{" + ",".join(sorted(lab)) + "}")
        out.append(st(q))
    return " ".join(out)


def cmd_paths(args) -> int:
    cfg = load_config(args.config)
    lat = _lattice(cfg, prune=False)
    _read_events(args.events, lat)
    for states, labels in lat.paths(limit=args.max if args.max is not None else cfg.max_paths):
        print(format_path(states, labels))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latticemon", description="Lattice-based LTL monitoring of component systems.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("replay", help="feed an event log to the monitor")
    r.add_argument("--config", required=True)
    r.add_argument("--events", required=True, help="event log, '-' for standard input")
    r.add_argument("--no-prune", action="store_true")
    r.add_argument("--report", choices=("text", "kv"))
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("simulate", help="run a model and monitor the emitted events")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--emit-events")
    s.add_argument("--report", choices=("text", "kv"))
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("paths", help="list every path of the lattice")
    q.add_argument("--config", required=True)
    q.add_argument("--events", required=True)
    q.add_argument("--max", type=int)
    q.set_defaults(func=cmd_paths)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"latticemon: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (LatticemonError, OSError, ValueError) as exc:
        print(f"latticemon: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
