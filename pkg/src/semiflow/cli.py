"""Command line: build, verify, sample, export, fixture.

Exit codes: 0 pass, 1 a check or diff failed, 2 usage/config/input error.
SEMIFLOW_OUT overrides the output directory named in a config.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import bridge, harness, io
from .engine import ConfigError, RunConfig, run, summarize
from .fixture import diff_fixture
from .flow import flow_table
from .rationals import format_rat
from .strings import from_index

OUT_ENV = "SEMIFLOW_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_dir(flag: Optional[str], config_doc: dict) -> Path:
    if flag:
        return Path(flag)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    outputs = config_doc.get("outputs") or {}
    return Path(outputs.get("dir", "out"))


def _load_config(path: str) -> tuple:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    try:
        return RunConfig.from_dict(doc).validate(), doc
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}")


def _load(path: str):
    try:
        return io.load_snapshot(path)
    except io.SnapshotError as exc:
        raise UsageError(str(exc))


def _emit(text: str, dest: Optional[str]) -> None:
    if dest:
        io.write_text(Path(dest), text)
    else:
        sys.stdout.write(text)


# -- subcommands -------------------------------------------------------------------

def cmd_build(args) -> int:
    config, doc = _load_config(args.config)
    result = run(config)
    report = dict(result.report)
    report["retained_lower_bound"] = format_rat(bridge.retained_lower_bound(result.table))
    report["flows_depth"] = min(args.flows_depth, result.table.depth)
    files = io.write_build(_out_dir(args.out, doc), result.state, config, result.table, report, args.flows_depth)
    sys.stdout.write(io.dumps({"files": sorted(str(p) for p in files.values()), "report": report}))
    return EXIT_OK


def cmd_verify(args) -> int:
    state, config = _load(args.snapshot)
    table = flow_table(state, min(state.depth, state.stage))
    ok, reports = harness.verify(state, config, table)
    doc = {
        "snapshot": str(args.snapshot),
        "verdict": "pass" if ok else "fail",
        "summary": summarize(config, state, table),
        "checks": [r.to_dict() for r in reports],
        "task_progress": harness.task_progress(state, config.make_predicate()),
    }
    _emit(io.dumps(doc), args.report)
    if not ok:
        for r in reports:
            if not r.ok:
                print(f"FAIL {r.name}: {r.witnesses[0] if r.witnesses else ''}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sample(args) -> int:
    if args.budget < 1:
        raise UsageError("--budget must be at least 1")
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    state, config = _load(args.snapshot)
    depth = min(state.depth, state.stage) if args.depth is None else args.depth
    if not 0 <= depth <= min(state.depth, state.stage):
        raise UsageError(f"--depth must lie in [0, {min(state.depth, state.stage)}]")
    table = flow_table(state, depth)
    try:
        imap = bridge.allocate_intervals(table)
    except bridge.AllocationError as exc:
        raise UsageError(str(exc))
    samples = bridge.sample_many(imap, args.seed, args.count, args.budget)
    lines = [json.dumps({"seed": s, "output": out, "status": st}, sort_keys=True) for s, out, st in samples]
    counts = bridge.cylinder_counts((out for _, out, _ in samples), args.summary_depth)
    statuses = {bridge.COMPLETE: 0, bridge.EXHAUSTED: 0}
    for _, _, st in samples:
        statuses[st] += 1
    cylinders = {}
    for n in range(min(args.summary_depth, depth) + 1):
        for i in range(1 << n):
            sigma = from_index(n, i)
            p = table.P[n][i]
            c = counts.get(sigma, 0)
            cylinders[sigma or "e"] = {
                "count": c,
                "frequency": None if args.count == 0 else c / args.count,
                "P": format_rat(p),
                "standard_error": None if args.count == 0 else (float(p) * (1 - float(p)) / args.count) ** 0.5,
            }
    summary = {"generator": bridge.GENERATOR, "seed": args.seed, "count": args.count, "budget": args.budget,
               "depth": depth, "statuses": statuses, "cylinders": cylinders}
    _emit("".join(line + "\n" for line in lines), args.out)
    text = json.dumps({"summary": summary}, sort_keys=True) + "\n"
    if args.summary:
        io.write_text(Path(args.summary), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export(args) -> int:
    state, config = _load(args.snapshot)
    depth = min(state.depth, state.stage)
    out = _out_dir(args.out, {})
    if args.format == "dot":
        cap = 4 if args.depth_cap is None else args.depth_cap
        if not 0 <= cap <= io.DOT_MAX_DEPTH:
            raise UsageError(f"--depth-cap for dot must lie in [0, {io.DOT_MAX_DEPTH}]")
        table = flow_table(state, min(cap, depth))
        paths = [io.write_text(out / "network.dot", io.to_dot(state, table, cap))]
    elif args.format == "csv":
        table = flow_table(state, depth)
        cap = 12 if args.depth_cap is None else args.depth_cap
        paths = [io.write_text(out / "edges.csv", io.edges_csv(state)),
                 io.write_text(out / "flows.csv", io.flows_csv(table, cap)),
                 io.write_text(out / "levels.csv", io.levels_csv(table))]
    else:
        table = flow_table(state, depth)
        cap = 12 if args.depth_cap is None else args.depth_cap
        paths = [io.write_text(out / "export.json", io.dumps(io.export_json(state, config, table, cap))),
                 io.write_text(out / "events.jsonl", io.events_jsonl(state))]
    sys.stdout.write(io.dumps({"files": [str(p) for p in paths]}))
    return EXIT_OK


def cmd_fixture(args) -> int:
    lines = diff_fixture()
    if lines:
        sys.stdout.write("".join(line + "\n" for line in lines))
        return EXIT_FAIL
    sys.stdout.write("fixture trace: stages 1-8 match\n")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semiflow", description="Exact depth-truncated flow networks on the binary tree.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every stage")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build", help="run the construction and write snapshot and exports")
    b.add_argument("config", help="config JSON")
    b.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, then outputs.dir, then ./out)")
    b.add_argument("--flows-depth", type=int, default=12, help="deepest level written to flows.csv")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="run every harness check on a snapshot")
    v.add_argument("snapshot")
    v.add_argument("--report", help="write the JSON report here instead of stdout")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sample", help="draw outputs of the interval functional")
    s.add_argument("snapshot")
    s.add_argument("--count", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget", type=int, default=64, help="random bits per sample")
    s.add_argument("--depth", type=int, help="table depth to allocate from (default: snapshot depth)")
    s.add_argument("--summary-depth", type=int, default=4, help="deepest cylinder in the summary")
    s.add_argument("--out", help="JSON lines file for the samples (default stdout)")
    s.add_argument("--summary", help="file for the summary line (default stdout, after the samples)")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("export", help="write dot, csv or json renderings of a snapshot")
    e.add_argument("snapshot")
    e.add_argument("--format", required=True, choices=["dot", "csv", "json"])
    e.add_argument("--depth-cap", type=int)
    e.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, then ./out)")
    e.set_defaults(func=cmd_export)

    f = sub.add_parser("fixture", help="diff the documented stage 1-8 trace against a fresh run")
    f.set_defaults(func=cmd_fixture)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"semiflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"semiflow: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
