"""Snapshots, CSV/JSON exports and DOT rendering.

Every writer is deterministic: rationals in normal form "num/den", JSON keys
sorted, files newline-terminated.  Strings are written bit by bit, with "e"
for the empty string.
"""
from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from .engine import RunConfig, StageEvent
from .flow import FlowTable
from .network import EdgeRecord, NetworkState
from .rationals import ZERO, format_rat, parse_rat, pow2
from .requirements import LedgerEntry, TestLedger
from .strings import decode, encode, from_index

SNAPSHOT_FORMAT = "semiflow-snapshot"
EXPORT_FORMAT = "semiflow-export"
VERSION = 1
DOT_MAX_DEPTH = 8


class SnapshotError(ValueError):
    """Malformed or incompatible snapshot document; the message names the location."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=True) + "\n"


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


# -- delays as run-length exceptions --------------------------------------------------

def encode_level(counters: np.ndarray, default: int) -> dict:
    cuts = np.flatnonzero(np.diff(counters)) + 1
    bounds = [0, *cuts.tolist(), len(counters)]
    runs = [[a, b, int(counters[a])] for a, b in zip(bounds, bounds[1:]) if counters[a] != default]
    return {"default": int(default), "runs": runs}


def decode_level(doc: dict, n: int, where: str) -> np.ndarray:
    try:
        default = int(doc["default"])
        out = np.full(1 << n, default, dtype=np.int64)
        for r, (a, b, k) in enumerate(doc["runs"]):
            if not 0 <= a < b <= (1 << n) or k < 0:
                raise SnapshotError(f"{where}.runs[{r}]: bad run {[a, b, k]}")
            out[a:b] = k
    except SnapshotError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError(f"{where}: {exc!r}") from None
    if default < 0:
        raise SnapshotError(f"{where}.default: negative counter")
    return out


# -- records -------------------------------------------------------------------------

def edge_to_dict(e: EdgeRecord) -> dict:
    return {"start": encode(e.start), "end": encode(e.end), "task": e.task,
            "stage": e.stage_added, "fraction": format_rat(e.flow_fraction)}


def edge_from_dict(d: dict) -> EdgeRecord:
    return EdgeRecord(decode(d["start"]), decode(d["end"]), int(d["task"]), int(d["stage"]), parse_rat(d["fraction"]))


def event_to_dict(ev: StageEvent) -> dict:
    return {
        "stage": ev.stage, "case": ev.case, "task": ev.task, "w": ev.w_value,
        "candidates": [encode(c) for c in ev.candidates],
        "edges": [edge_to_dict(e) for e in ev.edges],
        "injured_tasks": list(ev.injured_tasks),
        "activation_delay": None if ev.activation_delay is None else format_rat(ev.activation_delay),
    }


def event_from_dict(d: dict) -> StageEvent:
    delay = d.get("activation_delay")
    return StageEvent(
        stage=int(d["stage"]), case=d["case"], task=int(d["task"]), w_value=int(d["w"]),
        candidates=tuple(decode(c) for c in d["candidates"]),
        edges=tuple(edge_from_dict(e) for e in d["edges"]),
        injured_tasks=tuple(int(k) for k in d["injured_tasks"]),
        activation_delay=None if delay is None else parse_rat(delay),
    )


def entry_to_dict(x: LedgerEntry) -> dict:
    d = {"eta": encode(x.eta), "weight": format_rat(x.weight), "start": encode(x.start),
         "end": encode(x.end), "stage": x.stage, "j": x.j}
    if x.e is not None:
        d["e"] = x.e
    return d


def entry_from_dict(d: dict) -> LedgerEntry:
    return LedgerEntry(decode(d["eta"]), parse_rat(d["weight"]), decode(d["start"]),
                       decode(d["end"]), int(d["stage"]), int(d["j"]), d.get("e"))


def ledger_to_dict(ledger: Optional[TestLedger]) -> dict:
    if ledger is None:
        return {"mode": None, "tests": []}
    tests = []
    for s in ledger.levels():
        items = ledger.entries[s]
        mass = sum((x.weight for x in items), ZERO)
        tests.append({"s": s, "mass": format_rat(mass), "bound": format_rat(pow2(-s)),
                      "entries": [entry_to_dict(x) for x in items]})
    return {"mode": ledger.mode, "tests": tests}


def ledger_from_dict(d: dict) -> Optional[TestLedger]:
    if d.get("mode") is None:
        return None
    led = TestLedger(d["mode"])
    for t in d["tests"]:
        for x in t["entries"]:
            led.add(int(t["s"]), entry_from_dict(x))
    return led


# -- snapshot ------------------------------------------------------------------------

def snapshot(state: NetworkState, config: RunConfig) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": VERSION,
        "config": config.to_dict(),
        "depth": state.depth,
        "stage": state.stage,
        "delays": [encode_level(c, state.level_default[n]) for n, c in enumerate(state.counters)],
        "edges": [edge_to_dict(e) for e in state.edges],
        "events": [event_to_dict(ev) for ev in state.events],
        "ledger": ledger_to_dict(state.ledger),
    }


def _field(doc: dict, key: str, where: str = ""):
    if not isinstance(doc, dict) or key not in doc:
        raise SnapshotError(f"{where or 'document'}: missing field {key!r}")
    return doc[key]


def restore(doc: dict):
    """Inverse of ``snapshot``: returns (state, config)."""
    if _field(doc, "format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"format: expected {SNAPSHOT_FORMAT!r}, got {doc['format']!r}")
    if _field(doc, "version") != VERSION:
        raise SnapshotError(f"version: expected {VERSION}, got {doc['version']!r}")
    try:
        config = RunConfig.from_dict(_field(doc, "config")).validate()
    except ValueError as exc:
        raise SnapshotError(f"config: {exc}") from None
    depth, stage = _field(doc, "depth"), _field(doc, "stage")
    if not isinstance(depth, int) or not isinstance(stage, int) or not 0 <= stage <= depth:
        raise SnapshotError(f"depth/stage: {depth!r}/{stage!r}")
    delays = _field(doc, "delays")
    if len(delays) != depth + 1:
        raise SnapshotError(f"delays: {len(delays)} levels for depth {depth}")
    counters = [decode_level(lv, n, f"delays[{n}]") for n, lv in enumerate(delays)]
    defaults = [int(lv["default"]) for lv in delays]
    edges = []
    for i, e in enumerate(_field(doc, "edges")):
        try:
            edges.append(edge_from_dict(e))
        except Exception as exc:  # any malformed record
            raise SnapshotError(f"edges[{i}]: {exc}") from None
    events = []
    for i, ev in enumerate(_field(doc, "events")):
        try:
            events.append(event_from_dict(ev))
        except Exception as exc:
            raise SnapshotError(f"events[{i}]: {exc}") from None
    try:
        ledger = ledger_from_dict(_field(doc, "ledger"))
    except SnapshotError:
        raise
    except Exception as exc:
        raise SnapshotError(f"ledger: {exc}") from None
    try:
        state = NetworkState(depth=depth, counters=counters, level_default=defaults, edges=edges,
                             stage=stage, events=events, ledger=ledger)
    except Exception as exc:
        raise SnapshotError(f"edges: {exc}") from None
    return state, config


def load_snapshot(path) -> tuple:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SnapshotError(f"{path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return restore(doc)


# -- CSV ----------------------------------------------------------------------------

def _csv(header: List[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def edges_csv(state: NetworkState) -> str:
    return _csv(["stage", "task", "start", "end", "fraction"],
                ([e.stage_added, e.task, encode(e.start), encode(e.end), format_rat(e.flow_fraction)]
                 for e in state.edges))


def flows_csv(table: FlowTable, depth: Optional[int] = None) -> str:
    depth = table.depth if depth is None else min(depth, table.depth)
    rows = ([encode(from_index(n, i)), format_rat(table.R[n][i]), format_rat(table.P[n][i])]
            for n in range(depth + 1) for i in range(1 << n))
    return _csv(["node", "R", "P"], rows)


def levels_csv(table: FlowTable) -> str:
    rows = ([n, format_rat(table.S[n]), format_rat(table.level_r_sum(n)), format_rat(table.level_p_sum(n))]
            for n in range(table.depth + 1))
    return _csv(["n", "S_n", "R_sum", "P_sum"], rows)


def events_jsonl(state: NetworkState) -> str:
    return "".join(json.dumps(event_to_dict(ev), sort_keys=True) + "\n" for ev in state.events)


# -- JSON export ----------------------------------------------------------------------

def export_json(state: NetworkState, config: RunConfig, table: FlowTable, depth_cap: Optional[int] = None) -> dict:
    cap = table.depth if depth_cap is None else min(depth_cap, table.depth)
    nodes = [{"node": encode(from_index(n, i)), "delay": int(state.counters[n][i]),
              "R": format_rat(table.R[n][i]), "P": format_rat(table.P[n][i])}
             for n in range(cap + 1) for i in range(1 << n)]
    levels = [{"n": n, "S": format_rat(table.S[n]), "R_sum": format_rat(table.level_r_sum(n)),
               "P_sum": format_rat(table.level_p_sum(n))} for n in range(table.depth + 1)]
    return {
        "format": EXPORT_FORMAT,
        "version": VERSION,
        "config": config.to_dict(),
        "depth": table.depth,
        "depth_cap": cap,
        "levels": levels,
        "nodes": nodes,
        "edges": [edge_to_dict(e) for e in state.edges],
    }


def export_schema() -> dict:
    return json.loads(resources.files("semiflow").joinpath("export.schema.json").read_text())


# -- DOT ------------------------------------------------------------------------------

def to_dot(state: NetworkState, table: Optional[FlowTable] = None, depth_cap: int = 4) -> str:
    """Tree to depth_cap with delays on the nodes and extra edges in red.

    Delay counter k shows as "d=1/k"; edge targets (delay 0 set by an edge)
    are boxed, fan nodes shaded.
    """
    if not 0 <= depth_cap <= DOT_MAX_DEPTH:
        raise ValueError(f"dot export limited to depth {DOT_MAX_DEPTH}")
    cap = min(depth_cap, state.depth)
    targets = {e.end for e in state.edges if len(e.end) <= cap}
    fans = set()
    for e in state.edges:
        n = len(e.end)
        if n > cap:
            continue
        lo = int(e.start, 2) << (n - len(e.start)) if e.start else 0
        for i in range(lo, lo + (1 << (n - len(e.start)))):
            node = from_index(n, i)
            if node != e.end:
                fans.add(node)
    lines = ["digraph network {", '\tgraph [rankdir=TB];', '\tnode [fontname="Helvetica", fontsize=10];']
    for n in range(cap + 1):
        lines.append("\t{ rank = same;")
        for i in range(1 << n):
            sigma = from_index(n, i)
            k = int(state.counters[n][i])
            label = encode(sigma) + (f"\\nd=1/{k}" if k else "")
            if table is not None and n <= table.depth:
                label += f"\\nP={format_rat(table.P[n][i])}"
            attrs = [f'label="{label}"']
            if sigma in targets:
                attrs.append("shape=box")
            if sigma in fans:
                attrs += ["style=filled", "fillcolor=lightgrey"]
            lines.append(f'\t\t"{encode(sigma)}" [{", ".join(attrs)}];')
        lines.append("\t}")
    for n in range(cap):
        for i in range(1 << n):
            sigma = from_index(n, i)
            for b in "01":
                lines.append(f'\t"{encode(sigma)}" -> "{sigma + b}";')
    for e in state.edges:
        if len(e.end) <= cap:
            lines.append(f'\t"{encode(e.start)}" -> "{e.end}" [color=red, style=dashed, '
                         f'label="{format_rat(e.flow_fraction)}", constraint=false];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- bundles --------------------------------------------------------------------------

def write_build(outdir, state: NetworkState, config: RunConfig, table: FlowTable,
                report: dict, flows_depth: int = 12) -> Dict[str, Path]:
    outdir = Path(outdir)
    files = {
        "snapshot.json": dumps(snapshot(state, config)),
        "edges.csv": edges_csv(state),
        "flows.csv": flows_csv(table, flows_depth),
        "levels.csv": levels_csv(table),
        "ledger.json": dumps(ledger_to_dict(state.ledger)),
        "events.jsonl": events_jsonl(state),
        "report.json": dumps(report),
    }
    return {name: write_text(outdir / name, text) for name, text in files.items()}
