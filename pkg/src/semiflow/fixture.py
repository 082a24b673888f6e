"""The hand-derived ALWAYS trace, delta = 1/2 (n0 = 2), stages 1-8.

Each stage lists its logged event and the delay layout it leaves on its
own level (counter k means delay 1/k; runs are half-open index ranges
that differ from the level default).
"""
from __future__ import annotations

import json
from typing import List

from .engine import RunConfig, new_state, advance, run
from .flow import flow_table
from .io import encode_level, event_to_dict
from .rationals import format_rat


def _edge(start, end, fraction, stage):
    return {"start": start, "end": end, "task": 1, "stage": stage, "fraction": fraction}


def _event(stage, case, task, w, candidates=(), edges=(), injured=(), delay=None):
    return {"stage": stage, "case": case, "task": task, "w": w, "candidates": list(candidates),
            "edges": list(edges), "injured_tasks": list(injured), "activation_delay": delay}


FIXTURE_CONFIG = {"depth": 8, "delta": "1/2", "mode": "always", "countdown": "default", "seed": 0}

EXPECTED_TRACE = [
    {"event": _event(1, "INITIAL_ACTIVATION", 1, 1, delay="1/9"),
     "level": {"default": 9, "runs": []}},
    {"event": _event(2, "NOOP", 0, 0),
     "level": {"default": 0, "runs": []}},
    {"event": _event(3, "EDGES_ADDED", 1, 1, ["0", "1"],
                     [_edge("0", "000", "1/9", 3), _edge("1", "100", "1/9", 3)]),
     "level": {"default": 0, "runs": [[1, 4, 8], [5, 8, 8]]}},
    {"event": _event(4, "INITIAL_ACTIVATION", 2, 4, delay="1/36"),
     "level": {"default": 36, "runs": []}},
    {"event": _event(5, "NOOP", 0, 0),
     "level": {"default": 0, "runs": []}},
    {"event": _event(6, "EDGES_ADDED", 1, 1, ["001", "010", "011", "101", "110", "111"],
                     [_edge(s, s + "000", "1/8", 6) for s in ("001", "010", "011", "101", "110", "111")],
                     injured=[2]),
     "level": {"default": 0, "runs": [[9, 16, 7], [17, 24, 7], [25, 32, 7], [41, 48, 7], [49, 56, 7], [57, 64, 7]]}},
    {"event": _event(7, "INITIAL_ACTIVATION", 2, 7, delay="1/81"),
     "level": {"default": 81, "runs": []}},
    {"event": _event(8, "INITIAL_ACTIVATION", 3, 8, delay="1/100"),
     "level": {"default": 100, "runs": []}},
]

# values on the stage-3 state, tables to depth 3
EXPECTED_VALUES = {"R(000)": "1/6", "R(00)": "2/9", "P(00)": "5/18", "S_2": "8/9"}


def fixture_config() -> RunConfig:
    return RunConfig.from_dict(FIXTURE_CONFIG)


def observed_trace() -> List[dict]:
    state = run(fixture_config()).state
    return [{"event": event_to_dict(ev), "level": encode_level(state.counters[ev.stage], state.level_default[ev.stage])}
            for ev in state.events]


def observed_values() -> dict:
    config = fixture_config()
    table = flow_table(advance(new_state(config), config, 3), 3)
    return {"R(000)": format_rat(table.r("000")), "R(00)": format_rat(table.r("00")),
            "P(00)": format_rat(table.p("00")), "S_2": format_rat(table.S[2])}


def diff_fixture() -> List[str]:
    """Human-readable mismatches between the documented and a fresh trace; empty if equal."""
    lines = []
    got = observed_trace()
    if len(got) != len(EXPECTED_TRACE):
        lines.append(f"stage count: expected {len(EXPECTED_TRACE)}, got {len(got)}")
    for want, have in zip(EXPECTED_TRACE, got):
        if want != have:
            stage = want["event"]["stage"]
            lines.append(f"- stage {stage}: {json.dumps(want, sort_keys=True)}")
            lines.append(f"+ stage {stage}: {json.dumps(have, sort_keys=True)}")
    values = observed_values()
    for key, want in EXPECTED_VALUES.items():
        have = values[key]
        if have != want:
            lines.append(f"{key}: expected {want}, got {have}")
    return lines
