import json
import random

import pytest
from hypothesis import given, strategies as st

from conftest import shipped_run
from semiflow import harness
from semiflow.engine import RunConfig, advance, new_state, run
from semiflow.flow import flow_table
from semiflow.io import dumps, restore, snapshot
from semiflow.network import EdgeRecord, NetworkState
from semiflow.rationals import ONE, rat_make
from semiflow.strings import from_index


def corrupted(result, edit):
    """Restore a run after editing its snapshot document."""
    doc = json.loads(dumps(snapshot(result.state, result.config)))
    edit(doc)
    return restore(doc)


def fails(report, fragment=""):
    return report.verdict == "fail" and report.witnesses and any(fragment in w for w in report.witnesses)


# -- aggregate ------------------------------------------------------------------------

def test_shipped_runs_pass(shipped):
    ok, reports = harness.verify(shipped.state, shipped.config, shipped.table)
    assert ok, [r.to_dict() for r in reports if not r.ok]
    assert [r.name for r in reports] == sorted(r.name for r in reports)


def test_reports_are_ordered_and_complete(fixture_run):
    _, reports = harness.verify(fixture_run.state, fixture_run.config, fixture_run.table)
    assert {r.name for r in reports} == {
        "continuations", "cutoff", "discard", "events", "flow_laws", "halving", "ledger",
        "measure_bound", "semimeasure", "structure"}


# -- semi-measure ---------------------------------------------------------------------

def test_lowered_p_is_caught(fixture_run):
    table = flow_table(fixture_run.state, 8)
    table.P[2][1] = table.P[2][1] / 4
    assert fails(harness.check_semimeasure(table), "01")


def test_uniform_table_passes():
    report = harness.check_semimeasure(flow_table(NetworkState.fresh(6), 6))
    assert report.verdict == "pass" and report.values["P_root"] == "1/1"


# -- measure bound ----------------------------------------------------------------------

def test_mlr_bound_and_margin():
    result = shipped_run("mlr_n20")
    report = harness.check_measure_bound(result.state, result.table, result.config.make_countdown())
    assert report.verdict == "pass"
    assert result.table.S[20] > rat_make(3, 5)


def test_stress_run_is_exempt():
    result = shipped_run("stress_c2_n14")
    report = harness.check_measure_bound(result.state, result.table, result.config.make_countdown())
    assert report.verdict == "exempt" and report.ok and "constant:2" in report.notice


def test_fixture_first_loss():
    result = shipped_run("fixture_always_n8")
    table = result.table
    assert table.S[2] == ONE - rat_make(1, 9) * table.level_r_sum(1)


def test_delay_on_noop_level_is_caught(fixture_run):
    state, config = corrupted(fixture_run, lambda d: d["delays"][5].update(default=3))
    report = harness.check_measure_bound(state, flow_table(state, 8), config.make_countdown())
    assert fails(report, "stage 5")


# -- cut-off --------------------------------------------------------------------------

def test_cutoff_on_fresh_and_stress():
    fresh = NetworkState.fresh(5)
    assert harness.check_cutoff(fresh, flow_table(fresh, 5)).verdict == "pass"
    stress = shipped_run("stress_c2_n14")
    report = harness.check_cutoff(stress.state, stress.table)
    assert report.verdict == "pass" and int(report.values["blocked_nodes"]) > 0


def test_stale_table_is_caught(fixture_run):
    state = fixture_run.state.copy()
    table = flow_table(state, 8)
    state.set_node(2, 0, 1)
    assert fails(harness.check_cutoff(state, table), "blocked prefix")


# -- structure -----------------------------------------------------------------------

def test_nested_pair_is_caught():
    state = NetworkState.fresh(6)
    state.add_edge(EdgeRecord("0", "0000", 1, 4, rat_make(1, 9)))
    state.add_edge(EdgeRecord("00", "00000", 1, 5, rat_make(1, 9)))
    assert harness.nested_pairs(state.edges)
    assert fails(harness.check_structure(state), "nested")


def test_empty_edge_set_passes():
    assert harness.check_structure(NetworkState.fresh(4)).verdict == "pass"


def test_fixture_structure_passes(fixture_run):
    assert harness.check_structure(fixture_run.state).verdict == "pass"


# -- halving --------------------------------------------------------------------------

def test_crossing_edge_is_caught(fixture_run):
    state = fixture_run.state.copy()
    # w(2) = 7 after stage 6; a higher-task edge over level 7 leaves w alone
    state.add_edge(EdgeRecord("00000", "00000000", 3, 8, ONE))
    assert fails(harness.check_halving(state, flow_table(state, 8)), "crosses level w = 7")


def test_halving_levels_in_fixture(fixture_run):
    report = harness.check_halving(fixture_run.state, fixture_run.table)
    assert report.verdict == "pass"
    assert {"max_P_level_1", "max_P_level_7", "max_P_level_8"} <= set(report.values)


# -- events, discard, continuations, ledger ----------------------------------------------

def test_relabelled_event_is_caught(fixture_run):
    state, config = corrupted(fixture_run, lambda d: d["events"][1].update(case="EDGES_ADDED"))
    assert fails(harness.check_events(state, config.make_countdown()), "stage 2")


def test_edge_below_discarded_node_is_caught():
    state = NetworkState.fresh(6)
    state.set_node(2, 0, 1)
    state.set_node(1, 0, 4)
    state.add_edge(EdgeRecord("0", "0000", 1, 4, rat_make(1, 4)))
    assert fails(harness.check_discard(state), "discarded 00")


def test_non_least_target_is_caught(fixture_run):
    def move_target(doc):
        doc["edges"][0]["end"] = "001"
        doc["delays"][3]["runs"] = [[0, 1, 8], [2, 4, 8], [5, 8, 8]]
    state, config = corrupted(fixture_run, move_target)
    assert fails(harness.check_continuations(state, config.make_predicate()), "smaller target 000")


def test_tampered_ledger_is_caught():
    result = shipped_run("mlr_n20")
    state, config = corrupted(result, lambda d: d["ledger"]["tests"][0]["entries"][0].update(weight="1/2"))
    assert fails(harness.check_ledger(state, config.make_predicate()), "differs")


def test_ledger_values_for_mlr():
    result = shipped_run("mlr_n20")
    report = harness.check_ledger(result.state, result.config.make_predicate())
    assert report.verdict == "pass" and report.values == {"mass_s0": "17/512"}


# -- brute-force q-flow -------------------------------------------------------------------

def test_bruteforce_examples():
    fresh = NetworkState.fresh(4)
    assert harness.bruteforce_qflow(fresh, "01", 4) == rat_make(1, 4)
    config = RunConfig(mode="always", depth=8)
    state = advance(new_state(config), config, 3)
    assert harness.bruteforce_qflow(state, "00", 3) == rat_make(5, 18)
    with pytest.raises(ValueError):
        harness.bruteforce_qflow(fresh, "", 6)


def test_antichain_counts():
    # a(0) = 2, a(h) = a(h-1)**2 + 1 prefix-free sets (empty one included) in a height-h tree
    a = [2]
    for _ in range(3):
        a.append(a[-1] ** 2 + 1)
    assert [sum(1 for _ in harness.antichains("", h)) for h in range(4)] == [x - 1 for x in a]


@given(st.integers(0, 10**9), st.integers(1, 3))
def test_maximal_sets_suffice(seed, depth):
    state = harness.random_sparse_state(random.Random(seed), depth)
    R = harness.naive_inflow(state, depth)
    for n in range(depth + 1):
        for i in range(1 << n):
            sigma = from_index(n, i)
            explicit = max(sum((R[t] for t in d), 0) for d in harness.antichains(sigma, depth))
            assert harness.bruteforce_qflow(state, sigma, depth, R) == explicit


@given(st.integers(0, 10**9), st.integers(2, 5))
def test_recursion_matches_oracle(seed, depth):
    state = harness.random_sparse_state(random.Random(seed), depth)
    assert harness.check_qflow_oracle(state, flow_table(state, depth)).verdict == "pass"


# -- progress diagnostics ----------------------------------------------------------------

def test_fixture_progress(fixture_run):
    progress = harness.task_progress(fixture_run.state, fixture_run.config.make_predicate())
    assert progress[0]["status"] == "inert"
    assert progress[1]["status"] == "fired" and progress[1]["fired_stages"][0] == 3
    assert all("diagnostic" in p["label"] for p in progress)


def test_diverging_requirement_stays_pending():
    config = RunConfig(mode="mlr", depth=14, catalog=("diverge_after:0",))
    result = run(config)
    progress = harness.task_progress(result.state, config.make_predicate())
    assert progress[1]["requirement"] == [0, 0]
    assert progress[1]["status"] == "pending, (c) never satisfied"


def test_fail_verdicts_carry_witnesses(fixture_run):
    state, config = corrupted(fixture_run, lambda d: d["delays"][2].update(default=1))
    ok, reports = harness.verify(state, config)
    assert not ok
    for r in reports:
        assert r.verdict in ("pass", "fail", "exempt")
        if r.verdict == "fail":
            assert r.witnesses
