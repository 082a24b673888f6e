import pytest
from hypothesis import given, strategies as st

from conftest import load_config, shipped_run
from semiflow.engine import (
    EDGES_ADDED, INITIAL_ACTIVATION, NOOP, ConfigError, Countdown, RunConfig, advance, beta,
    candidates, derive_n0, inverse_square_tail_below, new_state, resume, run, step, w_value,
)
from semiflow.fixture import EXPECTED_TRACE, observed_trace
from semiflow.io import dumps, snapshot
from semiflow.network import InvariantError, NetworkState
from semiflow.rationals import ONE, pow2, rat_make
from semiflow.requirements import AlwaysB, MLRB, build_catalog, ledger_mass

FIXTURE = RunConfig(mode="always", depth=8)


def fixture_at(stage):
    return advance(new_state(FIXTURE), FIXTURE, stage)


# -- configuration ------------------------------------------------------------------

def test_default_delta_gives_n0_two():
    assert derive_n0(rat_make(1, 2)) == 2
    assert FIXTURE.make_countdown()(1) == 9 and FIXTURE.make_countdown()(4) == 36


@pytest.mark.parametrize("delta", ["1/2", "1/3", "1/10", "9/10", "1/100"])
def test_derived_n0_is_least_certified(delta):
    n0 = derive_n0(delta)
    d = rat_make(*map(int, delta.split("/")))
    assert inverse_square_tail_below(n0, d)
    if n0 > 0:
        # sum_{k>=m} k^-2 >= sum_{m<=k<=M} k^-2 + 1/(M+1): n0 - 1 certifiably fails
        m, M = n0, n0 + 2000
        lower = sum(rat_make(1, k * k) for k in range(m, M + 1)) + rat_make(1, M + 1)
        assert lower >= d


@pytest.mark.parametrize("doc", [
    {"depth": 30}, {"depth": 1}, {"delta": "1/1"}, {"delta": "0/1"}, {"mode": "weird"},
    {"countdown": "constant:1"}, {"countdown": "sometimes"}, {"n0": 0}, {"seed": -1},
    {"catalog": ["teleport"]},
])
def test_bad_configs_rejected(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc).validate()


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"depht": 8})


def test_config_round_trip():
    config = load_config("mlr_n20")
    assert RunConfig.from_dict(config.to_dict()) == config


def test_constant_countdown_is_exempt():
    cd = RunConfig(countdown="constant:2").make_countdown()
    assert cd(7) == 2 and cd.bound_exempt and cd.spec() == "constant:2"
    assert not Countdown(2).bound_exempt


# -- w, beta, candidates --------------------------------------------------------------

def test_w_examples():
    fresh = NetworkState.fresh(6)
    assert w_value(fresh, 0) == 0
    assert w_value(fresh, 1) == 1
    assert w_value(fixture_at(3), 2) == 4
    assert w_value(fixture_at(6), 2) == 7


def test_beta_examples():
    state = fixture_at(2)
    assert beta(state, "0", 3, AlwaysB()) == "000"
    never = MLRB(build_catalog(["diverge_after:0"]))
    assert beta(state, "0", 3, never) is None
    # identity output has length n = 3, never above the threshold 5 of "0"
    assert beta(state, "0", 3, MLRB(build_catalog())) is None


def test_candidates_examples():
    B = AlwaysB()
    assert candidates(fixture_at(1), 2, B) == []
    assert candidates(fixture_at(2), 3, B) == ["0", "1"]
    assert candidates(fixture_at(4), 5, B) == []


# -- stages -------------------------------------------------------------------------

def test_fixture_trace_matches_hand_derivation():
    assert observed_trace() == EXPECTED_TRACE


def test_stage_cases():
    state = fixture_at(0)
    cd = FIXTURE.make_countdown()
    ev = step(state, 1, AlwaysB(), cd)
    assert ev.case == INITIAL_ACTIVATION and (state.counters[1] == 9).all()
    assert step(state, 2, AlwaysB(), cd).case == NOOP
    ev = step(state, 3, AlwaysB(), cd)
    assert ev.case == EDGES_ADDED
    assert state.counters[3].tolist() == [0, 8, 8, 8, 0, 8, 8, 8]
    assert all(e.flow_fraction == rat_make(1, 9) for e in ev.edges)


def test_stages_must_run_in_order():
    state = fixture_at(2)
    with pytest.raises(InvariantError):
        step(state, 4, AlwaysB(), FIXTURE.make_countdown())


def test_fixture_report():
    result = shipped_run("fixture_always_n8")
    assert result.report["S_final"] == "1735/1944"
    assert result.report["P_root"] == "1/1"
    assert result.report["cases"] == {INITIAL_ACTIVATION: 4, EDGES_ADDED: 2, NOOP: 2}


def test_mlr_ledger_masses():
    result = shipped_run("mlr_n20")
    assert result.ledger.levels() == [0]
    assert ledger_mass(result.ledger, 0) == rat_make(17, 512)
    for s in result.ledger.levels():
        assert ledger_mass(result.ledger, s) <= pow2(-s)
    assert ledger_mass(result.ledger, 1) <= rat_make(1, 2)


def test_stress_run_reaches_delay_one():
    state = shipped_run("stress_c2_n14").state
    assert any((c == 1).any() for c in state.counters)


@given(st.integers(3, 10), st.sampled_from(["always", "mlr", "frand"]))
def test_resume_equals_full_run(cut, mode):
    config = RunConfig(mode=mode, depth=11)
    full = run(config)
    part = advance(new_state(config), config, cut)
    resumed = resume(part, config)
    assert dumps(snapshot(resumed.state, config)) == dumps(snapshot(full.state, config))


def test_resume_cannot_rewind():
    config = RunConfig(mode="always", depth=6)
    with pytest.raises(ConfigError):
        resume(run(config).state, config, depth=4)


def test_runs_are_deterministic():
    config = RunConfig(mode="frand", depth=12)
    assert dumps(snapshot(run(config).state, config)) == dumps(snapshot(run(config).state, config))


def test_root_flow_is_conserved(shipped):
    assert shipped.table.R[0][0] == ONE and shipped.table.P[0][0] <= ONE
