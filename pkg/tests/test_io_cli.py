import csv
import io as stdio
import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import CONFIGS, shipped_run
from semiflow import cli, io
from semiflow.engine import RunConfig, run


def doc_of(result):
    return json.loads(io.dumps(io.snapshot(result.state, result.config)))


# -- snapshots ----------------------------------------------------------------------

@settings(max_examples=20)
@given(st.integers(2, 12), st.sampled_from(["always", "mlr", "frand"]), st.sampled_from(["default", "constant:2", "constant:3"]))
def test_snapshot_round_trip(depth, mode, countdown):
    config = RunConfig(depth=depth, mode=mode, countdown=countdown)
    result = run(config)
    text = io.dumps(io.snapshot(result.state, config))
    state, back = io.restore(json.loads(text))
    assert back == config
    assert io.dumps(io.snapshot(state, back)) == text
    assert state.edges == result.state.edges and state.events == result.state.events


def test_version_mismatch_rejected(fixture_run):
    doc = doc_of(fixture_run)
    doc["version"] = 99
    with pytest.raises(io.SnapshotError, match="version"):
        io.restore(doc)


@pytest.mark.parametrize("edit,where", [
    (lambda d: d.pop("edges"), "edges"),
    (lambda d: d["delays"][3]["runs"].append([7, 99, 2]), r"delays\[3\]\.runs\[2\]"),
    (lambda d: d["edges"][1].update(end="1"), r"edges\[1\]"),
    (lambda d: d["events"][4].pop("case"), r"events\[4\]"),
    (lambda d: d["config"].update(depth=40), "config"),
    (lambda d: d.update(format="other"), "format"),
])
def test_malformed_snapshot_names_location(fixture_run, edit, where):
    doc = doc_of(fixture_run)
    edit(doc)
    with pytest.raises(io.SnapshotError, match=where):
        io.restore(doc)


def test_run_length_delays():
    level = np.array([0, 8, 8, 8, 0, 8, 8, 8])
    enc = io.encode_level(level, 0)
    assert enc == {"default": 0, "runs": [[1, 4, 8], [5, 8, 8]]}
    assert (io.decode_level(enc, 3, "x") == level).all()


# -- exports ----------------------------------------------------------------------------

def rows(text):
    return list(csv.reader(stdio.StringIO(text)))


def test_csv_layouts(fixture_run):
    edges = rows(io.edges_csv(fixture_run.state))
    assert edges[0] == ["stage", "task", "start", "end", "fraction"]
    assert edges[1] == ["3", "1", "0", "000", "1/9"]
    flows = rows(io.flows_csv(fixture_run.table, 3))
    assert flows[0] == ["node", "R", "P"] and len(flows) == 1 + 15
    assert flows[1] == ["e", "1/1", "1/1"]
    levels = rows(io.levels_csv(fixture_run.table))
    assert levels[0] == ["n", "S_n", "R_sum", "P_sum"] and levels[3][1] == "8/9"


def test_csv_matches_restored_snapshot(fixture_run):
    state, _ = io.restore(doc_of(fixture_run))
    assert io.edges_csv(state) == io.edges_csv(fixture_run.state)


def test_dot_shows_fixture_edges_and_fans(fixture_run):
    dot = io.to_dot(fixture_run.state, fixture_run.table, 4)
    assert dot.count("color=red") == 2
    assert '"e" -> "000" ' not in dot and '"0" -> "000" [color=red' in dot
    assert dot.count("fillcolor=lightgrey") == 6
    assert dot.endswith("}\n")
    with pytest.raises(ValueError):
        io.to_dot(fixture_run.state, None, 9)


def test_json_export_validates(fixture_run):
    doc = json.loads(io.dumps(io.export_json(fixture_run.state, fixture_run.config, fixture_run.table, 4)))
    jsonschema.validate(doc, io.export_schema())
    doc["nodes"][0]["R"] = "0.5"
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, io.export_schema())


def test_ledger_document():
    led = io.ledger_to_dict(shipped_run("mlr_n20").ledger)
    assert led["mode"] == "mlr"
    assert [(t["s"], t["mass"], t["bound"]) for t in led["tests"]] == [(0, "17/512", "1/1")]
    assert io.ledger_to_dict(None) == {"mode": None, "tests": []}


# -- command line ------------------------------------------------------------------------

def call(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def built(tmp_path, capsys):
    code, _, _ = call(capsys, "build", CONFIGS / "fixture_always_n8.json", "--out", tmp_path / "fx")
    assert code == 0
    return tmp_path / "fx"


def test_build_writes_artifacts(tmp_path, capsys):
    code, out, _ = call(capsys, "build", CONFIGS / "mlr_n20.json", "--out", tmp_path)
    assert code == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert {"snapshot.json", "edges.csv", "flows.csv", "levels.csv", "ledger.json"} <= names
    assert json.loads(out)["report"]["flows_depth"] == 12


def test_output_directory_override(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert call(capsys, "build", CONFIGS / "fixture_always_n8.json")[0] == 0
    assert (tmp_path / "env" / "snapshot.json").exists()
    monkeypatch.delenv(cli.OUT_ENV)
    assert call(capsys, "build", CONFIGS / "fixture_always_n8.json")[0] == 0
    assert (tmp_path / "out" / "fixture_always_n8" / "snapshot.json").exists()


@pytest.mark.parametrize("doc,message", [({"depth": 30}, "depth"), ({"delta": "1/1"}, "delta"), ({"mode": "x"}, "mode")])
def test_bad_config_exits_2(tmp_path, capsys, doc, message):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = call(capsys, "build", path, "--out", tmp_path)
    assert code == 2 and message in err


def test_verify_exit_codes(built, tmp_path, capsys):
    code, out, _ = call(capsys, "verify", built / "snapshot.json")
    assert code == 0 and json.loads(out)["verdict"] == "pass"
    doc = json.loads((built / "snapshot.json").read_text())
    doc["delays"][5]["default"] = 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out, err = call(capsys, "verify", bad)
    assert code == 1 and "FAIL" in err
    assert any(c["witnesses"] for c in json.loads(out)["checks"] if c["verdict"] == "fail")
    assert call(capsys, "verify", tmp_path / "missing.json")[0] == 2
    bad.write_text("{not json")
    assert call(capsys, "verify", bad)[0] == 2


def test_sample_stream_and_summary(built, capsys):
    code, out, _ = call(capsys, "sample", built / "snapshot.json", "--count", 50, "--seed", 4)
    lines = out.splitlines()
    assert code == 0 and len(lines) == 51
    first = json.loads(lines[0])
    assert set(first) == {"seed", "output", "status"}
    summary = json.loads(lines[-1])["summary"]
    assert summary["generator"] == "python-random-mt19937" and summary["seed"] == 4
    assert summary["cylinders"]["e"]["count"] == 50


def test_sample_edge_cases(built, capsys):
    code, out, _ = call(capsys, "sample", built / "snapshot.json", "--count", 0)
    summary = json.loads(out)["summary"]
    assert code == 0 and summary["count"] == 0 and summary["cylinders"]["0"]["frequency"] is None
    assert call(capsys, "sample", built / "snapshot.json", "--budget", 0)[0] == 2
    a = call(capsys, "sample", built / "snapshot.json", "--count", 30, "--seed", 9)[1]
    b = call(capsys, "sample", built / "snapshot.json", "--count", 30, "--seed", 9)[1]
    assert a == b


def test_export_formats(built, tmp_path, capsys):
    for fmt, name in (("dot", "network.dot"), ("csv", "edges.csv"), ("json", "export.json")):
        assert call(capsys, "export", built / "snapshot.json", "--format", fmt, "--out", tmp_path / fmt)[0] == 0
        assert (tmp_path / fmt / name).exists()
    assert call(capsys, "export", built / "snapshot.json", "--format", "xml")[0] == 2
    assert call(capsys, "export", built / "snapshot.json", "--format", "dot", "--depth-cap", 9)[0] == 2


def test_fixture_command(capsys):
    code, out, _ = call(capsys, "fixture")
    assert code == 0 and "match" in out


def test_missing_subcommand_exits_2(capsys):
    assert call(capsys)[0] == 2
