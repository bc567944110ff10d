import csv
import json

import pytest

from edgebound.cli import main
from edgebound.engine import PACKET_COLUMNS, TRACE_COLUMNS


def chain(n, cap):
    ids = [f"s{i}" for i in range(1, n + 1)]
    return {
        "switches": [{"id": s, "egress_capacity": cap} for s in ids],
        "links": [{"src": a, "dst": b, "capacity": cap} for a, b in zip(ids, ids[1:])],
    }


def two_class_config():
    # d = (10, 20), C_1 = C_2 = C/4, P_max = C * 1 tick, H = 3
    return {
        "topology": chain(3, 4),
        "classes": [
            {"class_id": 1, "P_max_k": 4, "d_k": 10, "C_k": 1},
            {"class_id": 2, "P_max_k": 4, "d_k": 20, "C_k": 1},
            {"class_id": 3, "P_max_k": 4},
        ],
        "flows": [
            {"flow_id": "a", "class_id": 1, "path": ["s1", "s2", "s3"], "sigma": 8,
             "generator": {"kind": "periodic", "period": 3, "size": 4}},
            {"flow_id": "b", "class_id": 2, "path": ["s1", "s2", "s3"], "sigma": 16,
             "generator": "bulk"},
            {"flow_id": "bg", "class_id": 3, "path": ["s2", "s3"], "shaper": {"kind": "none"},
             "generator": {"kind": "greedy", "packet_size": 4}},
        ],
        "generators": {"bulk": {"kind": "bursty", "burst_size": 4, "packet_size": 4, "burst_gap": 20}},
        "run": {"duration": 300, "seed": 1},
    }


@pytest.fixture
def write(tmp_path):
    def _write(cfg, name="s.json"):
        p = tmp_path / name
        p.write_text(json.dumps(cfg))
        return str(p)

    return _write


def test_bounds_two_class_example(write, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["bounds", "--scenario", write(two_class_config()), "--out", str(out)]) == 0
    report = json.loads((out / "bounds.json").read_text())
    assert [c["D_k"] for c in report["classes"]] == [8, 15]
    assert "15" in capsys.readouterr().out


def test_bounds_condition3_rejected(write, tmp_path, capsys):
    cfg = two_class_config()
    cfg["classes"][0]["C_k"] = 3
    cfg["classes"][1]["C_k"] = 3
    assert main(["bounds", "--scenario", write(cfg), "--out", str(tmp_path)]) == 1
    assert "admission rejected: condition 3" in capsys.readouterr().err


def test_bounds_single_hop_equals_target(write, tmp_path):
    cfg = {
        "topology": {"switches": [{"id": "s1", "egress_capacity": 1}]},
        "classes": [{"class_id": 1, "P_max_k": 3, "d_k": 6, "C_k": 1}],
        "flows": [{"flow_id": "f", "class_id": 1, "path": ["s1"], "sigma": 4,
                   "generator": {"kind": "periodic", "period": 2, "size": 1}}],
    }
    assert main(["bounds", "--scenario", write(cfg), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "bounds.json").read_text())["classes"][0]["D_k"] == 6


def test_config_errors_exit_1(write, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"topology": [}')
    assert main(["bounds", "--scenario", str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err
    cfg = two_class_config()
    del cfg["flows"][0]["path"]
    assert main(["bounds", "--scenario", write(cfg)]) == 1
    assert "flows[0]" in capsys.readouterr().err


def test_simulate_writes_frozen_columns(write, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--scenario", write(two_class_config()), "--out", str(out)]) == 0
    with open(out / "trace.csv") as fh:
        assert tuple(next(csv.reader(fh))) == TRACE_COLUMNS
    with open(out / "packets.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == PACKET_COLUMNS and len(rows) > 10
    summary = json.loads((out / "summary.json").read_text())
    assert summary["admitted"]
    assert summary["classes"]["1"]["max_delay"] <= 8
    assert summary["classes"]["2"]["max_delay"] <= 15


def test_simulate_seed_flag_and_env(write, tmp_path, monkeypatch):
    cfg = two_class_config()
    cfg["flows"][0]["generator"] = {"kind": "uniform", "mean_gap": 4, "size_range": [1, 4]}
    path = write(cfg)
    monkeypatch.setenv("EDGEBOUND_OUT", str(tmp_path / "env"))
    assert main(["simulate", "--scenario", path, "--seed", "5"]) == 0
    a = (tmp_path / "env" / "trace.csv").read_text()
    assert main(["simulate", "--scenario", path, "--seed", "5", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "trace.csv").read_text() == a
    assert main(["simulate", "--scenario", path, "--seed", "6", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "trace.csv").read_text() != a


def test_verify_pass_and_fail(write, tmp_path, capsys):
    out = tmp_path / "sim"
    main(["simulate", "--scenario", write(two_class_config()), "--out", str(out)])
    trace = str(out / "trace.csv")
    capsys.readouterr()
    assert main(["verify", "--trace", trace, "--window", "10", "--budget", "a=8",
                 "--work-conserving"]) == 0
    assert main(["verify", "--trace", trace, "--window", "20", "--budget", "b=16"]) == 0
    assert main(["verify", "--trace", trace, "--window", "10", "--budget", "a=4"]) == 2
    text = capsys.readouterr().out
    assert "FAIL flow=a" in text and "witness [" in text
    assert main(["verify", "--trace", trace, "--window", "10", "--budget", "a"]) == 1


def test_experiment_fig4(tmp_path, capsys):
    assert main(["experiment", "--suite", "fig4", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "fig4.json").read_text())
    assert s["golden_match"]


def test_experiment_bound_suite(tmp_path):
    assert main(["experiment", "--suite", "multi-class-bound", "--seeds", "3", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "multi-class-bound.json").read_text())
    assert s["violations"] == 0 and s["scenarios"] == 3


def test_unknown_suite_rejected():
    with pytest.raises(SystemExit):
        main(["experiment", "--suite", "bogus"])


def test_experiment_violation_dumps_reproduction(tmp_path, monkeypatch):
    import edgebound.experiments as ex

    real = ex.scenario_bounds

    def too_tight(sc, restricted=None):
        report = real(sc, restricted)
        for c in report.classes:
            c.D_k = 1
        return report

    monkeypatch.setattr(ex, "scenario_bounds", too_tight)
    assert main(["experiment", "--suite", "single-class-bound", "--seeds", "2", "--out", str(tmp_path)]) == 2
    repro = json.loads((tmp_path / "single-class-bound-reproduction.json").read_text())
    assert len(repro["flows"]) == 1
