import csv
import json
import math
import subprocess
import sys

import pytest

from frogdrift.cli import REPLICA_HEADER, SWEEP_HEADER, main

LOG21 = {"kind": "log", "C": 2, "a": 1}


def run(tmp_path, capsys, cfg, *flags, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    code = main([flags[0], "--config", str(path), *flags[1:]])
    out = capsys.readouterr()
    summary = json.loads(out.out) if out.out.strip() else None
    return code, summary, out.err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- criterion -----------------------------------------------------------------

@pytest.mark.parametrize("intensity,cls,status", [
    (LOG21, "Convergent", "NonTransient"),
    ({"kind": "loglog", "C1": 1, "C2": 2}, "Divergent", "Transient"),
    ({"kind": "loglog", "C1": 1, "C2": 2.25}, "Convergent", "NonTransient"),
])
def test_criterion(tmp_path, capsys, intensity, cls, status):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": intensity}
    out = tmp_path / "c.csv"
    code, s, _ = run(tmp_path, capsys, cfg, "criterion", "--output", str(out))
    assert code == 0
    assert s["classification"] == cls and s["impliedModelStatus"] == status
    rows = read_csv(out)
    assert rows[0] == ["horizon", "partial_value", "increment"]
    assert float(rows[1][0]) == 16.0 and rows[1][2] == "nan"


def test_criterion_inconclusive_exit(tmp_path, capsys):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": {"kind": "loglog", "C1": 1, "C2": 2.1}}
    code, s, _ = run(tmp_path, capsys, cfg, "criterion")
    assert code == 2 and s["classification"] == "Inconclusive"


# -- simulate ----------------------------------------------------------------

def test_simulate_pure_death(tmp_path, capsys):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": {"kind": "constant", "c": 0},
           "horizon": 1, "replicas": 100_000, "masterSeed": 3}
    out = tmp_path / "r.csv"
    code, s, _ = run(tmp_path, capsys, cfg, "simulate", "--output", str(out))
    assert code == 0
    assert abs(s["survival"]["mean"] - math.exp(-1)) < 0.01
    rows = read_csv(out)
    assert rows[0] == REPLICA_HEADER and len(rows) == 100_001
    assert json.loads((tmp_path / "r.csv.summary.json").read_text()) == s


def test_simulate_discrete(tmp_path, capsys):
    cfg = {"model": {"type": "discrete", "p": 2 / 3}, "intensity": {"kind": "constant", "c": 0},
           "horizon": 5, "replicas": 100_000}
    code, s, _ = run(tmp_path, capsys, cfg, "simulate", "--seed", "4")
    assert code == 0 and s["counter"] == "K"
    assert abs(s["survival"]["mean"] - 0.5**5) < 0.004


def test_simulation_error_exit(tmp_path, capsys):
    cfg = {"model": {"type": "discrete", "p": 0.6}, "intensity": {"kind": "constant", "c": 5e9},
           "horizon": 3, "replicas": 5}
    code, _, err = run(tmp_path, capsys, cfg, "simulate")
    assert code == 3 and "replicas" in err


# -- verify-law ----------------------------------------------------------------

@pytest.mark.parametrize("model,intensity,at", [
    ({"type": "continuous", "lambda": 0.5}, {"kind": "constant", "c": 1}, 5),
    ({"type": "discrete", "p": 0.75}, {"kind": "example42"}, 10),
])
def test_verify_law(tmp_path, capsys, model, intensity, at):
    cfg = {"model": model, "intensity": intensity, "checkpoints": [at], "replicas": 100_000}
    code, s, _ = run(tmp_path, capsys, cfg, "verify-law")
    assert code == 0 and s["passed"] and s["tvDistance"] <= 0.02


def test_verify_law_zero_threshold(tmp_path, capsys):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": {"kind": "constant", "c": 1},
           "checkpoints": [1], "replicas": 1000, "tvThreshold": 0}
    code, s, _ = run(tmp_path, capsys, cfg, "verify-law")
    assert code == 4 and not s["passed"]


# -- frogs and sweep -----------------------------------------------------------

def test_frogs_two_sided(tmp_path, capsys):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 5,
           "replicas": 2000, "twoSided": {"kind": "constant", "c": 1}, "checkpoints": [2]}
    code, s, _ = run(tmp_path, capsys, cfg, "frogs")
    assert code == 0
    assert abs(s["leftHitters"]["mean"] - 1) < 4 * s["leftHitters"]["stdError"]
    assert [c["at"] for c in s["checkpoints"]] == [2.0, 5.0]


def test_sweep_phase_transition(tmp_path, capsys):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 20,
           "replicas": 200, "grid": {"param": "C", "values": [0.5, 0.75, 1.5, 2.0], "relative": True}}
    out = tmp_path / "s.csv"
    code, s, _ = run(tmp_path, capsys, cfg, "sweep", "--output", str(out))
    assert code == 0
    assert [p["classification"] for p in s["points"]] == ["Divergent", "Divergent", "Convergent", "Convergent"]
    rows = read_csv(out)
    assert rows[0] == SWEEP_HEADER and len(rows) == 5


def test_sweep_over_p(tmp_path, capsys):
    cfg = {"model": {"type": "discrete", "p": 0.75}, "intensity": {"kind": "log", "C": 4}, "horizon": 20,
           "replicas": 200, "grid": {"param": "p", "values": [0.6, 0.75, 0.9]}}
    code, s, _ = run(tmp_path, capsys, cfg, "sweep")
    assert code == 0
    # the coefficient (1-p)/(2p-1) falls with p, so the sum can only grow
    order = {"Divergent": 0, "Inconclusive": 1, "Convergent": 2}
    ranks = [order[p["classification"]] for p in s["points"]]
    assert ranks == sorted(ranks, reverse=True)


# -- configuration errors ----------------------------------------------------

@pytest.mark.parametrize("cfg,flags", [
    ({"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 1, "replicas": 0}, []),
    ({"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 1}, ["--replicas", "0"]),
    ({"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 1, "bogus": 1}, []),
    ({"model": {"type": "continuous", "lambda": -1}, "intensity": LOG21, "horizon": 1}, []),
    ({"model": {"type": "discrete", "p": 0.4}, "intensity": LOG21, "horizon": 1}, []),
    ({"model": {"type": "continuous", "lambda": 0.5}, "intensity": {"kind": "nope"}, "horizon": 1}, []),
    ({"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21}, []),
])
def test_config_errors(tmp_path, capsys, cfg, flags):
    code, _, err = run(tmp_path, capsys, cfg, "simulate", *flags)
    assert code == 1 and "config error" in err


def test_empty_grid_and_bad_json(tmp_path, capsys):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 5,
           "replicas": 200, "grid": {"param": "C", "values": []}}
    assert run(tmp_path, capsys, cfg, "sweep")[0] == 1
    code, _, err = run(tmp_path, capsys, '{\n  "model": {,}\n}', "criterion")
    assert code == 1 and "line 2" in err


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as e:
        main(["simulate"])
    assert e.value.code == 1


def test_seed_precedence(tmp_path, capsys, monkeypatch):
    cfg = {"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21, "horizon": 2, "replicas": 100}
    monkeypatch.setenv("FROGDRIFT_SEED", "17")
    assert run(tmp_path, capsys, cfg, "simulate")[1]["survival"]["masterSeed"] == 17
    cfg["masterSeed"] = 5
    assert run(tmp_path, capsys, cfg, "simulate")[1]["survival"]["masterSeed"] == 5
    assert run(tmp_path, capsys, cfg, "simulate", "--seed", "9")[1]["survival"]["masterSeed"] == 9


def test_threads_do_not_change_bytes(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"type": "continuous", "lambda": 0.5}, "intensity": LOG21,
                               "horizon": 10, "replicas": 10_000, "masterSeed": 2}))
    outs = []
    for t in ("1", "8"):
        path = tmp_path / f"t{t}.csv"
        res = subprocess.run([sys.executable, "-m", "frogdrift", "simulate", "--config", str(cfg),
                              "--threads", t, "--output", str(path)], capture_output=True)
        assert res.returncode == 0
        outs.append((path.read_bytes(), res.stdout))
    assert outs[0] == outs[1]


def test_json_table_output(tmp_path, capsys):
    cfg = {"model": {"type": "discrete", "p": 0.75}, "intensity": {"kind": "linear", "a": 1}, "horizon": 10,
           "replicas": 50}
    out = tmp_path / "r.json"
    code, s, _ = run(tmp_path, capsys, cfg, "simulate", "--output", str(out), "--format", "json")
    doc = json.loads(out.read_text())
    assert code == 0 and doc["summary"] == s and len(doc["rows"]) == 50
    assert set(doc["rows"][0]) == set(REPLICA_HEADER)
