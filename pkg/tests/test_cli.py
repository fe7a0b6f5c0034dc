from __future__ import annotations

import csv
import json
import shutil
import subprocess

import pytest

from opera.cli import main

SMALL = {"topology": {"k": 8, "num_racks": 16}}


def _cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gen_writes_artifacts(tmp_path):
    out = tmp_path / "gen"
    assert main(["gen", "--config", _cfg(tmp_path, SMALL), "--seed", "1", "--out", str(out)]) == 0
    assert (out / "validation.txt").read_text().startswith("PASS")
    topo = json.loads((out / "topology.json").read_text())
    assert topo["N"] == 16
    assert len(_rows(out / "schedule.csv")) == 16 * 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 1
    assert set(man["outputs"]) >= {"topology.json", "schedule.csv", "validation.txt"}


def test_analyze_from_saved_topology(tmp_path):
    gen = tmp_path / "gen"
    main(["gen", "--config", _cfg(tmp_path, SMALL), "--seed", "0", "--out", str(gen)])
    cfg = _cfg(tmp_path, {"topology_file": str(gen / "topology.json")}, "an.json")
    out = tmp_path / "an"
    assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    rows = _rows(out / "slice_metrics.csv")
    assert len(rows) == 16
    assert json.loads((out / "analysis.json").read_text())


def test_manifest_reproduces_run(tmp_path):
    doc = dict(SMALL, workload={"pattern": "poisson_cdf", "load": 0.2, "duration": 2e-3, "cdf": "websearch"},
               sim={"horizon": 0.02})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", _cfg(tmp_path, doc), "--seed", "3", "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    for name in ("summary.json", "flows.csv", "trace.csv", "timeseries.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    c = tmp_path / "c"
    main(["simulate", "--config", _cfg(tmp_path, doc), "--seed", "4", "--out", str(c)])
    assert (a / "summary.json").read_bytes() != (c / "summary.json").read_bytes()


def test_simulate_empty_pattern(tmp_path):
    doc = dict(SMALL, workload={"pattern": "empty"})
    out = tmp_path / "e"
    assert main(["simulate", "--config", _cfg(tmp_path, doc), "--seed", "0", "--out", str(out)]) == 0
    assert _rows(out / "flows.csv") == []
    assert json.loads((out / "summary.json").read_text())["counters"]["events"] == 0


def test_simulate_expander(tmp_path):
    doc = dict(SMALL, network="expander", workload={"pattern": "permutation", "flow_size": 20_000})
    out = tmp_path / "x"
    assert main(["simulate", "--config", _cfg(tmp_path, doc), "--seed", "0", "--out", str(out)]) == 0
    rows = _rows(out / "flows.csv")
    assert rows and all(r["fct_s"] for r in rows)


def test_faults_switch_counts(tmp_path):
    doc = dict(SMALL, faults={"kind": "switch", "counts": [0, 1, 4]})
    out = tmp_path / "f"
    assert main(["faults", "--config", _cfg(tmp_path, doc), "--seed", "0", "--out", str(out)]) == 0
    rows = {int(r["failed"]): r for r in _rows(out / "faults.csv")}
    assert float(rows[0]["max_integrated_loss"]) == 0.0
    assert int(rows[1]["trials"]) == 4
    assert float(rows[4]["mean_integrated_loss"]) == 1.0


def test_cost(tmp_path):
    out = tmp_path / "c"
    assert main(["cost", "--out", str(out)]) == 0
    doc = json.loads((out / "cost.json").read_text())
    assert round(doc["alpha_from_parts"], 3) == 1.279
    assert doc["hosts"] == 648
    assert _rows(out / "parts.csv")


def test_bad_field_type(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"topology": {"k": "twelve"}})
    assert main(["gen", "--config", cfg, "--seed", "0", "--out", str(tmp_path / "o")]) == 2
    assert "topology.k: expected int, got str" in capsys.readouterr().err


def test_unknown_field(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"topology": {"radix": 12}})
    assert main(["gen", "--config", cfg, "--seed", "0", "--out", str(tmp_path / "o")]) == 2
    assert "topology.radix" in capsys.readouterr().err


def test_seed_required(tmp_path, capsys):
    assert main(["gen", "--config", _cfg(tmp_path, SMALL), "--out", str(tmp_path / "o")]) == 2
    assert "seed" in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    assert main(["cost", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_invalid_parameter_exit_code(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"topology": {"k": 8, "num_racks": 15}})
    assert main(["gen", "--config", cfg, "--seed", "0", "--out", str(tmp_path / "o")]) == 1
    assert "error:" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("opera") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["opera", "cost", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0
    assert (tmp_path / "cost.json").exists()
