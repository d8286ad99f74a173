import csv
import json
import subprocess
import sys

import pytest

from iotcoex.cli import main
from iotcoex.config import ScenarioConfig


@pytest.fixture
def cfg_path(tmp_path):
    cfg = ScenarioConfig(ues_per_cell=6, iot_candidates_per_cell=40, trials=3)
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    return path


def test_run_outputs_are_byte_identical(tmp_path, cfg_path):
    outs = []
    for k, workers in enumerate((1, 1, 2)):
        out = tmp_path / f"o{k}"
        assert main(["run", "--config", str(cfg_path), "--seed", "42", "--out", str(out), "--workers", str(workers)]) == 0
        outs.append(((out / "trials.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert outs[0] == outs[1] == outs[2]
    rows = list(csv.DictReader(outs[0][0].decode().splitlines()))
    assert len(rows) == 3 and rows[0]["trial_index"] == "0"
    summary = json.loads(outs[0][1])
    assert summary["master_seed"] == 42
    mean = sum(int(r["admitted_total"]) for r in rows) / 3
    assert summary["results"][0]["admitted"]["mean"] == pytest.approx(mean, rel=1e-9)


def test_run_json_format_and_mode(tmp_path, cfg_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg_path), "--mode", "pooling", "--trials", "2",
                 "--format", "json", "--out", str(out)]) == 0
    rows = json.loads((out / "trials.json").read_text())
    assert [r["mode"] for r in rows] == ["pooling", "pooling"]


def test_sweep_tables(tmp_path, cfg_path):
    out = tmp_path / "s"
    assert main(["sweep-tolerance", "--config", str(cfg_path), "--trials", "2",
                 "--tolerances", "0.1", "0.5", "--out", str(out)]) == 0
    lines = (out / "sweep_tolerance.csv").read_text().splitlines()
    assert lines[0] == "param,mode,mean,std,ci95,ratio"
    assert len(lines) == 5
    assert main(["sweep-density", "--config", str(cfg_path), "--trials", "1", "--isd", "800", "--out", str(out)]) == 0
    assert len((out / "sweep_density.csv").read_text().splitlines()) == 3


def test_compare_modes(tmp_path, cfg_path):
    out = tmp_path / "c"
    assert main(["compare-modes", "--config", str(cfg_path), "--trials", "2", "--out", str(out)]) == 0
    header = (out / "comparison.csv").read_text().splitlines()[0]
    assert header == "trial_index,seed,none,pooling,ratio_pooling"
    assert "mean_ratio" in json.loads((out / "summary.json").read_text())


def test_validate_and_gen_topology(tmp_path, cfg_path, capsys):
    assert main(["validate-config", "--print-defaults"]) == 0
    defaults = json.loads(capsys.readouterr().out)
    assert defaults["iot_candidates_per_cell"] == 2000
    assert main(["validate-config", "--config", str(cfg_path)]) == 0
    assert main(["validate-config"]) == 2
    out = tmp_path / "bs.csv"
    assert main(["gen-topology", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "bs_id,operator_id,x_m,y_m,shared"
    assert len(out.read_text().splitlines()) == 15


def test_exit_codes(tmp_path, cfg_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"trials": 1, "surprise": true}')
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["run", "--config", str(cfg_path), "--mode", "leasing", "--out", str(tmp_path)]) == 2
    broken = tmp_path / "broken.csv"
    broken.write_text("bs_id,operator_id,x_m,y_m,shared\n1,0,x,0,1\n")
    csv_cfg = tmp_path / "csv.json"
    csv_cfg.write_text(json.dumps({"topology": {"generator": "csv", "path": str(broken)}, "trials": 1}))
    assert main(["run", "--config", str(csv_cfg), "--out", str(tmp_path)]) == 2


def test_runtime_error_exit_code(tmp_path, cfg_path, monkeypatch):
    from iotcoex import runner
    from iotcoex.admission import Violation

    monkeypatch.setattr(runner, "audit", lambda *a: [Violation("degradation", 1, 0.5, 0.1)])
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path)]) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "iotcoex", "validate-config", "--print-defaults"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["mode"] == "none"
