import json
import subprocess
import sys

import pytest

from bessbid.cli import main
from bessbid.domain import Config, SimulationSettings
from bessbid.metrics import REPORT_COLUMNS, read_report_csv

FAST = ["--days", "1", "--horizon", "36"]


@pytest.fixture()
def price_file(tmp_path):
    path = tmp_path / "p.csv"
    assert main(["gen-prices", "--days", "3", "--seed", "1", "--out", str(path)]) == 0
    return path


def test_gen_prices_rows_and_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen-prices", "--days", "7", "--seed", "3", "--out", str(a)]) == 0
    assert main(["gen-prices", "--days", "7", "--seed", "3", "--out", str(b)]) == 0
    assert len(a.read_text().splitlines()) == 169
    assert a.read_bytes() == b.read_bytes()
    assert "168 hours" in capsys.readouterr().out


def test_gen_prices_overrides(tmp_path):
    path = tmp_path / "n.csv"
    assert main(["gen-prices", "--days", "2", "--out", str(path), "--noise-std", "0",
                 "--neg-prob", "0"]) == 0
    rows = path.read_text().splitlines()[1:]
    assert rows[3].split(",")[1] == rows[27].split(",")[1]


def test_gen_prices_zero_days_is_usage_error(tmp_path, capsys):
    assert main(["gen-prices", "--days", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert "usage error" in capsys.readouterr().err


def test_simulate_writes_outputs(tmp_path, price_file, capsys):
    out = tmp_path / "run"
    code = main(["simulate", "--prices", str(price_file), "--policy", "fixed", "--m", "0.16",
                 "--seed", "1", "--out", str(out)] + FAST)
    assert code == 0
    assert (out / "log.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 1 and summary["policy"] == "fixed"
    assert summary["mean_margin"] == 0.16
    assert summary["config"]["simulation"]["days"] == 1
    assert summary["prices"] == str(price_file)
    captured = capsys.readouterr()
    assert captured.out.splitlines()[0].split()[:3] == ["policy", "parameter", "R_total"]
    assert len(captured.out.splitlines()) == 2


def test_simulate_uncertainty_aware_alias(tmp_path):
    code = main(["simulate", "--synthetic", "--policy", "uncertainty-aware", "--w-bar",
                 "0.00018", "--out", str(tmp_path / "ua")] + FAST)
    assert code == 0
    s = json.loads((tmp_path / "ua" / "summary.json").read_text())
    assert s["policy"] == "uncertainty_aware" and s["parameter"] == 0.00018


def test_simulate_uses_config_file(tmp_path):
    cfg = Config(simulation=SimulationSettings(days=1, horizon=36))
    path = tmp_path / "c.json"
    cfg.save(path)
    assert main(["simulate", "--synthetic", "--config", str(path), "--out",
                 str(tmp_path / "o")]) == 0


def test_missing_prices_is_io_error(tmp_path, capsys):
    code = main(["simulate", "--prices", str(tmp_path / "nope.csv"), "--out",
                 str(tmp_path / "o")] + FAST)
    assert code == 4
    err = capsys.readouterr()
    assert "nope.csv" in err.err and err.out == ""


@pytest.mark.parametrize("argv", [
    ["simulate", "--synthetic", "--policy", "adaptive", "--m", "0.1"],
    ["simulate", "--synthetic", "--policy", "fixed", "--w-bar", "0.001"],
    ["simulate", "--synthetic", "--days", "0"],
    ["simulate", "--synthetic", "--days", "1", "--months", "1"],
    ["simulate"],
    ["bogus"],
])
def test_usage_errors(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path / "o")]) == 2


def test_prices_and_synthetic_are_exclusive(tmp_path, price_file):
    assert main(["simulate", "--synthetic", "--prices", str(price_file), "--out",
                 str(tmp_path / "o")] + FAST) == 2


def test_invalid_config_value_is_config_error(tmp_path, capsys):
    assert main(["simulate", "--synthetic", "--policy", "fixed", "--m", "0.7", "--out",
                 str(tmp_path / "o")] + FAST) == 3
    assert "m_fixed" in capsys.readouterr().err


def test_bad_config_file_is_config_error(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["simulate", "--synthetic", "--config", str(path), "--out",
                 str(tmp_path / "o")] + FAST) == 3
    path.write_text(json.dumps({"battery": {"C": -1}}))
    assert main(["simulate", "--synthetic", "--config", str(path), "--out",
                 str(tmp_path / "o")] + FAST) == 3


def test_short_price_file_is_config_error(tmp_path, price_file):
    assert main(["simulate", "--prices", str(price_file), "--days", "3", "--out",
                 str(tmp_path / "o")]) == 3


def test_sweep_fixed_grid(tmp_path, price_file, capsys):
    out = tmp_path / "sw"
    code = main(["sweep", "--prices", str(price_file), "--policy", "fixed", "--grid",
                 "0:0.18:0.03", "--seeds", "0", "--out", str(out)] + FAST)
    assert code == 0
    text = (out / "sweep.csv").read_text()
    assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    rows = read_report_csv(out / "sweep.csv")
    assert [r["parameter"] for r in rows] == [0.0, 0.03, 0.06, 0.09, 0.12, 0.15, 0.18]
    for r in rows:
        assert r["R_total"] == r["R_dam"] + r["R_fcr"] + r["C_imb"] - r["C_deg"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [0] and len(manifest["grid"]) == 7
    assert manifest["config"]["simulation"]["horizon"] == 36
    assert len(capsys.readouterr().out.splitlines()) == 8


@pytest.mark.parametrize("grid", ["", "1:0:0.1", "0:1"])
def test_sweep_bad_grid_is_usage_error(tmp_path, grid):
    assert main(["sweep", "--synthetic", "--policy", "fixed", "--grid", grid, "--out",
                 str(tmp_path / "o")] + FAST) == 2


def test_sweep_bad_seeds_is_usage_error(tmp_path):
    assert main(["sweep", "--synthetic", "--policy", "fixed", "--grid", "0", "--seeds", "a",
                 "--out", str(tmp_path / "o")] + FAST) == 2


def test_sweep_out_of_range_point_is_config_error(tmp_path):
    assert main(["sweep", "--synthetic", "--policy", "fixed", "--grid", "0,0.9", "--out",
                 str(tmp_path / "o")] + FAST) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bessbid.cli", "gen-prices", "--days", "1",
                           "--out", str(tmp_path / "p.csv")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "p.csv").exists()
