import re
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from bench.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main
from model.scenario import save_scenario

from conftest import make_scenario


@pytest.fixture
def scenario_file(tmp_path):
    return str(save_scenario(make_scenario(max_antennas=64), tmp_path / "scenario.txt"))


def test_sweep_writes_csv(scenario_file, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--scenario", scenario_file, "--var", "antennas", "--range", "8:64:8", "--out", str(out)])
    assert code == EXIT_OK
    df = pd.read_csv(out)
    assert len(df) == 8
    assert np.all(df["ee_bpj"] > 0)


def test_power_sweep_with_fixed_antennas(scenario_file, tmp_path):
    out = tmp_path / "power.csv"
    argv = ["sweep", "--scenario", scenario_file, "--var", "pdbm", "--range", "0:30:5", "--antennas", "32", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert list(pd.read_csv(out)["x"]) == [0, 5, 10, 15, 20, 25, 30]


def test_unknown_scenario_key_is_bad_input(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("cells = 2\nantennas = 4\n")
    code = main(["sweep", "--scenario", str(path), "--var", "antennas", "--range", "8:16:8", "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_INPUT


def test_negative_gain_is_bad_input(scenario_file, tmp_path):
    fading = tmp_path / "scenario_fading.csv"
    df = pd.read_csv(fading)
    df.loc[0, "gain"] = -1.0
    df.to_csv(fading, index=False)
    assert main(["optimize", "--scenario", scenario_file]) == EXIT_INPUT


def test_missing_scenario_file(tmp_path):
    assert main(["optimize", "--scenario", str(tmp_path / "missing.txt")]) == EXIT_INPUT


def test_validate_rejects_few_trials(scenario_file):
    assert main(["validate", "--scenario", scenario_file, "--trials", "10"]) == EXIT_INPUT


def test_bad_range_is_bad_input(scenario_file, tmp_path):
    argv = ["sweep", "--scenario", scenario_file, "--var", "antennas", "--range", "8:16", "--out", str(tmp_path / "x.csv")]
    assert main(argv) == EXIT_INPUT


def test_usage_error_exits_with_bad_input_code():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--var", "bandwidth", "--range", "1:2:1", "--out", "x.csv"])
    assert info.value.code == EXIT_INPUT


def test_optimize_writes_trace(scenario_file, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    assert main(["optimize", "--scenario", scenario_file, "--trace", str(trace)]) == EXIT_OK
    assert "n_antennas" in capsys.readouterr().out
    df = pd.read_csv(trace)
    assert df.columns[0] == "solver"
    assert set(df["solver"]) == {"antenna", "power"}


def test_optimize_at_fixed_power(scenario_file, tmp_path):
    trace = tmp_path / "trace.csv"
    assert main(["optimize", "--scenario", scenario_file, "--pdbm", "20", "--trace", str(trace)]) == EXIT_OK
    assert set(pd.read_csv(trace)["solver"]) == {"antenna"}


def test_infeasible_budget_is_a_solver_failure(tmp_path):
    path = str(save_scenario(make_scenario(max_antennas=64, power_budget=3.0), tmp_path / "starved.txt"))
    assert main(["optimize", "--scenario", path]) == EXIT_SOLVER


def test_unknown_log_level(scenario_file, tmp_path):
    argv = ["--log-level", "LOUD", "optimize", "--scenario", scenario_file]
    assert main(argv) == EXIT_INPUT


def test_zero_pilot_power_is_bad_input(scenario_file):
    path = Path(scenario_file)
    text = re.sub(r"^pilot_power_w = .*$", "pilot_power_w = 0", path.read_text(), flags=re.MULTILINE)
    path.write_text(text)
    assert main(["optimize", "--scenario", scenario_file]) == EXIT_INPUT
