import subprocess
import sys
import textwrap

import numpy as np
import pytest

from twostep import TrialDataset
from twostep.cli import main
from twostep.errors import DatasetParseError, InvalidInputError
from twostep.fileio import (
    format_value,
    load_dataset,
    load_experiment_config,
    read_results,
    write_dataset,
    write_results,
)
from twostep.harness import CELL_COLUMNS, ExperimentConfig, run_grid
from twostep.perm_engine import SeedSpec
from twostep.simgen import ScenarioSpec, TailDist, generate_trial


def _write(path, text):
    path.write_text(textwrap.dedent(text).lstrip())
    return path


@pytest.fixture
def trial_csv(tmp_path):
    ds = generate_trial(ScenarioSpec("mix", 80, 0.4, delta_a=1, delta_b=3, seed=SeedSpec(1)))
    path = tmp_path / "trial.csv"
    write_dataset(ds, path)
    return path


@pytest.fixture
def config_yaml(tmp_path):
    return _write(tmp_path / "grid.yaml", """
        experiment: {replicates: 6, n_perms: 40, alpha: 0.05, master_seed: 3}
        grid:
          - {kind: null, n: 30, pi0: [0.2, 0.6], tail: "beta 2 5"}
          - {kind: tail_only, n: 30, pi0: 0.4, delta: [3, 5]}
        """)


class TestLoadDataset:
    def test_valid(self, tmp_path):
        ds = load_dataset(_write(tmp_path / "d.csv", "y,t,x\n1.5,1,0\n-2,0,0.3\n0.1,1,2\n"))
        assert len(ds) == 3
        assert ds.t.tolist() == [1, 0, 1] and ds.x.tolist() == [0, 0.3, 2]

    def test_column_order_free(self, tmp_path):
        ds = load_dataset(_write(tmp_path / "d.csv", "x,y,t\n0.5,1.0,1\n0,2.0,0\n"))
        assert ds.y.tolist() == [1.0, 2.0] and ds.x.tolist() == [0.5, 0]

    @pytest.mark.parametrize("row, fragment", [
        ("1,0,-1", "biomarker"), ("1,2,0.5", "arm indicator"), ("a,1,0", "non-numeric"),
        ("1,1", "3 fields"), ("inf,1,0", "finite"),
    ])
    def test_bad_row_names_line(self, tmp_path, row, fragment):
        path = _write(tmp_path / "d.csv", f"y,t,x\n1,0,0\n2,1,0.5\n{row}\n")
        with pytest.raises(DatasetParseError, match=f"line 4: .*{fragment}") as info:
            load_dataset(path)
        assert info.value.line == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetParseError, match="no such file"):
            load_dataset(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        with pytest.raises(DatasetParseError, match="line 1"):
            load_dataset(_write(tmp_path / "d.csv", "a,b,c\n1,0,0\n"))

    def test_round_trip(self, tmp_path):
        ds = TrialDataset(y=[0.123456789, -4.0, 1e-7], t=[1, 0, 1], x=[0, 0.5, 3.25])
        write_dataset(ds, tmp_path / "d.csv")
        back = load_dataset(tmp_path / "d.csv")
        assert np.allclose(back.y, ds.y, rtol=1e-9) and np.array_equal(back.x, ds.x)


class TestWriteResults:
    def test_header_only(self, tmp_path):
        write_results([], tmp_path / "r.csv", CELL_COLUMNS)
        assert (tmp_path / "r.csv").read_text() == ",".join(CELL_COLUMNS) + "\n"

    def test_empty_needs_columns(self, tmp_path):
        with pytest.raises(InvalidInputError):
            write_results([], tmp_path / "r.csv")

    def test_byte_identical_and_round_trip(self, tmp_path):
        cfg = ExperimentConfig(grid=(ScenarioSpec("null", 30, 0.3, tail=TailDist("beta", 2, 5)),),
                               replicates=5, n_perms=30, master_seed=1)
        cells = run_grid(cfg)
        write_results(cells, tmp_path / "a.csv", CELL_COLUMNS)
        write_results(cells, tmp_path / "b.csv", CELL_COLUMNS)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        back = read_results(tmp_path / "a.csv")
        for cell, row in zip(cells, back):
            assert row["method"] == cell.method and row["rejections"] == cell.rejections
            assert row["tail"] == "beta(2,5)"
            for key in ("rate", "ci_lo", "ci_hi"):
                assert row[key] == pytest.approx(getattr(cell, key), rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("value, text", [
        (0.0, "0"), (-0.0, "0"), (1 / 3, "0.333333333"), (True, "1"), (None, ""),
        (float("nan"), "nan"), (np.int64(7), "7"), (12345678901.0, "1.23456789e+10"),
    ])
    def test_format(self, value, text):
        assert format_value(value) == text


class TestConfig:
    def test_expansion(self, config_yaml):
        cfg = load_experiment_config(config_yaml)
        assert len(cfg["grid"]) == 4
        assert cfg["grid"][0].kind == "null" and cfg["grid"][0].tail == TailDist("beta", 2, 5)
        assert [s.delta for s in cfg["grid"][2:]] == [3.0, 5.0]
        assert cfg["replicates"] == 6 and cfg["master_seed"] == 3

    @pytest.mark.parametrize("text", [
        "grid: []\n", "experiment: {bogus: 1}\ngrid: [{kind: null, n: 10}]\n",
        "grid: [{kind: null}]\n", "grid: [{kind: null, n: 10, colour: red}]\n", "[1, 2\n",
    ])
    def test_invalid(self, tmp_path, text):
        with pytest.raises(InvalidInputError):
            load_experiment_config(_write(tmp_path / "c.yaml", text))


class TestCli:
    def test_test_command(self, trial_csv, tmp_path, capsys):
        out = tmp_path / "res.csv"
        assert main(["test", "--input", str(trial_csv), "--perms", "200", "--seed", "4", "--out", str(out)]) == 0
        (row,) = read_results(out)
        assert 0 < row["p_fisher"] <= 1 and row["n"] == 80 and row["n_zero"] == 32
        assert "p_brown" in capsys.readouterr().out
        first = out.read_bytes()
        main(["test", "--input", str(trial_csv), "--perms", "200", "--seed", "4", "--out", str(out)])
        assert out.read_bytes() == first

    def test_diagnose(self, trial_csv, tmp_path):
        out = tmp_path / "diag.csv"
        assert main(["diagnose", "--input", str(trial_csv), "--perms", "100", "--boot", "30",
                     "--seed", "1", "--out", str(out), "--grid-size", "10"]) == 0
        rows = read_results(out)
        assert sum(r["section"] == "curve" for r in rows) == 10
        assert {r["name"] for r in rows if r["section"] == "pvalue"} >= {"p_main", "p_interaction_only_fisher"}

    def test_cutpoint(self, trial_csv, tmp_path):
        out = tmp_path / "cut.csv"
        assert main(["cutpoint", "--input", str(trial_csv), "--min-cell", "5", "--perms", "100",
                     "--boot", "30", "--seed", "1", "--out", str(out)]) == 0
        (row,) = read_results(out)
        assert row["tau_lo"] <= row["tau_hat"] <= row["tau_hi"]

    def test_cutpoint_infeasible_exit_code(self, tmp_path):
        path = _write(tmp_path / "d.csv", "y,t,x\n" + "".join(f"{i},{i % 2},{i / 10}\n" for i in range(8)))
        assert main(["cutpoint", "--input", str(path), "--out", str(tmp_path / "o.csv")]) == 2

    def test_parse_error_exit_code(self, tmp_path, capsys):
        path = _write(tmp_path / "d.csv", "y,t,x\n1,0,0\n1,3,0\n")
        assert main(["test", "--input", str(path)]) == 1
        assert "line 3" in capsys.readouterr().err

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as info:
            main(["test"])
        assert info.value.code == 1

    def test_copula(self, tmp_path):
        out = tmp_path / "cop.csv"
        assert main(["copula", "--rhos", "0,0.5", "--draws", "2000", "--seed", "2", "--out", str(out)]) == 0
        rows = read_results(out)
        assert [(r["rho"], r["method"]) for r in rows] == [(0, "fisher"), (0, "brown"), (0.5, "fisher"), (0.5, "brown")]

    def test_theory(self, tmp_path):
        out = tmp_path / "th.csv"
        assert main(["theory", "--delta0", "1", "--d0", "0", "--sigma", "5", "--n", "100",
                     "--pi0-grid", "0:0.8:0.1", "--out", str(out)]) == 0
        rows = read_results(out)
        assert [r["pi0"] for r in rows] == pytest.approx([i / 10 for i in range(9)])
        power = [r["power"] for r in rows]
        assert all(a > b for a, b in zip(power, power[1:]))

    def test_simulate_thread_invariant(self, config_yaml, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(config_yaml), "--out", str(a), "--threads", "1", "--seed", "9"]) == 0
        assert main(["simulate", "--config", str(config_yaml), "--out", str(b), "--threads", "8", "--seed", "9"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(read_results(a)) == 4 * 5

    def test_flags_override_config(self, config_yaml, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", str(config_yaml), "--out", str(a)])
        main(["simulate", "--config", str(config_yaml), "--out", str(b), "--seed", "3"])
        assert a.read_bytes() == b.read_bytes()

    def test_console_script(self, trial_csv):
        proc = subprocess.run([sys.executable, "-m", "twostep.cli", "test", "--input", str(trial_csv),
                               "--perms", "50"], capture_output=True, text=True)
        assert proc.returncode == 0 and "p_fisher" in proc.stdout
