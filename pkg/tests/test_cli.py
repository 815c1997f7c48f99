import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from nonlocalfv.cli import main
from nonlocalfv.experiments import builtin_datum
from nonlocalfv.measures import Grid1D, project_hat


def write_config(tmp_path, **fields):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(fields))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestConfigErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text("{broken")
        assert main(["check", "--config", str(path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_unknown_field_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="parabolic1d", timestep=0.1)
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "timestep" in capsys.readouterr().err

    def test_unknown_experiment(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="gaussian", resolutions=[32])
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "parabolic1d" in capsys.readouterr().err

    def test_simulate_needs_single_resolution(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="parabolic1d", resolutions=[32, 64])
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "exactly one resolution" in capsys.readouterr().err

    def test_converge_rejects_single_resolution(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="parabolic1d", resolutions=[32])
        assert main(["converge", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "at least two" in capsys.readouterr().err

    def test_w1_metric_rejected_for_2d(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            experiment="polynomial2d",
            resolutions=[8, 16],
            reference_n=16,
            t_final=0.05,
            metrics=["w1", "l1"],
        )
        assert main(["converge", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "1D" in capsys.readouterr().err


class TestSimulate:
    def test_zero_time_equals_projection(self, tmp_path):
        cfg = write_config(
            tmp_path, experiment="parabolic1d", resolutions=[64], t_final=0.0
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        _, rows = read_csv(out / "solution_N64.csv")
        masses = np.array([float(r[1]) for r in rows])
        datum, _ = builtin_datum("parabolic1d")
        expected = project_hat(datum, Grid1D.torus(64)).masses
        assert np.array_equal(masses, expected)
        diag_lines = (out / "diagnostics.csv").read_text().splitlines()
        assert len(diag_lines) == 1

    def test_mass_column_constant(self, tmp_path):
        cfg = write_config(
            tmp_path, experiment="parabolic1d", resolutions=[512], t_final=0.25
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        _, rows = read_csv(out / "diagnostics.csv")
        masses = [float(r[2]) for r in rows]
        assert all(abs(m - 1.0) <= 1e-12 for m in masses)
        increments = [float(r[5]) for r in rows]
        dx = 2 * math.pi / 512
        assert all(0 <= w <= dx * (1 + 1e-9) for w in increments)

    def test_singular_run_keeps_spikes_over_plateau(self, tmp_path):
        cfg = write_config(
            tmp_path,
            experiment="singular1d",
            resolutions=[128],
            t_final=0.05,
            emit_svg=True,
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        _, rows = read_csv(out / "solution_N128.csv")
        centers = np.array([float(r[0]) for r in rows])
        density = np.array([float(r[2]) for r in rows])
        plateau = 1 / (2 * math.pi)
        for spike in (3 * math.pi / 4, 5 * math.pi / 4):
            window = np.abs(centers - spike) < 0.15
            assert density[window].max() > 5 * plateau
        ET.fromstring((out / "solution_N128.svg").read_text())

    def test_seventeen_digit_round_trip(self, tmp_path):
        cfg = write_config(
            tmp_path, experiment="parabolic1d", resolutions=[64], t_final=0.1
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        _, rows = read_csv(out / "solution_N64.csv")
        for row in rows:
            for token in row:
                assert f"{float(token):.17g}" == token

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(
            tmp_path, experiment="piecewise_constant1d", resolutions=[64], t_final=0.1
        )
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
            outs.append(out)
        for fname in ("solution_N64.csv", "diagnostics.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_resolution_flag_overrides(self, tmp_path):
        cfg = write_config(tmp_path, experiment="parabolic1d", t_final=0.05)
        out = tmp_path / "out"
        code = main(
            [
                "simulate",
                "--config",
                cfg,
                "--out",
                str(out),
                "--resolution",
                "32",
                "--quiet",
            ]
        )
        assert code == 0
        assert (out / "solution_N32.csv").exists()

    def test_narrow_omega_window_leaks_to_failure(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            experiment="polynomial2d",
            resolutions=[16],
            t_final=0.5,
            omega_min=-0.1,
            omega_max=1.1,
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 3
        assert "solver failure" in capsys.readouterr().err

    def test_2d_solution_columns(self, tmp_path):
        cfg = write_config(
            tmp_path, experiment="polynomial2d", resolutions=[16], t_final=0.05
        )
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "solution_N16.csv")
        assert header == ["theta_center", "omega_center", "mass", "density_value"]
        assert len(rows) == 16 * 16
        _, diag = read_csv(out / "diagnostics.csv")
        assert all(r[5] == "" for r in diag)


class TestConverge:
    def test_table_layout(self, tmp_path):
        cfg = write_config(
            tmp_path,
            experiment="parabolic1d",
            resolutions=[16, 32],
            reference_n=64,
            t_final=0.1,
        )
        out = tmp_path / "out"
        assert main(["converge", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "table.csv")
        assert header == ["N", "err_w1", "eoc_w1", "err_l1", "eoc_l1"]
        assert [r[0] for r in rows] == ["16", "32"]
        assert rows[0][2] == "" and rows[0][4] == ""
        assert float(rows[1][1]) < float(rows[0][1])
        assert float(rows[1][2]) > 0
        ET.fromstring((out / "convergence.svg").read_text())

    def test_2d_table_blanks_w1(self, tmp_path):
        cfg = write_config(
            tmp_path,
            experiment="polynomial2d",
            resolutions=[8, 16],
            reference_n=32,
            t_final=0.05,
        )
        out = tmp_path / "out"
        assert main(["converge", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "table.csv")
        assert header == ["N", "err_w1", "eoc_w1", "err_l1", "eoc_l1"]
        for row in rows:
            assert row[1] == "" and row[2] == ""
            assert row[3] != ""

    def test_progress_lines_unless_quiet(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            experiment="parabolic1d",
            resolutions=[16, 32],
            reference_n=32,
            t_final=0.05,
        )
        out = tmp_path / "out"
        assert main(["converge", "--config", cfg, "--out", str(out)]) == 0
        err = capsys.readouterr().err
        assert "N=16" in err and "N=32" in err


class TestCheck:
    def test_cfl_injection_exits_4(self, tmp_path, capsys):
        cfg = write_config(tmp_path, cfl_number=1.5)
        assert main(["check", "--config", cfg]) == 4
        captured = capsys.readouterr()
        assert "FAIL cfl_guard" in captured.out

    def test_negative_mass_injection_exits_4(self, tmp_path, capsys):
        cfg = write_config(tmp_path, inject="negative_mass")
        assert main(["check", "--config", cfg]) == 4
        assert "FAIL positivity" in capsys.readouterr().out

    def test_doubled_step_injection_names_guard(self, tmp_path, capsys):
        cfg = write_config(tmp_path, inject="cfl")
        assert main(["check", "--config", cfg]) == 4
        out = capsys.readouterr().out
        assert "FAIL cfl_guard" in out
        assert "refused" in out
