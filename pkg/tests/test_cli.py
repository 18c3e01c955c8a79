import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from optodip import analytic, preset
from optodip.budget import compute_budget, frequency_grid
from optodip.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from optodip.fit import read_spectrum_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    reader = csv.reader(text.splitlines())
    header = next(reader)
    return header, np.array([[float(v) for v in r] for r in reader])


class TestBudget:
    def test_dip_below_sql(self, capsys):
        code, out, _ = run(capsys, "budget", "--preset", "fig2", "--fmin", "10", "--fmax", "1e5", "--log", "--points", "400")
        assert code == EXIT_OK
        header, data = rows(out)
        assert header == ["freq_hz", "s_b1", "s_b2", "s_d", "s_total"]
        total = data[:, 4]
        assert total.min() < 1
        assert abs(data[np.argmin(data[:, 1]), 0] - 563.2) < 10

    def test_power_flag(self, capsys):
        _, amp, _ = run(capsys, "budget", "--preset", "fig2", "--fmax", "2000", "--points", "20")
        _, power, _ = run(capsys, "budget", "--preset", "fig2", "--fmax", "2000", "--points", "20", "--power")
        np.testing.assert_allclose(rows(amp)[1][:, 1:] ** 2, rows(power)[1][:, 1:], rtol=1e-14)

    def test_sidecar(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        argv = ["budget", "--preset", "fig2", "--engine", "both", "--fmin", "10", "--fmax", "5000", "--log", "--out", str(out)]
        assert run(capsys, *argv, "--port", "tra")[0] == EXIT_OK
        header, _ = rows(out.read_text())
        assert header[5:] == ["s_b1_exact", "s_b2_exact", "s_d_exact", "s_total_exact"]
        summary = json.loads((tmp_path / "b.summary.json").read_text())
        assert summary["max_rel_diff_power"]["overall"] < 1e-3

    def test_sidecar_reflection_matches_library(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        run(capsys, "budget", "--preset", "fig2", "--engine", "both", "--fmin", "10", "--fmax", "5000", "--log", "--out", str(out))
        summary = json.loads((tmp_path / "b.summary.json").read_text())
        budget = compute_budget(preset("fig2"), frequency_grid(10, 5000, 500), engine="both")
        assert summary["max_rel_diff_power"] == budget.max_rel_diff

    def test_sidecar_on_stderr(self, capsys):
        _, _, err = run(capsys, "budget", "--preset", "fig2", "--engine", "both", "--fmax", "1000", "--points", "10")
        assert json.loads(err)["engine"] == "both"

    def test_json(self, capsys):
        _, out, _ = run(capsys, "budget", "--preset", "fig2", "--fmax", "1000", "--points", "10", "--format", "json", "--port", "tra")
        payload = json.loads(out)
        assert payload["summary"]["port"] == "transmission"
        assert len(payload["columns"]["s_total"]) == 10

    def test_csv_reads_back(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        run(capsys, "budget", "--preset", "fig2", "--fmax", "1000", "--points", "10", "--out", str(out))
        back = read_spectrum_csv(out, column="s_total")
        assert len(back) == 10

    @pytest.mark.parametrize("extra", [["--points", "1"], ["--fmin", "100", "--fmax", "10"]])
    def test_usage_errors(self, capsys, extra):
        code, _, err = run(capsys, "budget", "--preset", "fig2", *extra)
        assert code == EXIT_USAGE
        assert "optodip: error" in err

    def test_deterministic(self, capsys):
        argv = ["budget", "--preset", "experiment", "--engine", "both", "--points", "50", "--log", "--fmax", "3000"]
        assert run(capsys, *argv) == run(capsys, *argv)


class TestSources:
    def test_missing_source(self, capsys):
        assert run(capsys, "frequencies")[0] == EXIT_USAGE

    def test_both_sources(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text("{}")
        assert run(capsys, "frequencies", "--preset", "fig2", "--config", str(path))[0] == EXIT_USAGE

    def test_config_file(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(preset("experiment").to_config()))
        a = run(capsys, "frequencies", "--config", str(path))
        b = run(capsys, "frequencies", "--preset", "experiment")
        assert a == b

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        code, _, err = run(capsys, "frequencies", "--config", str(path))
        assert code == EXIT_USAGE and err

    def test_unknown_preset(self, capsys):
        assert run(capsys, "frequencies", "--preset", "nope")[0] == EXIT_USAGE


class TestFrequencies:
    def test_reference(self, capsys):
        _, out, _ = run(capsys, "frequencies", "--preset", "fig2", "--eta", "0.92")
        record = json.loads(out)
        assert record["omega_opt_hz"] == pytest.approx(406.1249089674056, rel=1e-12)
        assert record["omega_dip_hz"] == pytest.approx(563.1939167404330, rel=1e-12)
        assert record["omega_dip_measured_hz"] == pytest.approx(543.4841990790620, rel=1e-12)
        assert record["ratio_opt_over_dip_m"] == pytest.approx(0.7472616676907762, rel=1e-12)

    @pytest.mark.parametrize("eta, key", [("1", "omega_dip_hz"), ("0", "omega_opt_hz")])
    def test_limits(self, capsys, eta, key):
        record = json.loads(run(capsys, "frequencies", "--preset", "fig2", "--eta", eta)[1])
        assert record["omega_dip_measured_hz"] == pytest.approx(record[key], rel=1e-12)

    def test_bad_eta(self, capsys):
        assert run(capsys, "frequencies", "--preset", "fig2", "--eta", "1.5")[0] == EXIT_USAGE


class TestSweep:
    def test_detuning_monotone(self, capsys):
        _, out, _ = run(capsys, "sweep", "--preset", "experiment", "--var", "detuning", "--start", "0.2", "--stop", "2", "--points", "50")
        header, data = rows(out)
        assert header[0] == "detuning_over_kappa"
        assert np.all(np.diff(data[:, 4]) > 0)

    def test_single_point_matches_frequencies(self, capsys):
        p = preset("fig2")
        value = p.detuning / p.total_decay
        _, out, _ = run(capsys, "sweep", "--preset", "fig2", "--var", "detuning", "--start", repr(value), "--stop", "1", "--points", "1", "--eta", "0.92")
        record = json.loads(run(capsys, "frequencies", "--preset", "fig2", "--eta", "0.92")[1])
        header, data = rows(out)
        for i, key in enumerate(header[1:], start=1):
            assert data[0, i] == pytest.approx(record[key], rel=1e-14)

    def test_eta_endpoints(self, capsys):
        _, out, _ = run(capsys, "sweep", "--preset", "fig2", "--var", "eta", "--start", "0", "--stop", "1", "--points", "11")
        _, data = rows(out)
        f = analytic.characteristic_frequencies(preset("fig2"))
        assert data[0, 4] == pytest.approx(1.0, rel=1e-12)
        assert data[-1, 4] == pytest.approx(f.omega_opt / f.omega_dip, rel=1e-12)
        assert np.all(np.diff(data[:, 4]) < 0)

    def test_log_power(self, capsys):
        _, out, _ = run(capsys, "sweep", "--preset", "fig2", "--var", "power", "--start", "0.1", "--stop", "10", "--points", "3", "--log")
        _, data = rows(out)
        np.testing.assert_allclose(data[:, 0], [0.1, 1, 10])
        np.testing.assert_allclose(data[:, 1] / data[1, 1], np.sqrt([0.1, 1, 10]), rtol=1e-12)

    def test_zero_points(self, capsys):
        assert run(capsys, "sweep", "--preset", "fig2", "--var", "eta", "--start", "0", "--stop", "1", "--points", "0")[0] == EXIT_USAGE


class TestFits:
    def test_dip_round_trip(self, tmp_path, capsys):
        data = tmp_path / "dip.csv"
        assert run(capsys, "synth-dip", "--seed", "3", "--out", str(data))[0] == EXIT_OK
        code, out, _ = run(capsys, "fit-dip", str(data))
        assert code == EXIT_OK
        record = json.loads(out)
        assert record["omega_dip_m_hz"] == pytest.approx(1180, rel=0.01)
        assert record["delta_omega_hz"] == pytest.approx(70, rel=0.15)
        assert {"band_hz", "initial_guess", "n_iterations"} <= record.keys()

    def test_synth_deterministic(self, capsys):
        assert run(capsys, "synth-dip", "--seed", "5") == run(capsys, "synth-dip", "--seed", "5")
        assert run(capsys, "synth-dip", "--seed", "5")[1] != run(capsys, "synth-dip", "--seed", "6")[1]

    def test_empty_csv(self, tmp_path, capsys):
        data = tmp_path / "empty.csv"
        data.write_text("")
        assert run(capsys, "fit-dip", str(data))[0] == EXIT_USAGE

    def test_band_without_dip(self, tmp_path, capsys):
        data = tmp_path / "dip.csv"
        run(capsys, "synth-dip", "--out", str(data))
        code, _, err = run(capsys, "fit-dip", str(data), "--fmin", "1600")
        assert code == EXIT_USAGE and "dip" in err.lower()

    def test_iteration_limit_is_numerical(self, tmp_path, capsys):
        data = tmp_path / "dip.csv"
        run(capsys, "synth-dip", "--out", str(data))
        assert run(capsys, "fit-dip", str(data), "--max-iter", "3")[0] == EXIT_NUMERICAL

    def test_ratio_round_trip(self, tmp_path, capsys):
        data = tmp_path / "r.csv"
        run(capsys, "synth-ratio", "--preset", "experiment", "--eta", "0.92", "--out", str(data))
        record = json.loads(run(capsys, "fit-ratio", str(data), "--preset", "experiment", "--eta", "0.92")[1])
        assert abs(record["kappa_in_over_kappa"] - 0.81) < 0.02
        assert record["eta"] == 0.92

    def test_ratio_eta_zero(self, tmp_path, capsys):
        data = tmp_path / "r.csv"
        run(capsys, "synth-ratio", "--preset", "experiment", "--out", str(data))
        record = json.loads(run(capsys, "fit-ratio", str(data), "--preset", "experiment", "--eta", "0")[1])
        assert record["boundary_fit"] and record["degenerate"]

    def test_ratio_single_point(self, tmp_path, capsys):
        data = tmp_path / "r.csv"
        data.write_text("detuning_hz,ratio,sigma\n100000,0.8,0.01\n")
        assert run(capsys, "fit-ratio", str(data), "--preset", "experiment")[0] == EXIT_USAGE


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "optodip.cli", "frequencies", "--preset", "fig2"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "omega_opt_hz" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "optodip.cli", "budget"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2
