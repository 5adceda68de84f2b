import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rtkrylov.cli import fmt, main, replay
from rtkrylov.ensemble import spacing_diagnostics
from rtkrylov.spectra import SpacingDistribution, read_spectrum

COMMANDS = {
    "spectrum": ["spectrum", "gue", "--q", "60", "--seed", "7"],
    "run": ["run", "--spectrum", "spacing", "--kind", "wigner", "--q", "80", "--kappa", "0.4", "--nt", "6",
            "--state", "random", "--seed", "2"],
    "scan": ["scan", "--q", "100", "--kappa-num", "3", "--gamma-num", "3", "--nt", "4", "--mode", "ivqpe"],
    "bounds": ["bounds", "--q", "50", "--jmax", "4"],
    "envelope": ["envelope", "--kind", "gue", "--q", "60", "--realizations", "5", "--seed", "4", "--threads", "2"],
    "lcu": ["lcu", "--q", "40", "--grid", "adaptive", "--kappa", "0.3", "--nt", "4", "--ex", "node"],
    "broaden": ["broaden", "--q", "20", "--realizations", "40", "--bins", "30", "--noise-seed", "3"],
    "population": ["population", "--spectrum", "dos", "--kind", "semicircle", "--q", "70", "--kappa", "0.3"],
    "matrices": ["matrices", "--q", "30", "--t1", "0.2", "--nt", "3"],
}


def run_cli(argv, out):
    code = main(list(argv) + ["--out", str(out)])
    return code


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_every_command_replays_byte_identically(name, tmp_path, capsys):
    out = tmp_path / name
    assert run_cli(COMMANDS[name], out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == name
    assert "--out" not in manifest["argv"]
    assert {"params", "seeds", "version", "timestamp", "outputs"} <= set(manifest)
    result = replay(out / "manifest.json")
    assert result and all(result.values())


def test_replay_reports_mismatch(tmp_path, capsys):
    out = tmp_path / "r"
    assert run_cli(COMMANDS["matrices"], out) == 0
    m = json.loads((out / "manifest.json").read_text())
    m["outputs"][0]["sha256"] = "0" * 64
    (out / "manifest.json").write_text(json.dumps(m))
    capsys.readouterr()
    assert main(["replay", str(out / "manifest.json")]) == 1
    assert json.loads(capsys.readouterr().out)["identical"] is False


def test_linear_spectrum_file(tmp_path):
    assert run_cli(["spectrum", "linear", "--q", "1000", "--de", "1"], tmp_path) == 0
    spec = read_spectrum(tmp_path / "spectrum.txt")
    assert spec.Q == 1000 and np.array_equal(spec.energies, np.arange(1, 1001))


def test_gue_spectrum_is_deterministic(tmp_path):
    run_cli(["spectrum", "gue", "--q", "500", "--seed", "7"], tmp_path / "a")
    run_cli(["spectrum", "gue", "--q", "500", "--seed", "7"], tmp_path / "b")
    assert (tmp_path / "a/spectrum.txt").read_bytes() == (tmp_path / "b/spectrum.txt").read_bytes()


def test_wigner_spacing_file_passes_diagnostics(tmp_path):
    run_cli(["spectrum", "spacing", "--kind", "wigner", "--d", "1", "--q", "1000", "--seed", "1"], tmp_path)
    spacings = np.diff(read_spectrum(tmp_path / "spectrum.txt").energies)
    assert spacing_diagnostics(spacings, SpacingDistribution("wigner", 1.0)).ks_pass


def test_validation_error_exit_code(tmp_path, capsys):
    capsys.readouterr()
    assert run_cli(["run", "--nt", "0", "--kappa", "0.4"], tmp_path) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 2 and err["error"] == "InvalidParameterError"
    assert run_cli(["run", "--kappa", "0.4", "--t1", "0.1"], tmp_path) == 2
    assert run_cli(["spectrum", "nonsense"], tmp_path) == 2


def test_numerical_error_exit_code(tmp_path, capsys):
    capsys.readouterr()
    assert run_cli(["run", "--q", "10", "--kappa", "0.4", "--ssv-rel", "10"], tmp_path) == 3
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3


def test_timestep_regime_traces(tmp_path):
    finals = {}
    for k in ("0.05", "0.4", "1.1"):
        run_cli(["run", "--q", "1000", "--kappa", k, "--nt", "10"], tmp_path / k)
        header, rows = read_csv(tmp_path / k / "trace.csv")
        assert header == ["step", "t_j", "E_g", "delta_E1", "retained_rank"]
        finals[k] = rows[-1][3]
    assert finals["0.4"] < finals["0.05"] and finals["0.4"] < finals["1.1"]


def test_linear_and_adaptive_grids(tmp_path):
    for grid in ("linear", "adaptive"):
        assert run_cli(["run", "--q", "200", "--kappa", "0.3", "--grid", grid, "--gamma", "2", "--mode", "ivqpe"],
                       tmp_path / grid) == 0
    _, lin = read_csv(tmp_path / "linear/trace.csv")
    _, ada = read_csv(tmp_path / "adaptive/trace.csv")
    assert lin[2][1] == pytest.approx(2 * lin[1][1]) and ada[2][1] == pytest.approx(3 * ada[1][1])


def test_population_suppression_near_four_fifths(tmp_path):
    run_cli(["population", "--spectrum", "linear", "--q", "1000", "--kappa", "0.25"], tmp_path)
    header, rows = read_csv(tmp_path / "population.csv")
    p = np.array([r[header.index("p_n")] for r in rows])
    assert abs(int(np.argmin(p)) + 1 - 800) < 50
    assert abs(p.sum() - 1) < 1e-10


def test_bounds_all_satisfied(tmp_path):
    run_cli(["bounds", "--q", "100", "--dt", "auto", "--jmax", "8"], tmp_path)
    reports = json.loads((tmp_path / "bounds.json").read_text())
    assert len(reports) == 8 and all(r["satisfied"] for r in reports)


def test_envelope_contains_benchmark(tmp_path):
    run_cli(["envelope", "--kind", "exponential", "--realizations", "1000", "--seed", "1"], tmp_path)
    header, rows = read_csv(tmp_path / "envelope.csv")
    assert header == ["step", "min", "max", "mean", "std", "benchmark"]
    for r in rows:
        assert r[1] * (1 - 1e-12) <= r[5] <= r[2] * (1 + 1e-12)


def test_csv_formatting_is_round_trip_exact():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "rtkrylov", "spectrum", "search", "--q", "5", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["outputs"] == ["spectrum.txt"]
