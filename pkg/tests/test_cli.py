import json
import subprocess
import sys

import pytest

from pals_anomaly import __version__
from pals_anomaly.cli import build_parser, main
from pals_anomaly.mcnrs import REPORT_UNITS

NUMERIC_UNIT_WORDS = ("count", "ns", "keV", "s^-1", "integer")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_estimate_table(capsys):
    code, out, _ = run(capsys, "estimate")
    assert code == 0
    for token in ("4750", "0.08595", "0.05447", "1.28", "7.582e-21", "1.085", "0.001847", "R/C"):
        assert token in out
    assert "source" in out.splitlines()[0]


def test_estimate_json_fields(capsys):
    code, out, _ = run(capsys, "estimate", "--format", "json")
    data = json.loads(out)
    assert code == 0
    assert set(data) == {"paper", "codata", "random_to_true"}
    assert set(data["paper"]["values"]) == set(REPORT_UNITS)
    assert data["paper"]["units"]["r_c"] == "cm"


def test_estimate_csv(capsys):
    code, out, _ = run(capsys, "estimate", "--format", "csv", "--profile", "codata")
    assert code == 0
    assert out.splitlines()[0] == "quantity,value,unit"


def test_simulate_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "simulate", "--seed", "1", "--events", "1000", "--out-dir", str(tmp_path / name))[0] == 0
    for f in ("spectrum.csv", "spectrum_energy.csv", "spectrum.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest_simulate.json").read_text())
    assert manifest["run_id"] in (tmp_path / "a" / "spectrum.json").read_text()
    assert manifest["seeds"] == [1]
    assert manifest["tool_version"] == __version__
    assert {"started", "finished", "config_hash", "outputs"} <= set(manifest)


def test_manifest_reproduces_artifact(tmp_path, capsys):
    run(capsys, "simulate", "--seed", "4", "--events", "2000", "--set", "gas.pressure=60",
        "--out-dir", str(tmp_path / "a"))
    manifest = json.loads((tmp_path / "a" / "manifest_simulate.json").read_text())
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(manifest["config"]))  # JSON is valid YAML
    run(capsys, "simulate", "--config", str(cfg_path), "--out-dir", str(tmp_path / "b"))
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() == (tmp_path / "b" / "spectrum.csv").read_bytes()


@pytest.fixture(scope="module")
def spectrum(tmp_path_factory):
    d = tmp_path_factory.mktemp("spec")
    assert main(["simulate", "--seed", "3", "--events", "300000", "--out-dir", str(d)]) == 0
    return d / "spectrum.csv"


def test_fit_end_to_end(spectrum, tmp_path, capsys):
    code, out, _ = run(capsys, "fit", "--in", str(spectrum), "--out-dir", str(tmp_path))
    assert code == 0
    data = json.loads((tmp_path / "fit.json").read_text())
    assert data["fit"]["converged"] is True
    assert data["run_id"]
    assert "anomaly" in data and "line_search" in data
    assert "o-Ps rate" in out


def test_fit_model_file(spectrum, tmp_path, capsys):
    model = tmp_path / "model.yaml"
    model.write_text("fit:\n  n_components: 1\n  fit_window: [100, 1000]\n")
    code, out, _ = run(capsys, "fit", "--in", str(spectrum), "--model", str(model), "--format", "json",
                       "--out", str(tmp_path / "f.json"))
    assert code == 0
    assert json.loads(out)["fit"]["fit_window"][0] == pytest.approx(100, abs=1)


def test_fit_failure_exit_code(spectrum, tmp_path, capsys):
    code, _, err = run(capsys, "fit", "--in", str(spectrum), "--set", "fit.max_iterations=1",
                       "--set", "fit.n_components=3", "--set", "fit.fit_window=null", "--out-dir", str(tmp_path))
    assert code == 2


def test_report(spectrum, tmp_path, capsys):
    code, out, _ = run(capsys, "report", "--in", str(spectrum), "--out-dir", str(tmp_path))
    assert code == 0
    assert "closed-form estimates" in out and "== fit ==" in out
    curve = (tmp_path / "report_curve.csv").read_text().splitlines()
    assert curve[1] == "t_bin_center_ns,counts,model,residual"
    assert (tmp_path / "report_energy.csv").exists()


def test_report_from_fit_json(spectrum, tmp_path, capsys):
    run(capsys, "fit", "--in", str(spectrum), "--out-dir", str(tmp_path))
    code, out, _ = run(capsys, "report", "--in", str(spectrum), "--fit", str(tmp_path / "fit.json"),
                       "--out-dir", str(tmp_path / "r"))
    assert code == 0


def test_replicas(tmp_path, capsys):
    code, out, _ = run(capsys, "replicas", "--replicas", "3", "--events", "100000", "--format", "json",
                       "--out-dir", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["replicas"] == 3
    rows = (tmp_path / "replicas.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[3:]] == ["0", "1", "2"]


@pytest.mark.parametrize("argv", [["estimate", "--set", "gas.pressure=-1"],
                                  ["simulate", "--set", "simulation.bins=0"],
                                  ["fit", "--in", "/nonexistent.csv"],
                                  ["estimate", "--set", "nonsense"]])
def test_validation_exit_code(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err.startswith("error:")


def test_error_names_field(capsys):
    _, _, err = run(capsys, "estimate", "--set", "gas.pressure=-1")
    assert "gas.pressure" in err and "must be > 0" in err


def test_help_states_units():
    parser = build_parser()
    subparsers = next(a for a in parser._actions if a.dest == "command").choices
    for name, sub in subparsers.items():
        for action in sub._actions:
            if action.type in (int, float):
                assert any(w in action.help for w in NUMERIC_UNIT_WORDS), (name, action.dest)


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "pals_anomaly.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert __version__ in out.stdout
