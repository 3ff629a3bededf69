import json
import math
import subprocess
import sys

import pytest

from pscurv.cli import main
from pscurv.config import preset
from pscurv.pipeline import write_artifacts
from pscurv.report import MissingArtifacts, report


def _diag(path):
    return json.loads((path / "diagnostics.json").read_text())


def _check(data, name):
    return next(c for c in data["checks"] if c["name"] == name)


def test_trivial_run(tmp_path):
    out = tmp_path / "trivial"
    assert main(["run", "--scenario", "TRIVIAL_ODE", "--out", str(out)]) == 0
    data = _diag(out)
    assert data["passed"]
    assert _check(data, "ab_integrated_t")["value"] > 0
    assert abs(data["metrics"]["t1_estimate"] - 1.5) <= 1e-4
    for name in ("config.ini", "trajectory_raw.csv", "final_raw.bin", "extension.json", "omega_limit.bin"):
        assert (out / name).exists()
    text = report(out)
    ext = json.loads((out / "extension.json").read_text())
    assert all(abs(w - math.sqrt(2)) <= 1e-6 for w in ext["omega_min"] + ext["omega_max"])
    assert "omega estimate range   1.41421 .. 1.41421" in text
    assert (out / "summary.txt").read_text() == text


def test_circle_csf(tmp_path):
    out = tmp_path / "circle"
    assert main(["csf", "--scenario", "CSF_CIRCLE", "--out", str(out)]) == 0
    assert _check(_diag(out), "area_law_deviation")["value"] <= 1e-4
    assert (out / "curve.csv").exists()


def test_csf_rejects_other_scenarios(tmp_path, capsys):
    assert main(["csf", "--scenario", "TRIVIAL_ODE", "--out", str(tmp_path / "x")]) == 2
    assert not (tmp_path / "x").exists()


def test_malformed_config_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[source]\nvalue = -1\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(bad), "--out", str(out)]) != 0
    assert not out.exists()
    assert "source f must be nonnegative" in capsys.readouterr().err


def test_bad_override_exit_code(tmp_path):
    assert main(["evolve", "--set", "grid.points=7", "--out", str(tmp_path / "o")]) == 2


def test_report_missing_artifacts(tmp_path, capsys):
    with pytest.raises(MissingArtifacts):
        report(tmp_path)
    assert main(["report", str(tmp_path)]) == 1
    assert main(["report", str(tmp_path / "absent")]) == 1


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PSCURV_OUTPUT_ROOT", str(tmp_path))
    assert main(["evolve", "--scenario", "TRIVIAL_ODE", "--set", "grid.points=8"]) == 0
    assert (tmp_path / "trivial_ode" / "diagnostics.json").exists()


def test_deterministic_outputs(tmp_path):
    args = ["run", "--scenario", "TRIVIAL_ODE", "--set", "grid.points=8", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_batch_of_configs(tmp_path):
    cfg = preset("TRIVIAL_ODE").with_overrides(["grid.points=8"])
    paths = []
    for k in range(2):
        p = tmp_path / f"c{k}.ini"
        p.write_text(cfg.dumps())
        paths += ["--config", str(p)]
    out = tmp_path / "batch"
    assert main(["evolve", *paths, "--jobs", "2", "--out", str(out)]) == 0
    assert (out / "00_trivial_ode" / "diagnostics.json").exists()
    assert (out / "01_trivial_ode" / "diagnostics.json").exists()
    assert "00_trivial_ode" in report(out)


def test_stationary_constants(tmp_path):
    out = tmp_path / "st"
    assert main(["stationary", "--f", "0.5", "1", "2", "--set", "grid.points=16", "--out", str(out)]) == 0
    data = _diag(out)
    assert len(data["checks"]) == 6 and data["passed"]


def test_ellipse_report(runs, tmp_path):
    result, _ = runs("CSF_ELLIPSE")
    out = write_artifacts(result, tmp_path / "ellipse")
    text = report(out)
    assert "ktilde_dev_at_099" in text and "v_limit_error" in text
    assert _check(_diag(out), "v_limit_error")["value"] <= 1e-3
    assert (out / "plot_ktilde_dev.csv").exists()
    assert (out / "plot_nu_norm.csv").exists()


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "pscurv.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("evolve", "stationary", "csf", "diagnose", "extend", "report"):
        assert sub in proc.stdout
