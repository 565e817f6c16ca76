import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from flightoed.airframe import ConfigError
from flightoed.cli import main
from flightoed.config import ValidationError, experiment_from_dict, load_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DEG = math.pi / 180.0


@pytest.fixture
def cfgdir(tmp_path):
    """Copy of the shipped configs so relative paths resolve inside tmp_path."""
    d = tmp_path / "configs"
    shutil.copytree(CONFIGS, d)
    return d


def run(args, capsys=None):
    code = main([str(a) for a in args])
    out = capsys.readouterr().out if capsys else ""
    return code, [Path(line) for line in out.splitlines() if line.endswith((".json", ".csv"))]


def one(paths, suffix):
    found = [p for p in paths if p.name.endswith(suffix)]
    assert len(found) == 1, paths
    return found[0]


# --- configuration -------------------------------------------------------------


def test_shipped_configs_load():
    for name in ("longitudinal", "lateral_rudder", "lateral_aileron"):
        cfg = load_experiment(CONFIGS / f"{name}.json")
        assert cfg.horizon == 10.0 and cfg.control_period == 0.1
        assert cfg.baseline["delta_t_s"] == 0.3
        assert cfg.sensor.sigma["alpha"] == pytest.approx(0.5 * DEG)


def test_schema_error_reports_line_and_field(tmp_path):
    doc = json.loads((CONFIGS / "longitudinal.json").read_text())
    doc["airframe"] = str(CONFIGS / "reference_airframe.json")
    doc["horizon_s"] = -1
    text = json.dumps(doc, indent=2)
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(ValidationError) as exc:
        load_experiment(p)
    line, field, _ = exc.value.diagnostics[0]
    assert field == "horizon_s"
    assert text.splitlines()[line - 1].strip().startswith('"horizon_s"')


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"axis": "longitudinal", "baseline": {"kind": "3211"}, "colour": "red"}))
    with pytest.raises(ValidationError):
        load_experiment(p)


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"axis": "longitudinal",\n  oops}')
    with pytest.raises(ValidationError) as exc:
        load_experiment(p)
    assert exc.value.diagnostics[0][0] == 2


def test_overrides_and_grid_checks():
    doc = json.loads((CONFIGS / "longitudinal.json").read_text())
    cfg = experiment_from_dict(doc, CONFIGS, {"amplitude_deg": 3.0, "delta_t_s": 0.2, "grid_hz": 20.0, "seed": 5})
    assert cfg.baseline["amplitude_deg"] == 3.0 and cfg.baseline["delta_t_s"] == 0.2
    assert cfg.control_period == pytest.approx(0.05) and cfg.seed == 5
    with pytest.raises(ConfigError):
        experiment_from_dict(doc, CONFIGS, {"grid_hz": 30.0})  # 1/30 s is not a whole number of samples


def test_trim_source_solve():
    doc = json.loads((CONFIGS / "longitudinal.json").read_text())
    doc["trim"] = {"source": "solve"}
    cfg = experiment_from_dict(doc, CONFIGS)
    assert abs(cfg.trim.alpha / DEG - -0.4) < 0.3


def test_defaults_without_airframe_file():
    cfg = experiment_from_dict({"axis": "lateral-rudder", "baseline": {"kind": "doublet", "amplitude_deg": 4.0, "delta_t_s": 1.0, "start_s": 1.0}})
    sig = cfg.baseline_signal()
    assert sig.channels == ("dr",) and sig.metadata["kind"] == "doublet"


# --- command line ---------------------------------------------------------------


def test_missing_config_exit_2(tmp_path, capsys):
    code, _ = run(["trim", "--config", tmp_path / "nope.json"], capsys)
    assert code == 2


def test_schema_error_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"axis": "sideways", "baseline": {"kind": "3211"}}))
    code, _ = run(["modal", "--config", p])
    err = capsys.readouterr().err
    assert code == 2 and "axis" in err


def test_too_long_maneuver_exit_2(cfgdir, tmp_path, capsys):
    code, _ = run(["gen", "--config", cfgdir / "longitudinal.json", "--out", tmp_path, "--dt", "2.0"], capsys)
    assert code == 2


def test_trim_and_modal(cfgdir, tmp_path, capsys):
    code, paths = run(["trim", "--config", cfgdir / "longitudinal.json", "--out", tmp_path], capsys)
    assert code == 0
    doc = json.loads(one(paths, ".json").read_text())
    assert doc["equilibrium_residual_max"] < 1e-9
    assert abs(doc["solved"]["alpha_deg"] - -0.4) < 0.3

    code, paths = run(["modal", "--config", cfgdir / "longitudinal.json", "--out", tmp_path], capsys)
    assert code == 0
    rows = one(paths, ".csv").read_text().splitlines()
    assert len(rows) == 6  # header and five modes
    sp = [r for r in rows if r.startswith("ShortPeriod,")][0]
    assert float(sp.split(",")[1]) == pytest.approx(3.72, rel=0.02)


def test_gen_sim_info_compare_quantize(cfgdir, tmp_path, capsys):
    cfg = cfgdir / "lateral_rudder.json"
    code, paths = run(["gen", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 0
    sig = one(paths, ".csv")
    assert sig.read_text().splitlines()[0] == "t,dr"

    code, paths = run(["sim", "--config", cfg, "--out", tmp_path, "--signal", sig], capsys)
    assert code == 0 and len(one(paths, ".csv").read_text().splitlines()) == 1002

    code, paths = run(["info", "--config", cfg, "--out", tmp_path], capsys)
    rep = json.loads(one(paths, ".json").read_text())["report"]
    assert code == 0 and rep["rank"] == rep["n_parameters"] == 11 and rep["unidentifiable"] == []

    code, paths = run(["compare", "--config", cfg, "--out", tmp_path, "--candidate", sig], capsys)
    doc = json.loads(one(paths, ".json").read_text())
    assert code == 0
    assert all(abs(r["dCRLB_pct"]) < 1e-6 for r in doc["rows"])  # 9-digit CSV round trip

    code, paths = run(["quantize", "--config", cfg, "--out", tmp_path, "--signal", sig, "--min-step", "0.2"], capsys)
    doc = json.loads(one(paths, ".json").read_text())
    assert code == 0 and all(s["duration_s"] >= 0.2 - 1e-9 for s in doc["schedule"])


def test_oed_report_matches_info_on_written_signal(cfgdir, tmp_path, capsys):
    cfg = cfgdir / "lateral_rudder.json"
    code, paths = run(["oed", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 0
    design = [p for p in paths if p.suffix == ".csv" and not p.name.endswith("_comparison.csv")][0]
    oed = json.loads(one(paths, ".json").read_text())
    assert oed["solution"]["converged"]
    assert oed["comparison"]["mean_dCRLB_pct"] < -40

    code, paths = run(["info", "--config", cfg, "--out", tmp_path, "--signal", design], capsys)
    info = json.loads(one(paths, ".json").read_text())["report"]
    assert info["scaled_a_criterion"] == pytest.approx(oed["report"]["scaled_a_criterion"], rel=1e-9)

    code, paths = run(["screen", "--config", cfg, "--out", tmp_path, "--signal", design, "--samples", "3"], capsys)
    doc = json.loads(one(paths, ".json").read_text())
    assert code == 0 and doc["nominal"]["passed"] and doc["samples"] == 3


def test_not_converged_exit_3(cfgdir, tmp_path, capsys):
    doc = json.loads((cfgdir / "lateral_rudder.json").read_text())
    doc["solver"]["max_steps"] = 2
    p = cfgdir / "short.json"
    p.write_text(json.dumps(doc))
    code, paths = run(["oed", "--config", p, "--out", tmp_path], capsys)
    assert code == 3
    assert any(p.suffix == ".json" for p in paths)


def test_seed_changes_artifact_names(cfgdir, tmp_path, capsys):
    cfg = cfgdir / "lateral_rudder.json"
    _, a = run(["gen", "--config", cfg, "--out", tmp_path], capsys)
    _, b = run(["gen", "--config", cfg, "--out", tmp_path, "--seed", "1"], capsys)
    assert a[0].name != b[0].name and a[0].read_bytes() == b[0].read_bytes()


def test_console_script_entry_point(cfgdir, tmp_path):
    exe = shutil.which("flightoed")
    cmd = [exe] if exe else [sys.executable, "-m", "flightoed.cli"]
    res = subprocess.run(cmd + ["modal", "--config", str(cfgdir / "longitudinal.json"), "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "DutchRoll" in res.stdout


def test_nan_free_json(cfgdir, tmp_path, capsys):
    code, paths = run(["modal", "--config", cfgdir / "lateral_aileron.json", "--out", tmp_path], capsys)
    text = one(paths, ".json").read_text()
    assert "NaN" not in text and "Infinity" not in text
    assert np.isfinite(json.loads(text)["modes"][0]["natural_frequency_rad_s"])


def test_monte_carlo_runs_from_config(cfgdir, tmp_path, capsys):
    doc = json.loads((cfgdir / "lateral_rudder.json").read_text())
    doc["monte_carlo"]["runs"] = 7
    p = cfgdir / "mc.json"
    p.write_text(json.dumps(doc))
    code, paths = run(["info", "--config", p, "--out", tmp_path, "--monte-carlo"], capsys)
    assert code == 0
    assert json.loads(one(paths, ".json").read_text())["monte_carlo"]["n_runs"] == 7
