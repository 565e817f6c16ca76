"""Command-line front end.

Every subcommand reads an experiment file (``--config``) and writes its
artifacts to ``--out`` as ``<axis>_<subcommand>_<hash>.<ext>``.  The hash is
derived from the configuration, the seed and the contents of any input
files, so identical runs produce identical names and bytes.

Exit status: 0 success, 2 invalid configuration or missing input, 3 the
optimizer did not converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from flightoed.airframe import DEG, ConfigError
from flightoed.config import ExperimentConfig, load_experiment
from flightoed.conversion import derivative_conversion
from flightoed.dynamics import TrimError, nonlinear_rhs, trim_solve
from flightoed.information import (
    compare_designs,
    information_report,
    monte_carlo_crlb_check,
    simulate_lti,
)
from flightoed.lti import build_lateral_lti, build_longitudinal_lti
from flightoed.maneuvers import InputSignal, quantization_error, quantize_to_fcc_steps
from flightoed.modal import TABLE_ORDER, modal_report
from flightoed.oed import axis_model, bang_bang_metric, make_problem, solve_oed

log = logging.getLogger("flightoed")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

ANGLE_STATES = ("alpha", "beta", "phi", "theta", "psi", "p", "q", "r", "da", "de", "dr")


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to floats, non-finite to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


class Artifacts:
    """Names and writes the files of one subcommand run."""

    def __init__(self, out_dir: Path, cfg: ExperimentConfig, sub: str, inputs: list[str]):
        h = hashlib.sha256()
        h.update(json.dumps({"config": cfg.document, "seed": cfg.seed, "sub": sub}, sort_keys=True).encode())
        for text in inputs:
            h.update(hashlib.sha256(text.encode()).digest())
        self.stem = f"{cfg.axis}_{sub}_{h.hexdigest()[:12]}"
        self.out_dir = out_dir
        self.written: list[Path] = []

    def write(self, text: str, ext: str, tag: str = "") -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{self.stem}{'_' + tag if tag else ''}.{ext}"
        path.write_text(text)
        self.written.append(path)
        return path


def _read_signal(path) -> tuple[InputSignal, str]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    text = path.read_text()
    try:
        return InputSignal.from_csv(text), text
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _signal_or_baseline(args, cfg):
    if getattr(args, "signal", None):
        return _read_signal(args.signal)
    sig = cfg.baseline_signal()
    return sig, ""


def _signal_csv(sig: InputSignal) -> str:
    # signals stay SI (radians); trajectories are exported in degrees
    return sig.to_csv(9)


def _coefficients(cfg):
    return derivative_conversion("to_dimensionless", cfg.derivs, cfg.props, cfg.trim)


def _model(cfg):
    return axis_model(cfg.axis, cfg.derivs, cfg.trim, cfg.props.gravity, cfg.kinematics)


def _trim_dict(t):
    d = t.to_dict()
    d["flight_path_angle_deg"] = t.flight_path_angle / DEG
    return d


# ---------------------------------------------------------------- subcommands


def cmd_trim(args, cfg, art):
    coeffs = _coefficients(cfg)
    residual = nonlinear_rhs(cfg.trim.state_vector(), cfg.trim.controls(), coeffs, cfg.props)
    out = {"configured": _trim_dict(cfg.trim), "equilibrium_residual_max": float(np.max(np.abs(residual)))}
    try:
        solved = trim_solve(cfg.trim.airspeed, coeffs, cfg.props)
        out["solved"] = _trim_dict(solved)
        out["difference_deg"] = {
            k: out["solved"][k] - out["configured"][k] for k in ("alpha_deg", "theta_deg", "elevator_deg")
        }
    except TrimError as exc:
        out["solved"] = None
        out["error"] = str(exc)
    out["coefficients"] = coeffs.as_dict()
    art.write(dumps(out), "json")
    return EXIT_OK


def cmd_modal(args, cfg, art):
    g = cfg.props.gravity
    modes = modal_report(build_longitudinal_lti(cfg.derivs, cfg.trim, g, cfg.kinematics))
    modes += modal_report(build_lateral_lti(cfg.derivs, cfg.trim, g, cfg.kinematics))
    by_label = {m.label: m for m in modes}
    cols = ["mode", "natural_frequency_rad_s", "damping_ratio", "time_constant_s", "overshoot_pct", "period_s", "eigenvalue_re", "eigenvalue_im", "stable"]
    lines = [",".join(cols)]
    rows = []
    for label in TABLE_ORDER:
        r = by_label[label].to_row()
        vals = [label, r["natural_frequency"], r["damping_ratio"], r["time_constant"], r["overshoot_pct"], r["period"], r["eigenvalue_re"], r["eigenvalue_im"], r["stable"]]
        rows.append(dict(zip(cols, vals)))
        lines.append(",".join(_fmt(v) for v in vals))
    text = "\n".join(lines) + "\n"
    art.write(text, "csv")
    art.write(dumps({"modes": rows, "kinematics": cfg.kinematics}), "json")
    sys.stdout.write(text)
    return EXIT_OK


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def cmd_gen(args, cfg, art):
    sig = cfg.baseline_signal()
    meta = dict(sig.metadata)
    meta["schedule_deg"] = [[t0, dur, lvl / DEG] for t0, dur, lvl in meta.pop("schedule")]
    meta["amplitude_deg"] = meta.pop("amplitude") / DEG
    meta["rate_limit_deg_s"] = meta.pop("rate_limit") / DEG
    meta["channel"] = cfg.channel
    art.write(_signal_csv(sig), "csv")
    art.write(dumps(meta), "json")
    return EXIT_OK


def cmd_sim(args, cfg, art):
    sig, _ = _signal_or_baseline(args, cfg)
    traj = simulate_lti(_model(cfg), sig)
    deg = [n for n in traj.labels if n in ANGLE_STATES]
    art.write(traj.to_csv(9, degrees=deg), "csv")
    peaks = {n: float(np.max(np.abs(traj.column(n)))) / (DEG if n in deg else 1.0) for n in traj.labels}
    art.write(dumps({"peak_abs": peaks, "angles_in_degrees": True, "states_relative_to_trim": True}), "json")
    return EXIT_OK


def cmd_info(args, cfg, art):
    sig, _ = _signal_or_baseline(args, cfg)
    model = _model(cfg)
    report = information_report(model, sig, cfg.sensor)
    out = {"report": report.to_dict()}
    if args.monte_carlo:
        mc_doc = cfg.monte_carlo
        runs = mc_doc.get("runs", 500) if args.monte_carlo < 0 else args.monte_carlo
        mc = monte_carlo_crlb_check(
            model, sig, cfg.sensor, report.identifiable, n_runs=runs, seed=cfg.seed,
            perturbation=mc_doc.get("perturbation", 0.1),
        )  # fmt: skip
        out["monte_carlo"] = mc.to_dict()
    art.write(dumps(out), "json")
    return EXIT_OK


def cmd_oed(args, cfg, art):
    baseline = cfg.baseline_signal()
    solver = cfg.solver
    problem = make_problem(
        cfg.axis, cfg.derivs, cfg.trim, baseline, cfg.sensor, cfg.constraints, cfg.props.gravity, cfg.kinematics,
        control_period=cfg.control_period,
        gradient=solver.get("gradient", "exact"),
        max_outer=solver.get("max_steps", 500),
        stationarity_tol=solver.get("stationarity_tol", 1e-6),
    )  # fmt: skip
    sol = solve_oed(problem)
    # the report describes exactly the signal that lands on disk
    text = _signal_csv(sol.signal)
    written = InputSignal.from_csv(text)
    report = information_report(problem.model, written, problem.sensor, problem.parameters)
    cmp = compare_designs(problem.model, baseline, written, problem.sensor, problem.parameters)
    out = {
        "solution": sol.summary(),
        "report": report.to_dict(),
        "comparison": cmp.to_dict(),
        "bang_bang_fraction": bang_bang_metric(written, cfg.constraints),
        "baseline": dict(cfg.baseline),
        "control_period_s": cfg.control_period,
    }
    art.write(text, "csv")
    art.write(cmp.to_csv(), "csv", "comparison")
    art.write(dumps(out), "json")
    if not sol.converged:
        log.error("optimizer stopped with status %s", sol.status)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_compare(args, cfg, art):
    if args.baseline:
        base, _ = _read_signal(args.baseline)
    else:
        base = cfg.baseline_signal()
    cand, _ = _read_signal(args.candidate)
    model = _model(cfg)
    cmp = compare_designs(model, base, cand, cfg.sensor, model.parameter_names)
    art.write(cmp.to_csv(), "csv")
    art.write(dumps(cmp.to_dict()), "json")
    return EXIT_OK


def cmd_screen(args, cfg, art):
    from flightoed.assessment import nonlinear_replay, perturbed_model_screen

    sig, _ = _signal_or_baseline(args, cfg)
    coeffs = _coefficients(cfg)
    envelope = cfg.constraints.envelope
    traj, report = nonlinear_replay(sig, coeffs, cfg.props, cfg.trim, envelope)
    deg = [n for n in traj.labels if n in ANGLE_STATES]
    sc = cfg.screen
    pct = args.perturbation_pct if args.perturbation_pct is not None else sc.get("perturbation_pct", 20.0)
    n = args.samples if args.samples is not None else sc.get("samples", 100)
    frac = perturbed_model_screen(sig, coeffs, cfg.props, cfg.trim, pct, n, cfg.seed, envelope, sc.get("workers", 1))
    art.write(traj.to_csv(9, degrees=deg), "csv")
    out = {"nominal": report.to_dict(), "perturbation_pct": pct, "samples": n, "seed": cfg.seed, "pass_fraction": frac}
    art.write(dumps(out), "json")
    return EXIT_OK


def cmd_quantize(args, cfg, art):
    sig, _ = _read_signal(args.signal)
    min_step = args.min_step if args.min_step is not None else cfg.quantize.get("min_step_s", cfg.control_period)
    q, schedule = quantize_to_fcc_steps(sig, min_step)
    art.write(_signal_csv(q), "csv")
    art.write(dumps({"min_step_s": min_step, "schedule": schedule, "squared_error_rad2_s": quantization_error(sig, q)}), "json")
    return EXIT_OK


COMMANDS = {
    "trim": (cmd_trim, "solve and report the trim point"),
    "modal": (cmd_modal, "mode characteristics of both axes"),
    "gen": (cmd_gen, "write the baseline maneuver"),
    "sim": (cmd_sim, "linear response to a signal"),
    "info": (cmd_info, "Fisher information and CRLB report"),
    "oed": (cmd_oed, "optimize the input signal"),
    "compare": (cmd_compare, "CRLB change between two signals"),
    "screen": (cmd_screen, "nonlinear replay and perturbed-model screening"),
    "quantize": (cmd_quantize, "approximate a signal by FCC step commands"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="experiment file (JSON)")
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    common.add_argument("--amplitude-deg", type=float, default=None, help="baseline amplitude override")
    common.add_argument("--dt", type=float, default=None, help="baseline pulse width override, s")
    common.add_argument("--grid-hz", type=float, default=None, help="control grid rate override")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="flightoed", description="Design and assess identification maneuvers.")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}
    for name in ("sim", "info", "screen"):
        parsers[name].add_argument("--signal", type=Path, help="signal CSV (default: the baseline maneuver)")
    parsers["quantize"].add_argument("--signal", type=Path, required=True, help="signal CSV")
    parsers["quantize"].add_argument("--min-step", type=float, default=None, help="shortest FCC step, s")
    parsers["compare"].add_argument("--candidate", type=Path, required=True, help="signal CSV to evaluate")
    parsers["compare"].add_argument("--baseline", type=Path, default=None, help="reference signal CSV (default: the baseline maneuver)")
    parsers["info"].add_argument(
        "--monte-carlo", type=int, nargs="?", const=-1, default=0, metavar="N",
        help="also run N simulated estimations (bare flag: monte_carlo.runs from the config)",
    )  # fmt: skip
    parsers["screen"].add_argument("--samples", type=int, default=None)
    parsers["screen"].add_argument("--perturbation-pct", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INVALID
    overrides = {"amplitude_deg": args.amplitude_deg, "delta_t_s": args.dt, "grid_hz": args.grid_hz, "seed": args.seed}
    try:
        cfg = load_experiment(args.config, overrides)
        out_dir = args.out if args.out is not None else args.config.parent / cfg.output_dir
        inputs = []
        for attr in ("signal", "baseline", "candidate"):
            p = getattr(args, attr, None)
            if p is not None:
                if not Path(p).is_file():
                    raise FileNotFoundError(f"no such file: {p}")
                inputs.append(Path(p).read_text())
        art = Artifacts(out_dir, cfg, args.command, inputs)
        status = COMMANDS[args.command][0](args, cfg, art)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # bad combinations that only show up when building objects (e.g. maneuver too long)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for path in art.written:
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
