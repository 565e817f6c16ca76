"""Pre-flight screening of designed maneuvers on the nonlinear model.

A design is replayed open loop from trim on the full rigid-body equations and
the absolute flight-envelope bounds are monitored.  A violation marks the
abort time but integration continues so the report can show how far the
excursion would have gone.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from flightoed.airframe import DEG, AeroCoefficients, AirframeProperties, TrimCondition
from flightoed.dynamics import STATE_NAMES, CONTROL_NAMES, SingularStateError, TrimError, nonlinear_rhs, trim_solve
from flightoed.information import Trajectory
from flightoed.maneuvers import InputSignal
from flightoed.oed import TABLE_ENVELOPE, _to_si

DIVERGENCE = "divergence"


def default_envelope() -> dict:
    """Absolute flight-envelope bounds in SI."""
    return {name: _to_si(name, pair) for name, pair in TABLE_ENVELOPE.items()}


@dataclass
class EnvelopeViolationReport:
    first_violation: dict  # variable -> time (s) or None
    max_excursion: dict  # variable -> largest distance outside the bounds, 0 when inside
    abort_time: float | None = None
    abort_variable: str | None = None
    extremes: dict = field(default_factory=dict)  # variable -> (min, max) reached

    @property
    def passed(self) -> bool:
        return self.abort_time is None

    def to_dict(self, degrees: bool = True) -> dict:
        def conv(name, v):
            if v is None or not degrees or name in ("V", DIVERGENCE):
                return v
            return v / DEG

        return {
            "abort_time": self.abort_time,
            "abort_variable": self.abort_variable,
            "passed": self.passed,
            "first_violation": dict(self.first_violation),
            "max_excursion": {k: conv(k, v) for k, v in self.max_excursion.items()},
            "extremes": {k: [conv(k, a), conv(k, b)] for k, (a, b) in self.extremes.items()},
            "angles_in_degrees": degrees,
        }


def _controls_at(signal: InputSignal, base: np.ndarray, k: int, frac: float) -> np.ndarray:
    """Absolute control vector at t = (k + frac) dt; deflections are linear in between."""
    vals = signal.values
    d = vals[k] if frac == 0.0 else (1.0 - frac) * vals[k] + frac * vals[min(k + 1, len(vals) - 1)]
    u = base.copy()
    for c, name in enumerate(signal.channels):
        u[CONTROL_NAMES.index(name)] += d[c]
    return u


def _rk4_step(x, k, signal, base, dt, coeffs, props):
    u0 = _controls_at(signal, base, k, 0.0)
    uh = _controls_at(signal, base, k, 0.5)
    u1 = _controls_at(signal, base, k + 1, 0.0)
    k1 = nonlinear_rhs(x, u0, coeffs, props)
    k2 = nonlinear_rhs(x + 0.5 * dt * k1, uh, coeffs, props)
    k3 = nonlinear_rhs(x + 0.5 * dt * k2, uh, coeffs, props)
    k4 = nonlinear_rhs(x + dt * k3, u1, coeffs, props)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_nonlinear(signal: InputSignal, coeffs: AeroCoefficients, props: AirframeProperties, trim: TrimCondition, substeps: int = 1):
    """RK4 from trim at the signal rate (``substeps`` > 1 refines, for checks).

    Returns ``(Trajectory, diverged_at)``; after a divergence the remaining
    rows are NaN.
    """
    for name in signal.channels:
        if name not in CONTROL_NAMES:
            raise ValueError(f"unknown control channel {name!r}")
    N = signal.n_intervals
    dt = signal.sample_period
    base = np.asarray(trim.controls(), dtype=float)
    x = np.asarray(trim.state_vector(), dtype=float)
    out = np.full((N + 1, len(STATE_NAMES)), np.nan)
    out[0] = x
    diverged_at = None
    if substeps > 1:
        # split each interval; deflections stay linear inside it
        t_fine = np.arange(N * substeps + 1) * (dt / substeps)
        fine_vals = np.column_stack([np.interp(t_fine, signal.time, signal.values[:, c]) for c in range(len(signal.channels))])
        fine = InputSignal(dt / substeps, fine_vals, signal.channels)
    for k in range(N):
        try:
            if substeps > 1:
                for j in range(substeps):
                    x = _rk4_step(x, k * substeps + j, fine, base, dt / substeps, coeffs, props)
            else:
                x = _rk4_step(x, k, signal, base, dt, coeffs, props)
        except SingularStateError:
            x = np.full_like(x, np.nan)
        if not np.all(np.isfinite(x)) or abs(x[0]) > 1e3:
            diverged_at = (k + 1) * dt
            break
        out[k + 1] = x
    return Trajectory(signal.time, out, STATE_NAMES), diverged_at


def envelope_report(traj: Trajectory, envelope: dict | None = None, diverged_at: float | None = None) -> EnvelopeViolationReport:
    """Check a nonlinear trajectory against absolute bounds (SI)."""
    envelope = default_envelope() if envelope is None else envelope
    first, excursion, extremes = {}, {}, {}
    abort_time, abort_var = None, None
    for name, (lo, hi) in sorted(envelope.items()):
        if name not in traj.labels:
            continue
        col = traj.column(name)
        ok = np.isfinite(col)
        vals = col[ok]
        exc = np.maximum(vals - hi, lo - vals)
        bad = np.flatnonzero(exc > 0.0)
        first[name] = float(traj.time[ok][bad[0]]) if bad.size else None
        excursion[name] = float(max(0.0, np.max(exc))) if vals.size else 0.0
        extremes[name] = (float(np.min(vals)), float(np.max(vals))) if vals.size else (math.nan, math.nan)
        if bad.size and (abort_time is None or first[name] < abort_time):
            abort_time, abort_var = first[name], name
    if diverged_at is not None and (abort_time is None or diverged_at < abort_time):
        abort_time, abort_var = diverged_at, DIVERGENCE
    if diverged_at is not None:
        first[DIVERGENCE] = diverged_at
    return EnvelopeViolationReport(first, excursion, abort_time, abort_var, extremes)


def nonlinear_replay(signal: InputSignal, coeffs: AeroCoefficients, props: AirframeProperties, trim: TrimCondition, envelope: dict | None = None):
    """Fly ``signal`` (deflections about the trim controls) on the nonlinear model.

    Returns ``(trajectory, EnvelopeViolationReport)``.
    """
    traj, diverged_at = integrate_nonlinear(signal, coeffs, props, trim)
    return traj, envelope_report(traj, envelope, diverged_at)


def slope_coefficients(coeffs: AeroCoefficients) -> list[str]:
    """Coefficients subject to uncertainty: everything except the C_0 offsets."""
    return [n for n in coeffs.derivative_names() if not n.endswith("_0")]


def _screen_one(args):
    signal, coeffs, props, trim, frac, seed_seq, envelope = args
    rng = np.random.default_rng(seed_seq)
    names = slope_coefficients(coeffs)
    factors = dict(zip(names, 1.0 + frac * rng.uniform(-1.0, 1.0, len(names))))
    perturbed = coeffs.scaled(factors)
    try:
        t = trim_solve(trim.airspeed, perturbed, props)
    except TrimError:
        return False
    _, report = nonlinear_replay(signal, perturbed, props, t, envelope)
    return report.passed


def perturbed_model_screen(
    signal: InputSignal,
    coeffs: AeroCoefficients,
    props: AirframeProperties,
    trim: TrimCondition,
    perturbation_pct: float,
    n_samples: int,
    seed: int = 0,
    envelope: dict | None = None,
    workers: int = 1,
) -> float:
    """Fraction of randomly perturbed airframes that fly the design without violation.

    Every slope coefficient is multiplied by an independent factor drawn
    uniformly from ``1 +- perturbation_pct / 100``, the airframe is re-trimmed
    at the nominal airspeed and the signal replayed.  Failed trims count as
    failures.  Each sample has its own child seed, so the result does not
    depend on ``workers``.
    """
    if perturbation_pct < 0:
        raise ValueError("perturbation must be non-negative")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    frac = perturbation_pct / 100.0
    if frac == 0.0:
        _, report = nonlinear_replay(signal, coeffs, props, trim, envelope)
        return 1.0 if report.passed else 0.0
    seeds = np.random.SeedSequence(seed).spawn(n_samples)
    jobs = [(signal, coeffs, props, trim, frac, s, envelope) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_screen_one, jobs))
    else:
        results = [_screen_one(j) for j in jobs]
    return float(np.mean(results))
