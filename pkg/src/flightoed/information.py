"""Simulation, forward sensitivities, Fisher information and Cramer-Rao bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from flightoed.lti import LtiModel, augment_actuator_rate
from flightoed.maneuvers import InputSignal

DEG = math.pi / 180.0

DEFAULT_SIGMAS = {
    "V": 2.5,
    "alpha": 0.5 * DEG,
    "beta": 0.5 * DEG,
    "phi": 0.1 * DEG,
    "theta": 0.1 * DEG,
    "psi": 0.1 * DEG,
    "p": 0.1 * DEG,
    "q": 0.1 * DEG,
    "r": 0.1 * DEG,
}


class UnidentifiableError(ValueError):
    """No parameter receives any information from the experiment."""


class EstimationDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SensorModel:
    """Diagonal white-noise sensor model; ``sigma`` maps state name to std (SI)."""

    sigma: dict = field(default_factory=lambda: dict(DEFAULT_SIGMAS))
    sample_rate: float = 100.0

    def __post_init__(self):
        for name, s in self.sigma.items():
            if not (math.isfinite(s) and s > 0):
                raise ValueError(f"sensor sigma for {name!r} must be positive, got {s!r}")
        if not self.sample_rate > 0:
            raise ValueError("sample rate must be positive")

    def measured(self, labels: Sequence[str]) -> list[str]:
        return [y for y in labels if y in self.sigma]

    def weights(self, labels: Sequence[str]) -> np.ndarray:
        return np.array([1.0 / self.sigma[y] ** 2 for y in labels])

    def stride(self, sample_period: float) -> int:
        k = 1.0 / (self.sample_rate * sample_period)
        n = int(round(k))
        if n < 1 or abs(n - k) > 1e-6:
            raise ValueError("sensor rate must divide the signal sample rate")
        return n

    def scaled(self, factor: float) -> "SensorModel":
        return SensorModel({k: v * factor for k, v in self.sigma.items()}, self.sample_rate)


@dataclass(frozen=True, eq=False)
class Trajectory:
    time: np.ndarray
    states: np.ndarray
    labels: tuple

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.labels.index(name)]

    def to_csv(self, digits: int = 9, degrees: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"{n}_deg" if n in degrees else n for n in self.labels])
        factor = np.array([1.0 / DEG if n in degrees else 1.0 for n in self.labels])
        for t, row in zip(self.time, self.states * factor):
            w.writerow([f"{t:.{digits}g}"] + [f"{v:.{digits}g}" for v in row])
        return buf.getvalue()


# ---------------------------------------------------------------- simulation


def _rate_model(model: LtiModel) -> LtiModel:
    return model if model.is_augmented else augment_actuator_rate(model)


def _signal_for(model: LtiModel, signal: InputSignal) -> InputSignal:
    names = model.deflection_states if model.is_augmented else model.inputs
    unknown = set(signal.channels) - set(names)
    if unknown:
        raise ValueError(f"signal channels {sorted(unknown)} are not inputs of the model {list(names)}")
    return signal.with_channels(names)


def _initial_state(model: LtiModel, aug: LtiModel, sig: InputSignal, x0) -> np.ndarray:
    n_plain = aug.n_states - aug.n_inputs
    z0 = np.zeros(aug.n_states)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape not in ((model.n_states,),):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({model.n_states},)")
        z0[: len(x0)] = x0
    z0[n_plain:] = sig.values[0]
    return z0


def discretize(A: np.ndarray, B: np.ndarray, dt: float):
    """Exact zero-order-hold discretization via one matrix exponential."""
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A * dt
    M[:n, n:] = B * dt
    E = expm(M)
    return E[:n, :n], E[:n, n:]


def propagate(Ad: np.ndarray, Bd: np.ndarray, z0: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Recursion z_{k+1} = Ad z_k + Bd u_k; returns all N + 1 states."""
    N = inputs.shape[0]
    out = np.empty((N + 1, z0.shape[0]))
    out[0] = z0
    z = z0
    drive = inputs @ Bd.T
    for k in range(N):
        z = Ad @ z + drive[k]
        out[k + 1] = z
    return out


def simulate_lti(model: LtiModel, signal: InputSignal, x0=None) -> Trajectory:
    """Response of ``model`` to the deflection signal.

    Deflections are linear between samples, so the rate-augmented model with
    piecewise-constant rates is exact.  For an unaugmented model only its own
    states are returned.
    """
    sig = _signal_for(model, signal)
    aug = _rate_model(model)
    z0 = _initial_state(model, aug, sig, x0)
    Ad, Bd = discretize(aug.A, aug.B, sig.sample_period)
    Z = propagate(Ad, Bd, z0, sig.rates())
    return Trajectory(sig.time, Z[:, : model.n_states], model.states)


def sensitivity_system(aug: LtiModel, parameters: Sequence[str]):
    """Continuous matrices of the stacked system z = [x, dx/dtheta_1, ...]."""
    n = aug.n_states
    nt = len(parameters)
    nz = n * (1 + nt)
    Z = np.zeros((nz, nz))
    Z[:n, :n] = aug.A
    for k, name in enumerate(parameters):
        dA, dB = aug.partials(name)
        if np.any(dB):
            raise ValueError("rate-augmented models carry no parameters in B")
        b = n * (k + 1)
        Z[b : b + n, b : b + n] = aug.A
        Z[b : b + n, :n] = dA
    Bz = np.zeros((nz, aug.n_inputs))
    Bz[:n] = aug.B
    return Z, Bz


def _resolve_parameters(model: LtiModel, parameters):
    names = list(model.parameter_names if parameters is None else parameters)
    known = set(model.parameter_names)
    for name in names:
        if name not in known:
            raise KeyError(f"unknown parameter {name!r}")
    return names


def simulate_with_sensitivities(model: LtiModel, signal: InputSignal, parameters=None, x0=None):
    """States ``(N+1, n)`` and state sensitivities ``(N+1, n_theta, n)``.

    Both are for the model's own states (deflection states excluded for an
    unaugmented model).
    """
    names = _resolve_parameters(model, parameters)
    sig = _signal_for(model, signal)
    aug = _rate_model(model)
    n = aug.n_states
    z0 = np.zeros(n * (1 + len(names)))
    z0[:n] = _initial_state(model, aug, sig, x0)
    Z, Bz = sensitivity_system(aug, names)
    Ad, Bd = discretize(Z, Bz, sig.sample_period)
    out = propagate(Ad, Bd, z0, sig.rates())
    nm = model.n_states
    states = out[:, :nm]
    sens = out[:, n:].reshape(out.shape[0], len(names), n)[:, :, :nm]
    return states, sens


def sensitivity_trajectories(model: LtiModel, signal: InputSignal, parameters=None, x0=None) -> np.ndarray:
    """Output sensitivities dy/dtheta_k, shape ``(N+1, n_theta, n_outputs)``."""
    _, sens = simulate_with_sensitivities(model, signal, parameters, x0)
    return sens[:, :, model.output_indices]


# ---------------------------------------------------------------- information


def fisher_matrix(sensitivities: np.ndarray, sensor: SensorModel, output_labels: Sequence[str] | None = None, stride: int = 1):
    """F = sum_i S_i^T Sigma_y^-1 S_i over the given samples.

    ``sensitivities`` has shape ``(samples, n_theta, n_outputs)``.  With
    ``output_labels`` only the outputs the sensor measures are used; without
    them every column must be measured, in sensor order.
    """
    S = np.asarray(sensitivities, dtype=float)
    if output_labels is None:
        labels = list(sensor.sigma)
        if len(labels) != S.shape[2]:
            raise ValueError("pass output_labels when the sensitivity columns differ from the sensor outputs")
        cols = list(range(S.shape[2]))
    else:
        labels = sensor.measured(output_labels)
        cols = [list(output_labels).index(y) for y in labels]
    S = S[::stride, :, cols]
    W = sensor.weights(labels)
    F = np.einsum("kpi,i,kqi->pq", S, W, S)
    return 0.5 * (F + F.T)


@dataclass(frozen=True, eq=False)
class InformationReport:
    parameters: tuple
    nominal: np.ndarray
    fisher: np.ndarray
    covariance: np.ndarray
    crlb_paper: np.ndarray
    crlb_marginal: np.ndarray
    a_criterion: float
    scaled_a_criterion: float
    rank: int
    unidentifiable: tuple
    singular_values: np.ndarray

    @property
    def crlb(self) -> np.ndarray:
        return self.crlb_paper

    @property
    def identifiable(self) -> list[str]:
        return [p for p in self.parameters if p not in self.unidentifiable]

    def to_dict(self) -> dict:
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else None

        rows = []
        for i, name in enumerate(self.parameters):
            rows.append(
                {
                    "parameter": name,
                    "Value": num(self.nominal[i]),
                    "CRLB": num(self.crlb_paper[i]),
                    "CRLB_marginal": num(self.crlb_marginal[i]),
                    "identifiable": name not in self.unidentifiable,
                }
            )
        return {
            "parameters": rows,
            "a_criterion": num(self.a_criterion),
            "scaled_a_criterion": num(self.scaled_a_criterion),
            "rank": int(self.rank),
            "n_parameters": len(self.parameters),
            "unidentifiable": list(self.unidentifiable),
            "fisher": [[num(v) for v in row] for row in self.fisher],
        }


def report_from_fisher(F: np.ndarray, parameters: Sequence[str], nominal: np.ndarray) -> InformationReport:
    """Covariance, bounds and rank diagnostics from an assembled Fisher matrix."""
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    sv = np.linalg.svd(F, compute_uv=False)
    smax = sv[0] if n else 0.0
    tol = n * np.finfo(float).eps * smax
    rank = int(np.sum(sv > tol))
    diag = np.diag(F)
    ident = [i for i in range(n) if diag[i] > tol]
    if not ident or smax == 0.0:
        raise UnidentifiableError("the experiment carries no information on any parameter")
    unident = tuple(parameters[i] for i in range(n) if i not in ident)

    cov = np.full((n, n), np.nan)
    sub = F[np.ix_(ident, ident)]
    cov_sub = np.linalg.inv(sub) if np.linalg.matrix_rank(sub, tol=tol) == len(ident) else np.linalg.pinv(sub)
    cov[np.ix_(ident, ident)] = cov_sub

    with np.errstate(divide="ignore"):
        crlb_paper = np.where(diag > tol, 1.0 / np.sqrt(np.maximum(diag, tol)), np.inf)
    crlb_marg = np.full(n, np.inf)
    crlb_marg[ident] = np.sqrt(np.maximum(np.diag(cov_sub), 0.0))
    nominal = np.asarray(nominal, dtype=float)
    a_crit = float(np.trace(cov_sub) / len(ident))
    nom_sub = nominal[ident]
    if np.all(nom_sub != 0):
        scaled = float(np.sum(np.diag(cov_sub) / nom_sub**2) / len(ident))
    else:
        scaled = math.nan
    return InformationReport(
        tuple(parameters), nominal, F, cov, crlb_paper, crlb_marg, a_crit, scaled, rank, unident, sv
    )


def information_report(
    model: LtiModel, signal: InputSignal, sensor: SensorModel | None = None, parameters=None, x0=None
) -> InformationReport:
    sensor = sensor or SensorModel()
    names = _resolve_parameters(model, parameters)
    sens = sensitivity_trajectories(model, signal, names, x0)
    stride = sensor.stride(signal.sample_period)
    F = fisher_matrix(sens, sensor, model.outputs, stride)
    return report_from_fisher(F, names, model.parameter_values(names))


@dataclass(frozen=True)
class DesignComparison:
    parameters: tuple
    nominal: tuple
    crlb_init: tuple
    crlb_opt: tuple
    delta_pct: tuple
    notes: dict
    metric: str = "crlb_paper"

    @property
    def mean_delta_pct(self) -> float:
        vals = [d for d in self.delta_pct if math.isfinite(d)]
        return float(np.mean(vals)) if vals else math.nan

    def to_dict(self) -> dict:
        def num(v):
            return float(v) if math.isfinite(v) else None

        rows = [
            {"parameter": p, "Value": num(v), "CRLB_init": num(a), "CRLB_opt": num(b), "dCRLB_pct": num(d)}
            for p, v, a, b, d in zip(self.parameters, self.nominal, self.crlb_init, self.crlb_opt, self.delta_pct)
        ]
        return {"metric": self.metric, "rows": rows, "mean_dCRLB_pct": num(self.mean_delta_pct), "notes": dict(self.notes)}

    def to_csv(self, digits: int = 9) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "Value", "CRLB_init", "CRLB_opt", "dCRLB_pct"])
        for row in self.to_dict()["rows"]:
            w.writerow([row["parameter"]] + ["" if row[k] is None else f"{row[k]:.{digits}g}" for k in ("Value", "CRLB_init", "CRLB_opt", "dCRLB_pct")])
        return buf.getvalue()


def compare_reports(base: InformationReport, cand: InformationReport, metric: str = "crlb_paper") -> DesignComparison:
    if base.parameters != cand.parameters:
        raise ValueError("reports cover different parameter sets")
    b = getattr(base, metric)
    c = getattr(cand, metric)
    deltas, notes = [], {}
    for i, name in enumerate(base.parameters):
        if math.isfinite(b[i]) and math.isfinite(c[i]):
            deltas.append(100.0 * (c[i] - b[i]) / b[i])
        else:
            deltas.append(math.nan)
            which = [lbl for lbl, r in (("baseline", b[i]), ("candidate", c[i])) if not math.isfinite(r)]
            notes[name] = "unidentifiable in " + " and ".join(which)
    return DesignComparison(
        base.parameters, tuple(float(v) for v in base.nominal), tuple(float(v) for v in b),
        tuple(float(v) for v in c), tuple(deltas), notes, metric,
    )  # fmt: skip


def compare_designs(
    model: LtiModel, baseline: InputSignal, candidate: InputSignal, sensor: SensorModel | None = None,
    parameters=None, metric: str = "crlb_paper",
) -> DesignComparison:  # fmt: skip
    """Per-parameter percent change of the CRLB from baseline to candidate."""
    if baseline.sample_period != candidate.sample_period or baseline.values.shape[0] != candidate.values.shape[0]:
        raise ValueError("baseline and candidate must share one sample grid")
    base = information_report(model, baseline, sensor, parameters)
    cand = information_report(model, candidate, sensor, parameters)
    return compare_reports(base, cand, metric)


# ---------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    parameters: tuple
    truth: np.ndarray
    estimates: np.ndarray
    empirical_std: np.ndarray
    crlb_marginal: np.ndarray
    n_runs: int
    n_diverged: int

    @property
    def ratio(self) -> np.ndarray:
        return self.empirical_std / self.crlb_marginal

    def to_dict(self) -> dict:
        rows = [
            {"parameter": n, "truth": float(t), "empirical_std": float(s), "crlb_marginal": float(c), "ratio": float(s / c)}
            for n, t, s, c in zip(self.parameters, self.truth, self.empirical_std, self.crlb_marginal)
        ]
        return {"parameters": rows, "n_runs": self.n_runs, "n_diverged": self.n_diverged}


def _gauss_newton(model, signal, names, sensor, stride, y_meas, theta0, max_iter, tol):
    W = sensor.weights(sensor.measured(model.outputs))
    cols = [list(model.outputs).index(y) for y in sensor.measured(model.outputs)]
    idx = [model.states.index(model.outputs[c]) for c in cols]
    theta = theta0.copy()
    for _ in range(max_iter):
        m = model.with_parameters(dict(zip(names, theta)))
        states, sens = simulate_with_sensitivities(m, signal, names)
        y = states[::stride][:, idx]
        J = sens[::stride][:, :, idx]
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(J))):
            return None
        r = y_meas - y
        H = np.einsum("kpi,i,kqi->pq", J, W, J)
        g = np.einsum("kpi,i,ki->p", J, W, r)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return None
        theta = theta + step
        if np.all(np.abs(step) <= tol * np.maximum(np.abs(theta), 1e-12)):
            return theta
    return None


def monte_carlo_crlb_check(
    model: LtiModel,
    signal: InputSignal,
    sensor: SensorModel | None = None,
    parameters=None,
    n_runs: int = 500,
    seed: int = 0,
    perturbation: float = 0.1,
    max_iter: int = 30,
    tol: float = 1e-7,
    max_divergence: float = 0.05,
) -> MonteCarloResult:
    """Empirical spread of output-error estimates versus the marginal bound.

    Each run adds white noise to the true outputs and runs Gauss-Newton from
    the truth perturbed uniformly by +-``perturbation`` (relative).  Runs use
    independent generators spawned from ``seed``.
    """
    sensor = sensor or SensorModel()
    names = _resolve_parameters(model, parameters)
    truth = model.parameter_values(names)
    report = information_report(model, signal, sensor, names)
    if report.unidentifiable or report.rank < len(names):
        raise UnidentifiableError("Monte-Carlo check needs a full-rank Fisher matrix")
    stride = sensor.stride(signal.sample_period)
    measured = sensor.measured(model.outputs)
    idx = [model.states.index(y) for y in measured]
    sig = np.array([sensor.sigma[y] for y in measured])
    y_true = simulate_lti(model, signal).states[::stride][:, idx]

    estimates = []
    diverged = 0
    for child in np.random.SeedSequence(seed).spawn(n_runs):
        rng = np.random.default_rng(child)
        theta0 = truth * (1.0 + perturbation * rng.uniform(-1.0, 1.0, size=truth.shape))
        y_meas = y_true + rng.standard_normal(y_true.shape) * sig
        est = _gauss_newton(model, signal, names, sensor, stride, y_meas, theta0, max_iter, tol)
        if est is None:
            diverged += 1
        else:
            estimates.append(est)
    if diverged > max_divergence * n_runs:
        raise EstimationDivergenceError(f"{diverged} of {n_runs} estimation runs diverged")
    est = np.array(estimates)
    std = est.std(axis=0, ddof=1) if len(est) > 1 else np.zeros(len(names))
    return MonteCarloResult(tuple(names), truth, est, std, report.crlb_marginal, n_runs, diverged)
