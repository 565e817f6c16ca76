"""Optimum experiment design: A-criterion over rate-augmented LTI models.

The decision variables are deflection rates, piecewise constant on a control
grid.  The dynamics are linear with x0 = 0, so every state and every output
sensitivity is a linear map of the decision vector.  Those maps are built
once from a single control-interval impulse response (the system is time
invariant, so the response to interval j is the same response shifted by j
intervals).  The objective and its exact gradient then reduce to dense
matrix-vector products.

All bounds are linear in the decision vector.  The solver is a primal
log-barrier (interior-point) Newton method using the exact Hessian of the
A-criterion, with negative curvature flipped to keep Newton directions
descent directions.  Iterates stay strictly feasible throughout; barrier
multipliers mu / slack give the KKT residual that decides convergence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from flightoed.airframe import DEG, DimensionalDerivatives, TrimCondition
from flightoed.information import (
    InformationReport,
    SensorModel,
    discretize,
    information_report,
    propagate,
    sensitivity_system,
    simulate_lti,
)
from flightoed.lti import LtiModel, augment_actuator_rate, build_lateral_lti, build_longitudinal_lti
from flightoed.maneuvers import DEFAULT_RATE_LIMIT, InputSignal, gen_3211

log = logging.getLogger(__name__)

AXES = ("longitudinal", "lateral-aileron", "lateral-rudder")

# absolute values, degrees (airspeed m/s, rates deg/s)
TABLE_ENVELOPE = {
    "V": (12.0, 30.0),
    "beta": (-20.0, 20.0),
    "alpha": (-8.0, 20.0),
    "phi": (-35.0, 35.0),
    "theta": (-30.0, 40.0),
    "p": (-60.0, 60.0),
    "q": (-40.0, 40.0),
    "r": (-40.0, 40.0),
}
TABLE_OED = {
    "V": (17.0, 23.0),
    "beta": (-7.5, 7.5),
    "alpha": (-4.36, 3.64),
    "phi": (-28.0, 28.0),
    "theta": (-28.77, 27.33),
    "p": (-48.0, 48.0),
    "q": (-32.0, 32.0),
    "r": (-32.0, 32.0),
}
DEFLECTION_BOUND_DEG = 5.0


class TranscriptionError(ValueError):
    pass


def trim_value(name: str, trim: TrimCondition) -> float:
    return {"V": trim.airspeed, "alpha": trim.alpha, "theta": trim.theta}.get(name, 0.0)


def _to_si(name: str, pair):
    k = 1.0 if name == "V" else DEG
    return (pair[0] * k, pair[1] * k)


@dataclass(frozen=True)
class EnvelopeConstraints:
    """Experiment bounds (relative to trim) and flight-envelope limits (absolute).

    Keys are state names, deflection names (``de``) and rate names
    (``de_rate``).  Everything is SI.
    """

    oed: dict
    envelope: dict
    safety_margin: float = 0.2

    def __post_init__(self):
        for name, (lo, hi) in self.oed.items():
            if not lo < hi:
                raise ValueError(f"empty bound interval for {name!r}")
            if not (lo <= 0.0 <= hi):
                raise ValueError(f"bounds for {name!r} must contain the trim value")

    @classmethod
    def table_defaults(
        cls,
        trim: TrimCondition,
        deflection_bound: float = DEFLECTION_BOUND_DEG * DEG,
        rate_bound: float = DEFAULT_RATE_LIMIT,
        oed_abs: dict | None = None,
        envelope_abs: dict | None = None,
    ) -> "EnvelopeConstraints":
        """Reference bounds; ``oed_abs``/``envelope_abs`` are absolute, in degrees."""
        oed_abs = TABLE_OED if oed_abs is None else oed_abs
        envelope_abs = TABLE_ENVELOPE if envelope_abs is None else envelope_abs
        oed = {}
        for name, pair in oed_abs.items():
            lo, hi = _to_si(name, pair)
            t = trim_value(name, trim)
            oed[name] = (lo - t, hi - t)
        for ch in ("da", "de", "dr"):
            oed[ch] = (-deflection_bound, deflection_bound)
            oed[f"{ch}_rate"] = (-rate_bound, rate_bound)
        envelope = {name: _to_si(name, pair) for name, pair in envelope_abs.items()}
        return cls(oed, envelope)

    def relative_envelope(self, trim: TrimCondition) -> dict:
        return {n: (lo - trim_value(n, trim), hi - trim_value(n, trim)) for n, (lo, hi) in self.envelope.items()}

    def check_nested(self, trim: TrimCondition) -> None:
        """Experiment bounds must sit inside the flight envelope."""
        env = self.relative_envelope(trim)
        for name, (lo, hi) in self.oed.items():
            if name in env and (lo < env[name][0] - 1e-12 or hi > env[name][1] + 1e-12):
                raise ValueError(f"experiment bound for {name!r} leaves the flight envelope")

    def margins(self, trim: TrimCondition) -> dict:
        """Smallest relative distance between experiment bound and envelope, per variable."""
        env = self.relative_envelope(trim)
        out = {}
        for name, (lo, hi) in self.oed.items():
            if name in env:
                elo, ehi = env[name]
                out[name] = min((lo - elo) / abs(elo) if elo else math.inf, (ehi - hi) / abs(ehi) if ehi else math.inf)
        return out


@dataclass(frozen=True)
class ParameterScaling:
    """theta = D theta_tilde with D = diag(theta_init)."""

    parameters: tuple
    nominal: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.nominal)

    def fisher(self, F: np.ndarray) -> np.ndarray:
        return self.D @ F @ self.D

    def crlb(self, crlb: np.ndarray) -> np.ndarray:
        return np.asarray(crlb) / np.abs(self.nominal)

    def a_criterion(self, F: np.ndarray) -> float:
        return float(np.trace(np.linalg.inv(self.fisher(F))) / len(self.parameters))


def scale_parameters(parameters: Sequence[str], theta_init) -> ParameterScaling:
    theta = np.asarray(theta_init, dtype=float)
    if theta.shape != (len(parameters),):
        raise ValueError("one nominal value per parameter expected")
    zero = [p for p, v in zip(parameters, theta) if v == 0.0]
    if zero:
        raise ValueError(f"cannot scale by a zero nominal value: {zero}")
    return ParameterScaling(tuple(parameters), theta.copy())


@dataclass(frozen=True, eq=False)
class OedProblem:
    model: LtiModel
    sensor: SensorModel
    parameters: tuple
    nominal: np.ndarray
    constraints: EnvelopeConstraints
    initial_guess: InputSignal
    horizon: float = 10.0
    control_period: float = 0.1
    gradient: str = "exact"
    max_outer: int = 500
    feasibility_tol: float = 1e-8
    stationarity_tol: float = 1e-6
    axis: str | None = None

    def __post_init__(self):
        if not self.model.is_augmented:
            raise ValueError("experiment design works on a rate-augmented model")
        if self.gradient not in ("exact", "fd"):
            raise ValueError("gradient must be 'exact' or 'fd'")
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "nominal", np.asarray(self.nominal, dtype=float))
        scale_parameters(self.parameters, self.nominal)


def axis_model(axis: str, derivs: DimensionalDerivatives, trim: TrimCondition, g: float = 9.81, kinematics: str = "level") -> LtiModel:
    """Augmented model with exactly one active input channel for ``axis``."""
    if axis == "longitudinal":
        base = build_longitudinal_lti(derivs, trim, g, kinematics)
    elif axis == "lateral-aileron":
        base = build_lateral_lti(derivs, trim, g, kinematics).select_inputs(["da"])
    elif axis == "lateral-rudder":
        base = build_lateral_lti(derivs, trim, g, kinematics).select_inputs(["dr"])
    else:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return augment_actuator_rate(base)


def make_problem(
    axis: str,
    derivs: DimensionalDerivatives,
    trim: TrimCondition,
    initial_guess: InputSignal,
    sensor: SensorModel | None = None,
    constraints: EnvelopeConstraints | None = None,
    g: float = 9.81,
    kinematics: str = "level",
    **options,
) -> OedProblem:
    """Design problem for one axis; all free derivatives of the model are estimated."""
    model = axis_model(axis, derivs, trim, g, kinematics)
    constraints = constraints or EnvelopeConstraints.table_defaults(trim)
    constraints.check_nested(trim)
    names = tuple(model.parameter_names)
    return OedProblem(
        model=model,
        sensor=sensor or SensorModel(),
        parameters=names,
        nominal=model.parameter_values(names),
        constraints=constraints,
        initial_guess=initial_guess,
        horizon=initial_guess.horizon,
        axis=axis,
        **options,
    )


@dataclass(frozen=True, eq=False)
class Transcription:
    """Finite-dimensional form of a design problem.

    ``u`` has one entry per (control interval, input channel), channel-major
    within an interval.  ``state_map @ u`` gives the bounded states stacked
    sample-major; ``lower``/``upper`` are the matching bounds.
    """

    problem: OedProblem
    n_decisions: int
    steps_per_interval: int
    sens_map: np.ndarray  # (n_decisions, samples * n_out * n_theta), noise-weighted
    n_samples: int
    n_theta: int
    n_out: int
    state_map: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_labels: tuple
    rate_lower: np.ndarray
    rate_upper: np.ndarray
    deflection_map: np.ndarray  # (N+1, n_channels, n_decisions)
    u0: np.ndarray

    def _S(self, u: np.ndarray) -> np.ndarray:
        return (u @ self.sens_map).reshape(-1, self.n_theta)

    def fisher(self, u: np.ndarray) -> np.ndarray:
        S = self._S(u)
        return S.T @ S

    def objective(self, u: np.ndarray) -> float:
        return self.objective_and_gradient(u, need_gradient=False)[0]

    def objective_and_gradient(self, u: np.ndarray, need_gradient: bool = True):
        """Scaled A-criterion tr(F^-1 D^-2)/n and its exact gradient."""
        n = self.n_theta
        S = self._S(u)
        F = S.T @ S
        d2 = 1.0 / self.problem.nominal**2
        try:
            Finv = np.linalg.inv(F)
        except np.linalg.LinAlgError:
            return math.inf, np.zeros_like(u)
        psi = float(np.sum(np.diag(Finv) * d2) / n)
        if not math.isfinite(psi) or psi <= 0:
            return math.inf, np.zeros_like(u)
        if not need_gradient:
            return psi, None
        G = Finv @ (d2[:, None] * Finv)
        grad = -(2.0 / n) * (self.sens_map @ (S @ G).reshape(-1))
        return psi, grad

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """Exact Hessian of the scaled A-criterion.

        With F_a = T_a' S + S' T_a, M = F^-1 and G = M D^-2 M:
        H_ab = (tr(G F_a M F_b) + tr(G F_b M F_a)) / n - 2 <T_a, T_b G> / n.
        """
        n = self.n_theta
        S = self._S(u)
        M = np.linalg.inv(S.T @ S)
        d2 = 1.0 / self.problem.nominal**2
        G = M @ (d2[:, None] * M)
        T3 = self.sens_map.reshape(self.n_decisions, -1, n)
        X = np.matmul(T3.transpose(0, 2, 1), S)
        Fa = X + X.transpose(0, 2, 1)
        Y = np.matmul(G, Fa).reshape(self.n_decisions, -1)
        Z = np.matmul(M, Fa).transpose(0, 2, 1).reshape(self.n_decisions, -1)
        C = Y @ Z.T
        TG = np.matmul(T3, G).reshape(self.n_decisions, -1)
        H = (C + C.T) / n - 2.0 * (self.sens_map @ TG.T) / n
        return 0.5 * (H + H.T)

    def fd_gradient(self, u: np.ndarray, rel_step: float = 1e-3) -> np.ndarray:
        """Central differences.  The Fisher matrix is badly conditioned, so the
        objective carries ~1e-9 relative noise and small steps only see that."""
        h = rel_step * max(1.0, float(np.max(np.abs(u))))
        g = np.empty_like(u)
        for j in range(u.size):
            e = np.zeros_like(u)
            e[j] = h
            g[j] = (self.objective(u + e) - self.objective(u - e)) / (2 * h)
        return g

    def constraint_values(self, u: np.ndarray) -> np.ndarray:
        return self.state_map @ u

    def max_violation(self, u: np.ndarray) -> float:
        x = self.state_map @ u
        v = max(float(np.max(x - self.upper)), float(np.max(self.lower - x)), 0.0)
        v = max(v, float(np.max(u - self.rate_upper)), float(np.max(self.rate_lower - u)))
        return v

    def violation_by_variable(self, u: np.ndarray) -> dict:
        x = self.state_map @ u
        exc = np.maximum(x - self.upper, self.lower - x)
        out = {}
        for name in dict.fromkeys(self.row_labels):
            mask = np.array([lbl == name for lbl in self.row_labels])
            out[name] = max(0.0, float(np.max(exc[mask])))
        rate_exc = np.maximum(u - self.rate_upper, self.rate_lower - u)
        for c, name in enumerate(self.problem.model.rate_inputs):
            out[name] = max(0.0, float(np.max(rate_exc[c :: len(self.problem.model.rate_inputs)])))
        return out

    def signal(self, u: np.ndarray, kind: str = "optimized") -> InputSignal:
        model = self.problem.model
        vals = np.einsum("kcj,j->kc", self.deflection_map, u)
        dt = self.problem.initial_guess.sample_period
        meta = {"kind": kind, "control_period": self.problem.control_period}
        return InputSignal(dt, vals, tuple(model.deflection_states), meta)


def transcribe(problem: OedProblem) -> Transcription:
    """Build the linear maps from decision rates to states and sensitivities."""
    model = problem.model
    guess = problem.initial_guess
    dt = guess.sample_period
    N = guess.n_intervals
    if abs(N * dt - problem.horizon) > 1e-9:
        raise TranscriptionError("initial guess does not span the horizon")
    ctrl = int(round(problem.control_period / dt))
    if ctrl < 1 or abs(ctrl * dt - problem.control_period) > 1e-9 or N % ctrl:
        raise TranscriptionError("control period must be a whole number of samples dividing the horizon")
    nd = N // ctrl
    nu = model.n_inputs
    n = model.n_states
    names = list(problem.parameters)
    nt = len(names)

    measured = problem.sensor.measured(model.outputs)
    out_idx = [model.states.index(y) for y in measured]
    stride = problem.sensor.stride(dt)
    w_sqrt = np.sqrt(problem.sensor.weights(measured))

    Z, Bz = sensitivity_system(model, names)
    Ad, Bd = discretize(Z, Bz, dt)
    rows = np.arange(1, N + 1)[stride - 1 :: stride]  # measured samples
    n_samples = len(rows)

    # response of the stacked system to a unit rate on the first interval
    n_dec = nd * nu
    state_rows = []
    sens = np.zeros((n_dec, n_samples, len(out_idx), nt))
    xmap = np.zeros((N + 1, n, n_dec))
    for c in range(nu):
        rates = np.zeros((N, nu))
        rates[:ctrl, c] = 1.0
        h = propagate(Ad, Bd, np.zeros(Z.shape[0]), rates)
        hx = h[:, :n]
        hs = (h[:, n:].reshape(N + 1, nt, n)[:, :, out_idx] * w_sqrt).transpose(0, 2, 1)
        for j in range(nd):
            col = j * nu + c
            shift = j * ctrl
            xmap[shift:, :, col] = hx[: N + 1 - shift]
            src = rows - shift
            ok = src >= 0
            sens[col, ok] = hs[src[ok]]
    sens_map = sens.reshape(n_dec, -1)

    bounded = [s for s in model.states if s in problem.constraints.oed]
    b_idx = [model.states.index(s) for s in bounded]
    state_map = xmap[1:, b_idx, :].reshape(N * len(b_idx), n_dec)
    lo = np.tile([problem.constraints.oed[s][0] for s in bounded], N)
    hi = np.tile([problem.constraints.oed[s][1] for s in bounded], N)
    labels = tuple(bounded) * N

    rlo = np.tile([problem.constraints.oed.get(r, (-math.inf, math.inf))[0] for r in model.rate_inputs], nd)
    rhi = np.tile([problem.constraints.oed.get(r, (-math.inf, math.inf))[1] for r in model.rate_inputs], nd)

    defl_idx = [model.states.index(d) for d in model.deflection_states]
    deflection_map = xmap[:, defl_idx, :]

    # initial guess -> interval-average rates (keeps deflections exact on the control grid)
    g = guess.with_channels(model.deflection_states)
    if np.any(np.abs(g.values[0]) > 0):
        raise TranscriptionError("initial guess must start from the trim deflection")
    u0 = g.rates().reshape(nd, ctrl, nu).mean(axis=1).reshape(-1)

    tr = Transcription(
        problem, n_dec, ctrl, sens_map, n_samples, nt, len(out_idx), state_map, lo, hi, labels,
        rlo, rhi, deflection_map, u0,
    )  # fmt: skip
    if not math.isfinite(tr.objective(u0)):
        raise TranscriptionError("initial guess carries no information (singular Fisher matrix)")
    scale = np.maximum(np.abs(lo), np.abs(hi))
    x0 = state_map @ u0
    if np.max(np.maximum(x0 - hi, lo - x0) / scale) > 1e-6 or tr.max_violation(u0) > 1e-6 * np.max(np.abs(rhi)):
        raise TranscriptionError("initial guess violates the experiment bounds")
    return tr


@dataclass(frozen=True, eq=False)
class OedSolution:
    signal: InputSignal
    u: np.ndarray
    objective: float
    objective_initial: float
    max_violation: dict
    iterations: int
    status: str
    converged: bool
    report: InformationReport
    stationarity: float
    complementarity: float = math.nan
    history: list = field(default_factory=list)

    @property
    def improvement_pct(self) -> float:
        return 100.0 * (self.objective - self.objective_initial) / self.objective_initial

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "objective_initial": self.objective_initial,
            "improvement_pct": self.improvement_pct,
            "max_violation": dict(self.max_violation),
            "iterations": self.iterations,
            "status": self.status,
            "converged": self.converged,
            "stationarity": self.stationarity,
            "complementarity": self.complementarity,
        }


def _radial_feasible(tr: Transcription, u: np.ndarray) -> np.ndarray:
    """Largest a <= 1 with a*u inside all bounds (the bounds contain zero)."""
    x = tr.state_map @ u
    a = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = min(a, float(np.min(np.where(x > tr.upper, tr.upper / x, 1.0))))
        a = min(a, float(np.min(np.where(x < tr.lower, tr.lower / x, 1.0))))
        a = min(a, float(np.min(np.where(u > tr.rate_upper, tr.rate_upper / u, 1.0))))
        a = min(a, float(np.min(np.where(u < tr.rate_lower, tr.rate_lower / u, 1.0))))
    return u * a


def _stacked_constraints(tr: Transcription):
    """All bounds as A u <= b with rows normalized by the bound magnitude."""
    blocks, rhs = [], []
    scale = np.maximum(np.abs(tr.lower), np.abs(tr.upper))
    blocks += [tr.state_map / scale[:, None], -tr.state_map / scale[:, None]]
    rhs += [tr.upper / scale, -tr.lower / scale]
    eye = np.eye(tr.n_decisions)
    finite_u = np.isfinite(tr.rate_upper)
    finite_l = np.isfinite(tr.rate_lower)
    blocks += [eye[finite_u] / np.abs(tr.rate_upper[finite_u])[:, None], -eye[finite_l] / np.abs(tr.rate_lower[finite_l])[:, None]]
    rhs += [tr.rate_upper[finite_u] / np.abs(tr.rate_upper[finite_u]), -tr.rate_lower[finite_l] / np.abs(tr.rate_lower[finite_l])]
    return np.vstack(blocks), np.concatenate(rhs)


def _newton_direction(H: np.ndarray, grad: np.ndarray, barrier_h: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    floor = 1e-10 * max(1.0, float(np.max(np.abs(w))))
    Hm = (V * np.maximum(np.abs(w), floor)) @ V.T
    K = Hm + barrier_h
    try:
        c = np.linalg.cholesky(K)
        y = np.linalg.solve(c, -grad)
        return np.linalg.solve(c.T, y)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(K, -grad, rcond=None)[0]


def solve_oed(
    problem: OedProblem,
    transcription: Transcription | None = None,
    mu0: float = 1e-4,
    mu_factor: float = 0.2,
    shrink_start: float = 0.98,
) -> OedSolution:
    """Minimize the scaled A-criterion subject to the experiment bounds.

    Primal-dual interior point on ``A u <= b``: the iterate stays strictly
    feasible, multipliers ``lam`` are updated alongside, and each barrier
    weight mu is followed until the perturbed KKT conditions hold to 10 mu.
    The objective is normalized by its value at the initial guess, so the
    reported stationarity ``max|grad f / f0 + A^T lam|`` is scale free.
    ``status`` is ``"converged"`` when stationarity and complementarity are
    both below ``stationarity_tol``.  The result is never worse than the
    initial guess; ``max_outer`` caps the Newton steps.
    """
    tr = transcription or transcribe(problem)
    u0 = tr.u0
    f0 = tr.objective(u0)
    A, b = _stacked_constraints(tr)
    u = _radial_feasible(tr, u0) * shrink_start
    if np.any(b - A @ u <= 0):
        raise TranscriptionError("could not find a strictly feasible starting point")

    def fg(v, need_g=True):
        if problem.gradient == "fd" and need_g:
            return tr.objective(v) / f0, tr.fd_gradient(v) / f0
        f, g = tr.objective_and_gradient(v, need_g)
        return f / f0, (None if g is None else g / f0)

    def phi(v, mu):
        slack = b - A @ v
        if np.any(slack <= 0):
            return math.inf
        return fg(v, False)[0] - mu * float(np.sum(np.log(slack)))

    tol = problem.stationarity_tol
    mu = mu0
    lam = mu / (b - A @ u)
    history = []
    status = "max_iterations"
    stat = compl = math.inf
    steps = 0
    while steps < problem.max_outer:
        slack = b - A @ u
        f, g = fg(u)
        stat = float(np.max(np.abs(g + A.T @ lam)))
        compl = float(np.max(np.abs(slack * lam)))
        if stat <= tol and compl <= tol:
            status = "converged"
            break
        mu_floor = 0.01 * tol
        if mu > mu_floor and stat <= 10 * mu and float(np.max(np.abs(slack * lam - mu))) <= 10 * mu:
            # centred enough: tighten the barrier (superlinearly once small)
            mu = max(min(mu_factor * mu, mu**1.5), mu_floor)
            continue
        steps += 1
        H = tr.hessian(u) / f0
        sigma = lam / slack
        grad = g + mu * (A.T @ (1.0 / slack))
        du = _newton_direction(H, grad, (A * sigma[:, None]).T @ A)
        Ad = A @ du
        dlam = (mu - slack * lam + lam * Ad) / slack
        decrement = -float(grad @ du)
        history.append({"step": steps, "objective": f * f0, "mu": mu, "stationarity": stat, "complementarity": compl})
        log.debug("step %d psi=%.8g mu=%.1e stat=%.2e compl=%.2e", steps, f * f0, mu, stat, compl)

        grow = Ad > 0
        a_max = 0.995 * float(np.min(slack[grow] / Ad[grow])) if np.any(grow) else math.inf
        a = min(1.0, a_max)
        phi0 = f - mu * float(np.sum(np.log(slack)))
        phi_a = math.inf
        while a > 1e-14:
            phi_a = phi(u + a * du, mu)
            if phi_a <= phi0 - 1e-4 * a * max(decrement, 0.0):
                break
            a *= 0.5
        else:
            a = 0.0
        # negative curvature was flipped, so the full step can be short: extrapolate
        while a >= 1.0 and 2.0 * a < a_max:
            phi_2a = phi(u + 2.0 * a * du, mu)
            if not phi_2a < phi_a:
                break
            a, phi_a = 2.0 * a, phi_2a
        shrink = dlam < 0
        a_dual = min(1.0, 0.995 * float(np.min(-lam[shrink] / dlam[shrink]))) if np.any(shrink) else 1.0
        u = u + a * du
        lam = lam + a_dual * dlam
        # keep multipliers within a wide band around the central path
        slack = b - A @ u
        lam = np.clip(lam, mu / (1e10 * slack), 1e10 * mu / slack)
        history[-1].update(alpha=a, alpha_dual=a_dual)

    u_feas = _radial_feasible(tr, u)
    f_feas = tr.objective(u_feas)
    if not (f_feas <= f0):
        u_feas, f_feas = u0.copy(), f0
        status = "no_improvement"
    signal = tr.signal(u_feas)
    report = information_report(problem.model, signal, problem.sensor, problem.parameters)
    return OedSolution(
        signal=signal,
        u=u_feas,
        objective=f_feas,
        objective_initial=f0,
        max_violation=tr.violation_by_variable(u_feas),
        iterations=steps,
        status=status,
        converged=status == "converged",
        report=report,
        stationarity=stat,
        complementarity=compl,
        history=history,
    )


def bang_bang_metric(signal: InputSignal, constraints: EnvelopeConstraints, band: float = 0.02) -> float:
    """Fraction of samples sitting at a deflection or deflection-rate bound.

    A sample counts when it is within ``band`` of a bound's magnitude.  The
    rate at sample k is the rate of the interval that starts there.
    """
    fractions = []
    rates = signal.rates()
    rates = np.vstack([rates, rates[-1:]])
    for c, name in enumerate(signal.channels):
        d = signal.values[:, c]
        r = rates[:, c]
        hit = np.zeros(d.shape, dtype=bool)
        for key, series in ((name, d), (f"{name}_rate", r)):
            if key not in constraints.oed:
                continue
            for bound in constraints.oed[key]:
                if bound != 0.0 and math.isfinite(bound):
                    hit |= np.abs(series - bound) <= band * abs(bound)
        fractions.append(float(np.mean(hit)))
    return float(np.mean(fractions)) if fractions else 0.0


def baseline_is_feasible(model: LtiModel, signal: InputSignal, constraints: EnvelopeConstraints) -> bool:
    traj = simulate_lti(model, signal)
    for j, name in enumerate(model.states):
        if name in constraints.oed:
            lo, hi = constraints.oed[name]
            col = traj.states[:, j]
            if np.any(col > hi + 1e-12) or np.any(col < lo - 1e-12):
                return False
    return True


def select_baseline_delta_t(
    model: LtiModel,
    constraints: EnvelopeConstraints,
    amplitude: float,
    candidates: Sequence[float] = tuple(np.round(np.arange(0.1, 1.01, 0.1), 10)),
    start_time: float = 1.0,
    rate_limit: float = DEFAULT_RATE_LIMIT,
    sample_period: float = 0.01,
    horizon: float = 10.0,
) -> float:
    """Largest 3-2-1-1 pulse width whose linear response respects the bounds."""
    channel = model.deflection_states[0] if model.is_augmented else model.inputs[0]
    best = None
    for dT in candidates:
        try:
            sig = gen_3211(amplitude, float(dT), start_time, rate_limit, sample_period, horizon, channel)
        except ValueError:
            continue
        if baseline_is_feasible(model, sig, constraints):
            best = float(dT)
    if best is None:
        raise ValueError("no feasible 3-2-1-1 pulse width among the candidates")
    return best
