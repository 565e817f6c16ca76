"""Longitudinal and lateral small-perturbation state-space models.

Two placements of the attitude-dependent gravity/kinematic entries are
available through ``kinematics``:

``"level"`` (default)
    entries evaluated for a level attitude (theta = 0).  This is the layout
    that reproduces the reference modal characteristics and is used for
    modal analysis and experiment design.
``"trim"``
    entries evaluated at the actual trim attitude.  This is the exact
    linearization of :func:`flightoed.dynamics.nonlinear_rhs` when the
    aerodynamic coefficients come from :func:`derivative_conversion`.

Derivative slots are identical in both cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from flightoed.airframe import DimensionalDerivatives, TrimCondition

KINEMATICS = ("level", "trim")


@dataclass(frozen=True)
class ParameterSlot:
    name: str
    matrix: str  # "A" or "B"
    row: int
    col: int
    scale: float = 1.0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LtiModel:
    """``xdot = A x + B u`` with named states, inputs and measured outputs.

    ``parameter_map`` ties each free derivative to the matrix entries it
    occupies: entry = scale * value.  ``deflection_states`` and
    ``rate_inputs`` are filled in by :func:`augment_actuator_rate`.
    """

    A: np.ndarray
    B: np.ndarray
    states: tuple
    inputs: tuple
    outputs: tuple
    parameter_map: tuple = ()
    axis: str | None = None
    deflection_states: tuple = ()
    rate_inputs: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = _frozen(self.A)
        B = _frozen(self.B)
        if B.ndim == 1:
            B = _frozen(B.reshape(-1, 1))
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n:
            raise ValueError(f"inconsistent shapes A{A.shape} B{B.shape}")
        if len(self.states) != n or len(self.inputs) != B.shape[1]:
            raise ValueError("label counts do not match matrix dimensions")
        missing = set(self.outputs) - set(self.states)
        if missing:
            raise ValueError(f"outputs must be states, got {sorted(missing)}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        for attr in ("states", "inputs", "outputs", "parameter_map", "deflection_states", "rate_inputs"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def parameter_names(self) -> list[str]:
        seen = []
        for slot in self.parameter_map:
            if slot.name not in seen:
                seen.append(slot.name)
        return seen

    @property
    def output_indices(self) -> list[int]:
        return [self.states.index(y) for y in self.outputs]

    @property
    def is_augmented(self) -> bool:
        return bool(self.rate_inputs)

    def slots(self, name: str) -> list[ParameterSlot]:
        found = [s for s in self.parameter_map if s.name == name]
        if not found:
            raise KeyError(f"parameter {name!r} is not in the model's parameter map")
        return found

    def parameter_values(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.parameter_names if names is None else names
        out = []
        for name in names:
            s = self.slots(name)[0]
            M = self.A if s.matrix == "A" else self.B
            out.append(M[s.row, s.col] / s.scale)
        return np.array(out)

    def partials(self, name: str):
        """Constant ``(dA/dtheta, dB/dtheta)`` indicator patterns."""
        dA = np.zeros_like(self.A)
        dB = np.zeros_like(self.B)
        for s in self.slots(name):
            (dA if s.matrix == "A" else dB)[s.row, s.col] += s.scale
        return dA, dB

    def with_parameters(self, values: dict) -> "LtiModel":
        A = np.array(self.A)
        B = np.array(self.B)
        for name, v in values.items():
            for s in self.slots(name):
                (A if s.matrix == "A" else B)[s.row, s.col] = s.scale * v
        return replace(self, A=A, B=B)

    def select_inputs(self, keep: Sequence[str]) -> "LtiModel":
        """Drop input channels; parameters living only in dropped columns go too."""
        if self.is_augmented:
            raise ValueError("select inputs before augmenting")
        idx = [self.inputs.index(k) for k in keep]
        slots = [s for s in self.parameter_map if s.matrix == "A" or s.col in idx]
        slots = [replace(s, col=idx.index(s.col)) if s.matrix == "B" else s for s in slots]
        return replace(self, B=self.B[:, idx], inputs=tuple(keep), parameter_map=tuple(slots))

    def drop_parameters(self, names: Sequence[str]) -> "LtiModel":
        """Treat ``names`` as known: they stay in the matrices but leave the map."""
        slots = [s for s in self.parameter_map if s.name not in set(names)]
        return replace(self, parameter_map=tuple(slots))


def _check_kinematics(kinematics):
    if kinematics not in KINEMATICS:
        raise ValueError(f"kinematics must be one of {KINEMATICS}, got {kinematics!r}")


def build_longitudinal_lti(
    derivs: DimensionalDerivatives, trim: TrimCondition, g: float = 9.81, kinematics: str = "level"
) -> LtiModel:
    """Model with x = [V, alpha, theta, q] and u = [de]."""
    _check_kinematics(kinematics)
    d = derivs
    if kinematics == "trim":
        gamma = trim.theta - trim.alpha
        g_v, g_a = -g * math.cos(gamma), -g * math.sin(gamma) / trim.airspeed
    else:
        g_v, g_a = -g, 0.0
    A = np.array(
        [
            [d["X_V"], d["X_alpha"], g_v, d["X_q"]],
            [d["Z_V"], d["Z_alpha_over_V"], g_a, d["Z_q"]],
            [0.0, 0.0, 0.0, 1.0],
            [d["M_V"], d["M_alpha"], 0.0, d["M_q"]],
        ]
    )
    B = np.array([[d["X_de"]], [d["Z_de_over_V"]], [0.0], [d["M_de"]]])
    layout = [
        ("X_V", "A", 0, 0), ("X_alpha", "A", 0, 1), ("X_q", "A", 0, 3), ("X_de", "B", 0, 0),
        ("Z_V", "A", 1, 0), ("Z_alpha_over_V", "A", 1, 1), ("Z_q", "A", 1, 3), ("Z_de_over_V", "B", 1, 0),
        ("M_V", "A", 3, 0), ("M_alpha", "A", 3, 1), ("M_q", "A", 3, 3), ("M_de", "B", 3, 0),
    ]  # fmt: skip
    pmap = [ParameterSlot(*entry) for entry in layout if entry[0] not in d.fixed]
    states = ("V", "alpha", "theta", "q")
    return LtiModel(
        A, B, states, ("de",), states, tuple(pmap), axis="longitudinal",
        meta={"kinematics": kinematics, "airspeed": trim.airspeed},
    )  # fmt: skip


def build_lateral_lti(
    derivs: DimensionalDerivatives, trim: TrimCondition, g: float = 9.81, kinematics: str = "level"
) -> LtiModel:
    """Model with x = [beta, phi, p, r] and u = [da, dr]; heading is dropped.

    The beta-dot/r entry holds ``Y_r`` as the complete coefficient (the
    tabulated value already contains the kinematic part).
    """
    _check_kinematics(kinematics)
    d = derivs
    V = trim.airspeed
    if kinematics == "trim":
        g_b, t_phi = g * math.cos(trim.theta) / V, math.tan(trim.theta)
    else:
        g_b, t_phi = g / V, 0.0
    A = np.array(
        [
            [d["Y_beta_over_V"], g_b, d["Y_p"], d["Y_r"]],
            [0.0, 0.0, 1.0, t_phi],
            [d["Lbeta_prime"], 0.0, d["Lp_prime"], d["Lr_prime"]],
            [d["Nbeta_prime"], 0.0, d["Np_prime"], d["Nr_prime"]],
        ]
    )
    B = np.array(
        [
            [d["Y_da_over_V"], d["Y_dr_over_V"]],
            [0.0, 0.0],
            [d["Lda_prime"], d["Ldr_prime"]],
            [d["Nda_prime"], d["Ndr_prime"]],
        ]
    )
    layout = [
        ("Y_beta_over_V", "A", 0, 0), ("Y_p", "A", 0, 2), ("Y_r", "A", 0, 3),
        ("Y_da_over_V", "B", 0, 0), ("Y_dr_over_V", "B", 0, 1),
        ("Lbeta_prime", "A", 2, 0), ("Lp_prime", "A", 2, 2), ("Lr_prime", "A", 2, 3),
        ("Lda_prime", "B", 2, 0), ("Ldr_prime", "B", 2, 1),
        ("Nbeta_prime", "A", 3, 0), ("Np_prime", "A", 3, 2), ("Nr_prime", "A", 3, 3),
        ("Nda_prime", "B", 3, 0), ("Ndr_prime", "B", 3, 1),
    ]  # fmt: skip
    pmap = [ParameterSlot(*entry) for entry in layout if entry[0] not in d.fixed]
    states = ("beta", "phi", "p", "r")
    return LtiModel(
        A, B, states, ("da", "dr"), states, tuple(pmap), axis="lateral",
        meta={"kinematics": kinematics, "airspeed": V},
    )  # fmt: skip


def augment_actuator_rate(model: LtiModel) -> LtiModel:
    """Append one integrator per input so deflections become states.

    The new inputs are deflection rates named ``<input>_rate``.
    """
    if model.is_augmented:
        raise ValueError("model is already rate-augmented")
    n, m = model.n_states, model.n_inputs
    A = np.zeros((n + m, n + m))
    A[:n, :n] = model.A
    A[:n, n:] = model.B
    B = np.zeros((n + m, m))
    B[n:, :] = np.eye(m)
    pmap = []
    for s in model.parameter_map:
        if s.matrix == "B":
            s = replace(s, matrix="A", col=n + s.col)
        pmap.append(s)
    rates = tuple(f"{u}_rate" for u in model.inputs)
    return replace(
        model,
        A=A,
        B=B,
        states=model.states + model.inputs,
        inputs=rates,
        parameter_map=tuple(pmap),
        deflection_states=model.inputs,
        rate_inputs=rates,
    )
