"""Airframe constants, aerodynamic derivative sets and trim conditions.

Everything in here is SI with angles in radians. Degrees only show up in
:func:`airframe_from_dict`, which reads the JSON configuration format.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator, Mapping

DEG = math.pi / 180.0


class ConfigError(ValueError):
    """Raised when a configuration document is malformed."""


@dataclass(frozen=True)
class AirframeProperties:
    """Mass, inertia and reference geometry of the vehicle."""

    mass: float = 36.8
    inertia_x: float = 25.0
    inertia_y: float = 32.0
    inertia_z: float = 56.0
    inertia_xz: float = 0.47
    wing_area: float = 3.0
    wing_span: float = 5.5
    mean_chord: float = 0.55
    air_density: float = 1.225
    gravity: float = 9.81

    def __post_init__(self):
        for f in fields(self):
            if f.name == "inertia_xz":
                continue
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{f.name} must be strictly positive, got {value!r}")
        if self.inertia_xz**2 >= self.inertia_x * self.inertia_z:
            raise ValueError("inertia tensor is not positive definite (Jxz^2 >= Jx*Jz)")

    def dynamic_pressure(self, airspeed: float) -> float:
        return 0.5 * self.air_density * airspeed**2


# Coefficient sparsity: force/moment axis -> dependencies.  The speed terms
# (CX_V, CZ_V, Cm_V) multiply (V - V_ref)/V_ref and default to zero.
COEFFICIENT_PATTERN: dict[str, tuple[str, ...]] = {
    "CX": ("alpha", "q", "de", "0", "V"),
    "CY": ("beta", "p", "r", "da", "dr"),
    "CZ": ("alpha", "q", "de", "0", "V"),
    "Cl": ("beta", "p", "r", "da", "dr"),
    "Cm": ("alpha", "q", "de", "0", "V"),
    "Cn": ("beta", "p", "r", "da", "dr"),
}


@dataclass(frozen=True)
class AeroCoefficients:
    """Dimensionless derivatives of the linear coefficient build-up.

    Rate derivatives act on normalized rates ``b p / (2 V)``, ``c q / (2 V)``
    and ``b r / (2 V)``.  Only combinations listed in ``COEFFICIENT_PATTERN``
    exist as fields, so e.g. ``CX_beta`` cannot be set.
    """

    CX_alpha: float = 0.0
    CX_q: float = 0.0
    CX_de: float = 0.0
    CX_0: float = 0.0
    CY_beta: float = 0.0
    CY_p: float = 0.0
    CY_r: float = 0.0
    CY_da: float = 0.0
    CY_dr: float = 0.0
    CZ_alpha: float = 0.0
    CZ_q: float = 0.0
    CZ_de: float = 0.0
    CZ_0: float = 0.0
    Cl_beta: float = 0.0
    Cl_p: float = 0.0
    Cl_r: float = 0.0
    Cl_da: float = 0.0
    Cl_dr: float = 0.0
    Cm_alpha: float = 0.0
    Cm_q: float = 0.0
    Cm_de: float = 0.0
    Cm_0: float = 0.0
    Cn_beta: float = 0.0
    Cn_p: float = 0.0
    Cn_r: float = 0.0
    Cn_da: float = 0.0
    Cn_dr: float = 0.0
    CX_V: float = 0.0
    CZ_V: float = 0.0
    Cm_V: float = 0.0
    reference_speed: float = 20.0

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def derivative_names(self) -> list[str]:
        return [f.name for f in fields(self) if f.name != "reference_speed"]

    def scaled(self, factors: Mapping[str, float]) -> "AeroCoefficients":
        """Return a copy with the named coefficients multiplied by ``factors``."""
        updates = {name: getattr(self, name) * k for name, k in factors.items()}
        return replace(self, **updates)


LONGITUDINAL_DERIVATIVES = (
    "X_V", "X_alpha", "X_q", "X_de",
    "Z_V", "Z_alpha_over_V", "Z_q", "Z_de_over_V",
    "M_V", "M_alpha", "M_q", "M_de",
)  # fmt: skip

LATERAL_DERIVATIVES = (
    "Y_beta_over_V", "Y_p", "Y_r", "Y_da_over_V", "Y_dr_over_V",
    "Lbeta_prime", "Lp_prime", "Lr_prime", "Lda_prime", "Ldr_prime",
    "Nbeta_prime", "Np_prime", "Nr_prime", "Nda_prime", "Ndr_prime",
)  # fmt: skip

ALL_DERIVATIVES = LONGITUDINAL_DERIVATIVES + LATERAL_DERIVATIVES

# a-priori derivatives of the reference airframe at V = 20 m/s
_TABLE_LONGITUDINAL = {
    "X_V": -0.147, "X_alpha": 7.920, "X_q": -0.163, "X_de": -0.232,
    "Z_V": -0.060, "Z_alpha_over_V": -4.400, "Z_q": 0.896, "Z_de_over_V": -0.283,
    "M_V": 0.0, "M_alpha": -6.180, "M_q": -1.767, "M_de": -10.668,
}  # fmt: skip
_TABLE_LATERAL = {
    "Y_beta_over_V": -0.167, "Y_p": 0.0, "Y_r": -0.976,
    "Y_da_over_V": -0.046, "Y_dr_over_V": 0.093,
    "Lbeta_prime": -8.201, "Lp_prime": -11.292, "Lr_prime": 3.853,
    "Lda_prime": -32.600, "Ldr_prime": 0.524,
    "Nbeta_prime": 3.214, "Np_prime": -0.750, "Nr_prime": -0.457,
    "Nda_prime": 0.716, "Ndr_prime": -2.370,
}  # fmt: skip

DEFAULT_FIXED = frozenset({"M_V", "Y_p"})

# Display symbols, used for reports
SYMBOLS = {
    "X_V": "X_V", "X_alpha": "X_α", "X_q": "X_q", "X_de": "X_δe",
    "Z_V": "Z_V", "Z_alpha_over_V": "Z_α/V_Te", "Z_q": "Z_q", "Z_de_over_V": "Z_δe/V_Te",
    "M_V": "M_V", "M_alpha": "M_α", "M_q": "M_q", "M_de": "M_δe",
    "Y_beta_over_V": "Y_β/V_Te", "Y_p": "Y_p", "Y_r": "Y_r",
    "Y_da_over_V": "Y_δa/V_Te", "Y_dr_over_V": "Y_δr/V_Te",
    "Lbeta_prime": "L'_β", "Lp_prime": "L'_p", "Lr_prime": "L'_r",
    "Lda_prime": "L'_δa", "Ldr_prime": "L'_δr",
    "Nbeta_prime": "N'_β", "Np_prime": "N'_p", "Nr_prime": "N'_r",
    "Nda_prime": "N'_δa", "Ndr_prime": "N'_δr",
}  # fmt: skip


@dataclass(frozen=True)
class DimensionalDerivatives(Mapping[str, float]):
    """Named dimensional derivatives that populate the LTI matrices.

    Behaves as a read-only mapping.  ``fixed`` names are part of the model
    but excluded from estimation (they are zero for the reference airframe).
    """

    values: Mapping[str, float] = field(default_factory=dict)
    fixed: frozenset = DEFAULT_FIXED

    def __post_init__(self):
        unknown = set(self.values) - set(ALL_DERIVATIVES)
        if unknown:
            raise KeyError(f"unknown derivative name(s): {sorted(unknown)}")
        missing = set(ALL_DERIVATIVES) - set(self.values)
        if missing:
            raise KeyError(f"missing derivative(s): {sorted(missing)}")
        object.__setattr__(self, "values", {k: float(self.values[k]) for k in ALL_DERIVATIVES})
        object.__setattr__(self, "fixed", frozenset(self.fixed))

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def free(self, names=ALL_DERIVATIVES) -> list[str]:
        return [n for n in names if n not in self.fixed]

    def updated(self, **changes: float) -> "DimensionalDerivatives":
        values = dict(self.values)
        values.update(changes)
        return DimensionalDerivatives(values, self.fixed)

    def denormalized(self, airspeed: float) -> dict[str, float]:
        """Undo the ``/V_Te`` normalization on the derivatives that carry it.

        ``Z_alpha_over_V = -4.4`` at 20 m/s becomes ``Z_alpha = -88``.
        """
        out = {}
        for name, value in self.values.items():
            if name.endswith("_over_V"):
                out[name[: -len("_over_V")]] = value * airspeed
            else:
                out[name] = value
        return out


def default_derivatives() -> DimensionalDerivatives:
    return DimensionalDerivatives({**_TABLE_LONGITUDINAL, **_TABLE_LATERAL})


@dataclass(frozen=True)
class TrimCondition:
    """Steady wings-level equilibrium; beta, phi and body rates are zero."""

    airspeed: float = 20.0
    alpha: float = -0.4 * DEG
    theta: float = -4.5 * DEG
    elevator: float = -1.5 * DEG
    flap: float = 0.0

    def __post_init__(self):
        if not self.airspeed > 0.0:
            raise ValueError("trim airspeed must be positive")

    @property
    def flight_path_angle(self) -> float:
        return self.theta - self.alpha

    def state_vector(self):
        """9-state vector [V, beta, alpha, phi, theta, psi, p, q, r]."""
        import numpy as np

        return np.array([self.airspeed, 0.0, self.alpha, 0.0, self.theta, 0.0, 0.0, 0.0, 0.0])

    def controls(self):
        import numpy as np

        return np.array([0.0, self.elevator, 0.0])

    def to_dict(self) -> dict[str, float]:
        return {
            "V_Te": self.airspeed,
            "alpha_deg": self.alpha / DEG,
            "theta_deg": self.theta / DEG,
            "elevator_deg": self.elevator / DEG,
            "flap_deg": self.flap / DEG,
        }


def default_trim() -> TrimCondition:
    return TrimCondition()


_PROPERTY_KEYS = {
    "m": "mass",
    "Jx": "inertia_x",
    "Jy": "inertia_y",
    "Jz": "inertia_z",
    "Jxz": "inertia_xz",
    "S": "wing_area",
    "b": "wing_span",
    "c_bar": "mean_chord",
    "rho": "air_density",
    "g": "gravity",
}


def airframe_from_dict(doc: Mapping) -> tuple[AirframeProperties, DimensionalDerivatives, TrimCondition]:
    """Build the airframe triple from a parsed airframe document.

    Missing sections fall back to the reference airframe.  Trim angles are in
    degrees.
    """
    props_doc = doc.get("properties", {})
    unknown = set(props_doc) - set(_PROPERTY_KEYS)
    if unknown:
        raise ConfigError(f"properties: unknown key(s) {sorted(unknown)}")
    props = AirframeProperties(**{_PROPERTY_KEYS[k]: float(v) for k, v in props_doc.items()})

    values = dict(default_derivatives().values)
    deriv_doc = doc.get("derivatives", {})
    unknown = set(deriv_doc) - set(ALL_DERIVATIVES)
    if unknown:
        raise ConfigError(f"derivatives: unknown key(s) {sorted(unknown)}")
    values.update({k: float(v) for k, v in deriv_doc.items()})
    fixed = doc.get("fixed", sorted(DEFAULT_FIXED))
    derivs = DimensionalDerivatives(values, frozenset(fixed))

    trim_doc = doc.get("trim", {})
    base = default_trim()
    trim = TrimCondition(
        airspeed=float(trim_doc.get("V_Te", base.airspeed)),
        alpha=float(trim_doc.get("alpha_deg", base.alpha / DEG)) * DEG,
        theta=float(trim_doc.get("theta_deg", base.theta / DEG)) * DEG,
        elevator=float(trim_doc.get("elevator_deg", base.elevator / DEG)) * DEG,
        flap=float(trim_doc.get("flap_deg", 0.0)) * DEG,
    )
    return props, derivs, trim


def airframe_to_dict(props: AirframeProperties, derivs: DimensionalDerivatives, trim: TrimCondition) -> dict:
    inverse = {v: k for k, v in _PROPERTY_KEYS.items()}
    return {
        "properties": {inverse[k]: v for k, v in asdict(props).items()},
        "derivatives": dict(derivs.values),
        "fixed": sorted(derivs.fixed),
        "trim": trim.to_dict(),
    }


def load_airframe(path) -> tuple[AirframeProperties, DimensionalDerivatives, TrimCondition]:
    from flightoed.config import load_json_document

    doc = load_json_document(Path(path), schema="airframe")
    return airframe_from_dict(doc)


def dumps_airframe(props, derivs, trim) -> str:
    return json.dumps(airframe_to_dict(props, derivs, trim), indent=2, sort_keys=True)
