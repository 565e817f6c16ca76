"""JSON configuration files: schema validation and conversion to SI objects.

Two documents exist.  An airframe file (``airframe.schema.json``) holds mass
properties, dimensional derivatives and the trim point.  An experiment file
(``experiment.schema.json``) points at an airframe and describes one design
run.  Angles in files are degrees; everything built here is SI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from flightoed.airframe import (
    DEG,
    AirframeProperties,
    ConfigError,
    DimensionalDerivatives,
    TrimCondition,
    airframe_from_dict,
    default_derivatives,
    default_trim,
)
from flightoed.information import DEFAULT_SIGMAS, SensorModel
from flightoed.maneuvers import DEFAULT_RATE_LIMIT, InputSignal, gen_3211, gen_doublet
from flightoed.oed import DEFLECTION_BOUND_DEG, TABLE_ENVELOPE, TABLE_OED, EnvelopeConstraints

AXIS_CHANNEL = {"longitudinal": "de", "lateral-aileron": "da", "lateral-rudder": "dr"}


class ValidationError(ConfigError):
    """Schema violation; ``diagnostics`` lists ``(line, field path, message)``."""

    def __init__(self, path, diagnostics):
        self.path = str(path)
        self.diagnostics = diagnostics
        lines = [f"{self.path}:{ln if ln else '?'}: {fld or '<root>'}: {msg}" for ln, fld, msg in diagnostics]
        super().__init__("\n".join(lines))


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("flightoed").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of a JSON pointer path in the raw text."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        found = text.find(json.dumps(key), pos)
        if found < 0:
            break
        pos = found
    return text.count("\n", 0, pos) + 1 if path else 1


def validate_document(doc, schema: str, text: str = "", source="<memory>") -> None:
    validator = jsonschema.Draft202012Validator(load_schema(schema))
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        diags = []
        for e in errors:
            p = list(e.absolute_path)
            diags.append((_line_of(text, p) if text else None, "/".join(map(str, p)), e.message))
        raise ValidationError(source, diags)


def load_json_document(path: Path, schema: str) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(path, [(exc.lineno, "", f"invalid JSON: {exc.msg}")]) from None
    validate_document(doc, schema, text, path)
    return doc


def _bounds(doc: dict | None, default: dict) -> dict:
    out = dict(default)
    out.update({k: tuple(v) for k, v in (doc or {}).items()})
    return out


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated experiment file with everything converted to SI objects."""

    axis: str
    props: AirframeProperties
    derivs: DimensionalDerivatives
    trim: TrimCondition
    sensor: SensorModel
    constraints: EnvelopeConstraints
    baseline: dict
    horizon: float = 10.0
    sample_period: float = 0.01
    control_period: float = 0.1
    kinematics: str = "level"
    trim_source: str = "airframe"
    solver: dict = field(default_factory=dict)
    monte_carlo: dict = field(default_factory=dict)
    screen: dict = field(default_factory=dict)
    quantize: dict = field(default_factory=dict)
    output_dir: str = "out"
    seed: int = 0
    document: dict = field(default_factory=dict)  # the validated file content, for hashing
    rate_limit: float = DEFAULT_RATE_LIMIT

    @property
    def channel(self) -> str:
        return AXIS_CHANNEL[self.axis]

    def baseline_signal(self) -> InputSignal:
        b = self.baseline
        gen = gen_3211 if b["kind"] == "3211" else gen_doublet
        return gen(
            b["amplitude_deg"] * DEG,
            b["delta_t_s"],
            start_time=b["start_s"],
            rate_limit=self.rate_limit,
            sample_period=self.sample_period,
            horizon=self.horizon,
            channel=self.channel,
        )


def experiment_from_dict(doc: dict, base_dir: Path = Path("."), overrides: dict | None = None) -> ExperimentConfig:
    doc = json.loads(json.dumps(doc))  # private copy
    overrides = overrides or {}
    if overrides.get("amplitude_deg") is not None:
        doc["baseline"]["amplitude_deg"] = overrides["amplitude_deg"]
    if overrides.get("delta_t_s") is not None:
        doc["baseline"]["delta_t_s"] = overrides["delta_t_s"]
    if overrides.get("grid_hz") is not None:
        if not overrides["grid_hz"] > 0:
            raise ConfigError("--grid-hz must be positive")
        doc["control_period_s"] = 1.0 / overrides["grid_hz"]
    if overrides.get("seed") is not None:
        doc["seed"] = overrides["seed"]
    validate_document(doc, "experiment", source="<config with overrides>")

    if "airframe" in doc:
        from flightoed.airframe import load_airframe

        props, derivs, trim = load_airframe(base_dir / doc["airframe"])
    else:
        props, derivs, trim = AirframeProperties(), default_derivatives(), default_trim()

    trim_source = doc.get("trim", {}).get("source", "airframe")
    if trim_source == "solve":
        from flightoed.conversion import derivative_conversion
        from flightoed.dynamics import trim_solve

        coeffs = derivative_conversion("to_dimensionless", derivs, props, trim)
        trim = trim_solve(trim.airspeed, coeffs, props)

    sdoc = doc.get("sensor", {})
    sigma = dict(DEFAULT_SIGMAS)
    for name, v in sdoc.get("sigma", {}).items():
        sigma[name] = v if name == "V" else v * DEG
    if "measured" in sdoc:
        sigma = {k: v for k, v in sigma.items() if k in set(sdoc["measured"])}
    sensor = SensorModel(sigma, sdoc.get("sample_rate_hz", 100.0))

    cdoc = doc.get("constraints", {})
    rate_limit = cdoc.get("rate_limit_deg_s", DEFAULT_RATE_LIMIT / DEG) * DEG
    constraints = EnvelopeConstraints.table_defaults(
        trim,
        deflection_bound=cdoc.get("deflection_bound_deg", DEFLECTION_BOUND_DEG) * DEG,
        rate_bound=rate_limit,
        oed_abs=_bounds(cdoc.get("experiment"), TABLE_OED),
        envelope_abs=_bounds(cdoc.get("envelope"), TABLE_ENVELOPE),
    )
    try:
        constraints.check_nested(trim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = ExperimentConfig(
        axis=doc["axis"],
        props=props,
        derivs=derivs,
        trim=trim,
        sensor=sensor,
        constraints=constraints,
        baseline=dict(doc["baseline"]),
        horizon=doc.get("horizon_s", 10.0),
        sample_period=doc.get("sample_period_s", 0.01),
        control_period=doc.get("control_period_s", 0.1),
        kinematics=doc.get("kinematics", "level"),
        trim_source=trim_source,
        solver=dict(doc.get("solver", {})),
        monte_carlo=dict(doc.get("monte_carlo", {})),
        screen=dict(doc.get("screen", {})),
        quantize=dict(doc.get("quantize", {})),
        output_dir=doc.get("output_dir", "out"),
        seed=int(doc.get("seed", 0)),
        document=doc,
        rate_limit=rate_limit,
    )
    ratio = cfg.control_period / cfg.sample_period
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ConfigError("control period must be a whole number of sample periods")
    if not math.isclose(cfg.horizon / cfg.control_period, round(cfg.horizon / cfg.control_period), abs_tol=1e-9):
        raise ConfigError("horizon must be a whole number of control periods")
    return cfg


def load_experiment(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    doc = load_json_document(path, "experiment")
    return experiment_from_dict(doc, path.parent, overrides)
