"""Dimensional <-> dimensionless aerodynamic derivative conversion.

The dimensional derivatives are taken to be the exact partial derivatives of
the nonlinear equations of motion at the trim point, so the conversion is the
analytic linearization of :mod:`flightoed.dynamics` and its inverse.  Gravity
and kinematic partials that land in a derivative slot (e.g. ``+1`` in the
alpha-dot/q entry, ``-cos(alpha)`` in the beta-dot/r entry) are accounted for
here.

When going to dimensionless form the constant terms ``CX_0``, ``CZ_0`` and
``Cm_0`` are chosen so that the given trim is an exact equilibrium of the
nonlinear model, and ``reference_speed`` is set to the trim airspeed.
"""

from __future__ import annotations

import math

import numpy as np

from flightoed.airframe import (
    AeroCoefficients,
    AirframeProperties,
    DimensionalDerivatives,
    TrimCondition,
)

TO_DIMENSIONLESS = "to_dimensionless"
TO_DIMENSIONAL = "to_dimensional"

_LATERAL_COLUMNS = (
    # (suffix in primed names, coefficient suffix, uses normalized rate)
    ("beta", "beta", False),
    ("p", "p", True),
    ("r", "r", True),
    ("da", "da", False),
    ("dr", "dr", False),
)


class _Geometry:
    def __init__(self, props: AirframeProperties, trim: TrimCondition):
        V = trim.airspeed
        if not V > 0.0:
            raise ValueError("derivative conversion needs a positive trim airspeed")
        self.V = V
        self.m = props.mass
        self.g = props.gravity
        self.Q = props.dynamic_pressure(V) * props.wing_area
        self.c = props.mean_chord
        self.b = props.wing_span
        self.Jy = props.inertia_y
        self.K = np.array([[props.inertia_x, -props.inertia_xz], [-props.inertia_xz, props.inertia_z]])
        self.alpha = trim.alpha
        self.theta = trim.theta
        self.de = trim.elevator
        self.ca = math.cos(trim.alpha)
        self.sa = math.sin(trim.alpha)
        # gamma-like angle appearing in the gravity partials
        self.cg = math.cos(trim.alpha - trim.theta)
        self.sg = math.sin(trim.alpha - trim.theta)
        self.kq = self.c / (2.0 * V)
        self.kb = self.b / (2.0 * V)

    def along(self, cx, cz):
        return cx * self.ca + cz * self.sa

    def normal(self, cx, cz):
        return cz * self.ca - cx * self.sa

    def unrotate(self, w, n):
        return w * self.ca - n * self.sa, w * self.sa + n * self.ca


def _to_dimensional(coeffs: AeroCoefficients, geo: _Geometry, fixed) -> DimensionalDerivatives:
    c = coeffs
    Q, m, V, g = geo.Q, geo.m, geo.V, geo.g
    dv = (V - c.reference_speed) / c.reference_speed

    cx_t = c.CX_alpha * geo.alpha + c.CX_de * geo.de + c.CX_0 + c.CX_V * dv
    cz_t = c.CZ_alpha * geo.alpha + c.CZ_de * geo.de + c.CZ_0 + c.CZ_V * dv
    cm_t = c.Cm_alpha * geo.alpha + c.Cm_de * geo.de + c.Cm_0 + c.Cm_V * dv
    fw = Q * geo.along(cx_t, cz_t)
    fn = Q * geo.normal(cx_t, cz_t)
    pitch = Q * geo.c * cm_t

    d = {}
    d["X_V"] = (2.0 * fw / V + Q * geo.along(c.CX_V, c.CZ_V) / c.reference_speed) / m
    d["X_alpha"] = (Q * geo.along(c.CX_alpha, c.CZ_alpha) + fn) / m + g * geo.cg
    d["X_q"] = Q * geo.kq * geo.along(c.CX_q, c.CZ_q) / m
    d["X_de"] = Q * geo.along(c.CX_de, c.CZ_de) / m
    d["Z_V"] = (fn / V + Q * geo.normal(c.CX_V, c.CZ_V) / c.reference_speed) / (m * V) - g * geo.cg / V**2
    d["Z_alpha_over_V"] = (Q * geo.normal(c.CX_alpha, c.CZ_alpha) - fw) / (m * V) - g * geo.sg / V
    d["Z_q"] = Q * geo.kq * geo.normal(c.CX_q, c.CZ_q) / (m * V) + 1.0
    d["Z_de_over_V"] = Q * geo.normal(c.CX_de, c.CZ_de) / (m * V)
    qc = Q * geo.c / geo.Jy
    d["M_V"] = 2.0 * pitch / (V * geo.Jy) + qc * c.Cm_V / c.reference_speed
    d["M_alpha"] = qc * c.Cm_alpha
    d["M_q"] = qc * geo.kq * c.Cm_q
    d["M_de"] = qc * c.Cm_de

    d["Y_beta_over_V"] = (Q * c.CY_beta - fw) / (m * V) - g * geo.sg / V
    d["Y_p"] = Q * geo.kb * c.CY_p / (m * V) + geo.sa
    d["Y_r"] = Q * geo.kb * c.CY_r / (m * V) - geo.ca
    d["Y_da_over_V"] = Q * c.CY_da / (m * V)
    d["Y_dr_over_V"] = Q * c.CY_dr / (m * V)
    Kinv = np.linalg.inv(geo.K)
    for prime, suffix, is_rate in _LATERAL_COLUMNS:
        f = geo.kb if is_rate else 1.0
        moments = Q * geo.b * f * np.array([getattr(c, "Cl_" + suffix), getattr(c, "Cn_" + suffix)])
        lp, np_ = Kinv @ moments
        d[f"L{prime}_prime"] = float(lp)
        d[f"N{prime}_prime"] = float(np_)
    return DimensionalDerivatives(d, fixed)


def _to_dimensionless(derivs: DimensionalDerivatives, geo: _Geometry) -> AeroCoefficients:
    d = derivs
    Q, m, V, g = geo.Q, geo.m, geo.V, geo.g
    # equilibrium wind-axis forces at trim (no thrust)
    fw = -m * g * geo.sg
    fn = -m * g * geo.cg

    def pair(w, n):
        return geo.unrotate(w / Q, n / Q)

    out = {}
    out["CX_alpha"], out["CZ_alpha"] = pair(
        m * (d["X_alpha"] - g * geo.cg) - fn,
        m * V * (d["Z_alpha_over_V"] + g * geo.sg / V) + fw,
    )
    out["CX_de"], out["CZ_de"] = pair(m * d["X_de"], m * V * d["Z_de_over_V"])
    out["CX_q"], out["CZ_q"] = pair(m * d["X_q"] / geo.kq, m * V * (d["Z_q"] - 1.0) / geo.kq)
    out["CX_V"], out["CZ_V"] = pair(
        (m * d["X_V"] - 2.0 * fw / V) * V,
        (m * V * (d["Z_V"] + g * geo.cg / V**2) - fn / V) * V,
    )
    qc = Q * geo.c / geo.Jy
    out["Cm_alpha"] = d["M_alpha"] / qc
    out["Cm_q"] = d["M_q"] / (qc * geo.kq)
    out["Cm_de"] = d["M_de"] / qc
    out["Cm_V"] = d["M_V"] * V / qc

    cx_t, cz_t = pair(fw, fn)
    out["CX_0"] = cx_t - out["CX_alpha"] * geo.alpha - out["CX_de"] * geo.de
    out["CZ_0"] = cz_t - out["CZ_alpha"] * geo.alpha - out["CZ_de"] * geo.de
    out["Cm_0"] = -(out["Cm_alpha"] * geo.alpha + out["Cm_de"] * geo.de)

    out["CY_beta"] = (m * V * (d["Y_beta_over_V"] + g * geo.sg / V) + fw) / Q
    out["CY_p"] = m * V * (d["Y_p"] - geo.sa) / (Q * geo.kb)
    out["CY_r"] = m * V * (d["Y_r"] + geo.ca) / (Q * geo.kb)
    out["CY_da"] = m * V * d["Y_da_over_V"] / Q
    out["CY_dr"] = m * V * d["Y_dr_over_V"] / Q
    for prime, suffix, is_rate in _LATERAL_COLUMNS:
        f = geo.kb if is_rate else 1.0
        cl, cn = geo.K @ np.array([d[f"L{prime}_prime"], d[f"N{prime}_prime"]]) / (Q * geo.b * f)
        out["Cl_" + suffix] = float(cl)
        out["Cn_" + suffix] = float(cn)
    return AeroCoefficients(**{k: float(v) for k, v in out.items()}, reference_speed=V)


def derivative_conversion(direction: str, values, props: AirframeProperties, trim: TrimCondition):
    """Convert derivative sets between the dimensional and dimensionless forms.

    ``direction`` is ``"to_dimensionless"`` (takes :class:`DimensionalDerivatives`,
    returns :class:`AeroCoefficients`) or ``"to_dimensional"`` (the reverse).

    >>> from flightoed.airframe import default_derivatives, AirframeProperties, default_trim
    >>> c = derivative_conversion("to_dimensionless", default_derivatives(), AirframeProperties(), default_trim())
    >>> round(c.Cm_alpha, 3)
    -0.489
    """
    geo = _Geometry(props, trim)
    if direction == TO_DIMENSIONLESS:
        if not isinstance(values, DimensionalDerivatives):
            values = DimensionalDerivatives(values)
        return _to_dimensionless(values, geo)
    if direction == TO_DIMENSIONAL:
        if not isinstance(values, AeroCoefficients):
            values = AeroCoefficients(**values)
        return _to_dimensional(values, geo, fixed=frozenset({"M_V", "Y_p"}))
    raise ValueError(f"unknown conversion direction {direction!r}")
