"""Nonlinear 9-state rigid-body model and trim.

State order everywhere is ``[V, beta, alpha, phi, theta, psi, p, q, r]`` and
controls are ``[da, de, dr]``, all absolute (trim deflections included).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from flightoed.airframe import AeroCoefficients, AirframeProperties, TrimCondition

STATE_NAMES = ("V", "beta", "alpha", "phi", "theta", "psi", "p", "q", "r")
CONTROL_NAMES = ("da", "de", "dr")

_SINGULAR_COS = 1e-6


class SingularStateError(ValueError):
    """State too close to beta = +-90 deg or theta = +-90 deg."""


class TrimError(RuntimeError):
    """Trim iteration failed or left the admissible range."""


@dataclass(frozen=True)
class RigidBodyState:
    airspeed: float
    sideslip: float = 0.0
    alpha: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    p: float = 0.0
    q: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if not self.airspeed > 0.0:
            raise ValueError("airspeed must be positive")
        if abs(math.cos(self.sideslip)) < _SINGULAR_COS:
            raise SingularStateError("sideslip too close to +-90 deg")
        if abs(math.cos(self.pitch)) < _SINGULAR_COS:
            raise SingularStateError("pitch too close to +-90 deg")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.airspeed, self.sideslip, self.alpha, self.roll, self.pitch, self.yaw, self.p, self.q, self.r]
        )

    @classmethod
    def from_array(cls, x) -> "RigidBodyState":
        return cls(*(float(v) for v in x))


def _as_array(state) -> np.ndarray:
    if isinstance(state, RigidBodyState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def gravity_components(state, g: float = 9.81):
    """Wind-axis gravity projections ``(G_VT, G_beta, G_alpha)``."""
    x = _as_array(state)
    beta, alpha, phi, theta = x[1], x[2], x[3], x[4]
    sb, cb = math.sin(beta), math.cos(beta)
    sa, ca = math.sin(alpha), math.cos(alpha)
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    g_v = g * (sb * sp * st - ca * cb * st + sa * cb * cp * ct)
    g_b = g * (ca * sb * st + cb * sp * ct - sa * sb * cp * ct)
    g_a = g * (sa * st + ca * cp * ct)
    return g_v, g_b, g_a


def aero_coefficient_values(x: np.ndarray, u: np.ndarray, c: AeroCoefficients, props: AirframeProperties):
    """Total ``(CX, CY, CZ, Cl, Cm, Cn)`` from the linear build-up."""
    V, beta, alpha = x[0], x[1], x[2]
    p, q, r = x[6], x[7], x[8]
    da, de, dr = u
    ph = props.wing_span * p / (2.0 * V)
    qh = props.mean_chord * q / (2.0 * V)
    rh = props.wing_span * r / (2.0 * V)
    dv = (V - c.reference_speed) / c.reference_speed
    cx = c.CX_alpha * alpha + c.CX_q * qh + c.CX_de * de + c.CX_0 + c.CX_V * dv
    cy = c.CY_beta * beta + c.CY_p * ph + c.CY_r * rh + c.CY_da * da + c.CY_dr * dr
    cz = c.CZ_alpha * alpha + c.CZ_q * qh + c.CZ_de * de + c.CZ_0 + c.CZ_V * dv
    cl = c.Cl_beta * beta + c.Cl_p * ph + c.Cl_r * rh + c.Cl_da * da + c.Cl_dr * dr
    cm = c.Cm_alpha * alpha + c.Cm_q * qh + c.Cm_de * de + c.Cm_0 + c.Cm_V * dv
    cn = c.Cn_beta * beta + c.Cn_p * ph + c.Cn_r * rh + c.Cn_da * da + c.Cn_dr * dr
    return cx, cy, cz, cl, cm, cn


def aero_forces_moments(state, controls, coeffs: AeroCoefficients, props: AirframeProperties):
    """Body-axis aerodynamic forces (N) and moments (N m)."""
    x = _as_array(state)
    if not x[0] > 0.0:
        raise ValueError("airspeed must be positive")
    cx, cy, cz, cl, cm, cn = aero_coefficient_values(x, np.asarray(controls, dtype=float), coeffs, props)
    qs = props.dynamic_pressure(x[0]) * props.wing_area
    forces = qs * np.array([cx, cy, cz])
    moments = qs * np.array([props.wing_span * cl, props.mean_chord * cm, props.wing_span * cn])
    return forces, moments


def nonlinear_rhs(state, controls, coeffs: AeroCoefficients, props: AirframeProperties) -> np.ndarray:
    """Time derivative of the 9-state vector.

    The roll/yaw accelerations depend on each other through the product of
    inertia, so they are obtained from one 2x2 linear solve.
    """
    x = _as_array(state)
    V, beta, alpha, phi, theta = x[0], x[1], x[2], x[3], x[4]
    p, q, r = x[6], x[7], x[8]
    if not V > 0.0:
        raise ValueError("airspeed must be positive")
    cb, ct = math.cos(beta), math.cos(theta)
    if abs(cb) < _SINGULAR_COS or abs(ct) < _SINGULAR_COS:
        raise SingularStateError("state near beta = +-90 deg or theta = +-90 deg")
    sb = math.sin(beta)
    sa, ca = math.sin(alpha), math.cos(alpha)
    sp, cp = math.sin(phi), math.cos(phi)
    tt = math.tan(theta)

    (X, Y, Z), (L, M, N) = aero_forces_moments(x, controls, coeffs, props)
    g_v, g_b, g_a = gravity_components(x, props.gravity)
    m = props.mass
    Jx, Jy, Jz, Jxz = props.inertia_x, props.inertia_y, props.inertia_z, props.inertia_xz

    dx = np.empty(9)
    dx[0] = (Y * sb + X * ca * cb + Z * cb * sa) / m + g_v
    dx[1] = (Y * cb - X * ca * sb - Z * sa * sb) / (m * V) + g_b / V - r * ca + p * sa
    dx[2] = (Z * ca - X * sa) / (m * V * cb) + g_a / (V * cb) + (q * cb - (p * ca + r * sa) * sb) / cb
    dx[3] = p + r * cp * tt + q * sp * tt
    dx[4] = q * cp - r * sp
    dx[5] = (q * sp + r * cp) / ct
    # Jx pdot - Jxz rdot = ..., -Jxz pdot + Jz rdot = ...
    rhs_p = -q * r * (Jz - Jy) + q * p * Jxz + L
    rhs_r = -p * q * (Jy - Jx) - q * r * Jxz + N
    det = Jx * Jz - Jxz * Jxz
    dx[6] = (Jz * rhs_p + Jxz * rhs_r) / det
    dx[8] = (Jxz * rhs_p + Jx * rhs_r) / det
    dx[7] = (-p * r * (Jx - Jz) - (p * p - r * r) * Jxz + M) / Jy
    return dx


def _trim_state(V, alpha, theta):
    return np.array([V, 0.0, alpha, 0.0, theta, 0.0, 0.0, 0.0, 0.0])


def _trim_residual(z, V, coeffs, props):
    alpha, theta, de = z
    dx = nonlinear_rhs(_trim_state(V, alpha, theta), (0.0, de, 0.0), coeffs, props)
    return np.array([dx[0], dx[2], dx[7]])


def trim_solve(
    V_Te: float,
    coeffs: AeroCoefficients,
    props: AirframeProperties,
    max_iter: int = 50,
    tol: float = 1e-10,
    alpha_limits=(-0.35, 0.52),
    elevator_limits=(-0.52, 0.52),
) -> TrimCondition:
    """Steady wings-level unpowered equilibrium at airspeed ``V_Te``.

    Unknowns are (alpha, theta, de), residuals (Vdot, alphadot, qdot).  There
    is no thrust in the model, so the flight-path angle theta - alpha is an
    output of the balance, not an input.  Damped Newton from zero.
    """
    if not V_Te > 0.0:
        raise ValueError("trim airspeed must be positive")
    z = np.zeros(3)
    res = _trim_residual(z, V_Te, coeffs, props)
    h = 1e-7
    for _ in range(max_iter):
        if np.max(np.abs(res)) < tol:
            break
        J = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            J[:, k] = (_trim_residual(z + e, V_Te, coeffs, props) - _trim_residual(z - e, V_Te, coeffs, props)) / (2 * h)
        try:
            step = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise TrimError("singular trim Jacobian") from exc
        lam = 1.0
        norm0 = np.linalg.norm(res)
        while True:
            trial = z + lam * step
            trial_res = _trim_residual(trial, V_Te, coeffs, props)
            if np.linalg.norm(trial_res) < norm0 or lam < 1e-4:
                break
            lam *= 0.5
        z, res = trial, trial_res
    else:
        if np.max(np.abs(res)) >= tol:
            raise TrimError(f"trim did not converge in {max_iter} iterations (residual {np.max(np.abs(res)):.3e})")
    alpha, theta, de = (float(v) for v in z)
    if not (alpha_limits[0] <= alpha <= alpha_limits[1]):
        raise TrimError(f"trim angle of attack {math.degrees(alpha):.2f} deg out of range")
    if not (elevator_limits[0] <= de <= elevator_limits[1]):
        raise TrimError(f"trim elevator {math.degrees(de):.2f} deg out of range")
    if abs(theta) >= math.pi / 2:
        raise TrimError("trim pitch angle out of range")
    return TrimCondition(airspeed=float(V_Te), alpha=alpha, theta=theta, elevator=de)


def linearize(trim: TrimCondition, coeffs: AeroCoefficients, props: AirframeProperties, step: float = 1e-6):
    """Central-difference Jacobians (A 9x9, B 9x3) of the nonlinear model at trim."""
    x0 = trim.state_vector()
    u0 = trim.controls()
    A = np.empty((9, 9))
    B = np.empty((9, 3))
    for k in range(9):
        h = step * max(1.0, abs(x0[k]))
        e = np.zeros(9)
        e[k] = h
        A[:, k] = (nonlinear_rhs(x0 + e, u0, coeffs, props) - nonlinear_rhs(x0 - e, u0, coeffs, props)) / (2 * h)
    for k in range(3):
        e = np.zeros(3)
        e[k] = step
        B[:, k] = (nonlinear_rhs(x0, u0 + e, coeffs, props) - nonlinear_rhs(x0, u0 - e, coeffs, props)) / (2 * step)
    return A, B
