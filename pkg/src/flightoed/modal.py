"""Eigenmode characteristics of the 4-state longitudinal and lateral models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from flightoed.lti import LtiModel

LONGITUDINAL_ORDER = ("Phugoid", "ShortPeriod")
LATERAL_ORDER = ("Spiral", "DutchRoll", "RollSubsidence")
TABLE_ORDER = ("Phugoid", "ShortPeriod", "Spiral", "DutchRoll", "RollSubsidence")

_PAIR_TOL = 1e-9


class ModeClassificationError(ValueError):
    pass


@dataclass(frozen=True)
class ModeCharacteristics:
    eigenvalues: tuple
    natural_frequency: float
    damping_ratio: float | None
    time_constant: float
    overshoot_pct: float | None
    period: float | None
    label: str
    stable: bool

    @property
    def oscillatory(self) -> bool:
        return len(self.eigenvalues) == 2

    def to_row(self) -> dict:
        lam = self.eigenvalues[0]
        return {
            "mode": self.label,
            "eigenvalue_re": float(np.real(lam)),
            "eigenvalue_im": abs(float(np.imag(lam))),
            "natural_frequency": self.natural_frequency,
            "damping_ratio": self.damping_ratio,
            "time_constant": self.time_constant,
            "overshoot_pct": self.overshoot_pct,
            "period": self.period,
            "stable": self.stable,
        }


def _complex_mode(lam: complex, label: str) -> ModeCharacteristics:
    wn = abs(lam)
    zeta = -lam.real / wn
    overshoot = None
    if abs(zeta) < 1.0:
        overshoot = 100.0 * math.exp(-zeta * math.pi / math.sqrt(1.0 - zeta * zeta))
    lam_up = complex(lam.real, abs(lam.imag))
    return ModeCharacteristics(
        eigenvalues=(lam_up, lam_up.conjugate()),
        natural_frequency=wn,
        damping_ratio=zeta,
        time_constant=1.0 / wn,
        overshoot_pct=overshoot,
        period=2.0 * math.pi / abs(lam.imag),
        label=label,
        stable=lam.real < 0.0,
    )


def _real_mode(lam: float, label: str) -> ModeCharacteristics:
    wn = abs(lam)
    stable = lam < 0.0
    return ModeCharacteristics(
        eigenvalues=(complex(lam, 0.0),),
        natural_frequency=wn,
        damping_ratio=1.0 if stable else None,
        time_constant=1.0 / wn if wn > 0 else math.inf,
        overshoot_pct=None,
        period=None,
        label=label,
        stable=stable,
    )


def _split(eigs):
    pairs, reals = [], []
    scale = max(1.0, float(np.max(np.abs(eigs))))
    for lam in eigs:
        if abs(lam.imag) <= _PAIR_TOL * scale:
            reals.append(float(lam.real))
        elif lam.imag > 0:
            pairs.append(complex(lam))
    return sorted(pairs, key=abs), sorted(reals, key=abs)


def modal_report(model: LtiModel) -> list[ModeCharacteristics]:
    """Modes of ``model.A`` sorted slow to fast.

    Longitudinal models must have two complex pairs (slower is the phugoid),
    lateral ones one pair and two real roots.  Other models get
    ``Unclassified`` labels.
    """
    if model.is_augmented:
        raise ValueError("modal analysis expects an unaugmented model")
    eigs = np.linalg.eigvals(np.asarray(model.A))
    pairs, reals = _split(eigs)

    if model.axis == "longitudinal":
        if len(pairs) != 2 or reals:
            raise ModeClassificationError(
                f"longitudinal model needs two oscillatory pairs, found {len(pairs)} pairs and {len(reals)} real roots"
            )
        return [_complex_mode(pairs[0], "Phugoid"), _complex_mode(pairs[1], "ShortPeriod")]
    if model.axis == "lateral":
        if len(pairs) != 1 or len(reals) != 2:
            raise ModeClassificationError(
                f"lateral model needs one oscillatory pair and two real roots, found {len(pairs)} and {len(reals)}"
            )
        return [_real_mode(reals[0], "Spiral"), _complex_mode(pairs[0], "DutchRoll"), _real_mode(reals[1], "RollSubsidence")]

    modes = [_complex_mode(lam, "Unclassified") for lam in pairs]
    modes += [_real_mode(lam, "Unclassified") for lam in reals]
    return sorted(modes, key=lambda mc: mc.natural_frequency)
