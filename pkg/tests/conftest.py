import math
import time

import numpy as np
import pytest

from flightoed.airframe import AirframeProperties, default_derivatives, default_trim
from flightoed.conversion import derivative_conversion
from flightoed.maneuvers import gen_3211
from flightoed.oed import make_problem, solve_oed, transcribe

DEG = math.pi / 180.0

# One pulse width for every axis: the widest 3-2-1-1 whose linear response
# stays inside the experiment bounds on the most restrictive (longitudinal) axis.
BASELINE_DT = 0.3
BASELINE_AMPLITUDE = 5 * DEG
CHANNEL = {"longitudinal": "de", "lateral-aileron": "da", "lateral-rudder": "dr"}


@pytest.fixture(scope="session")
def props():
    return AirframeProperties()


@pytest.fixture(scope="session")
def derivs():
    return default_derivatives()


@pytest.fixture(scope="session")
def trim():
    return default_trim()


@pytest.fixture(scope="session")
def coeffs(derivs, props, trim):
    return derivative_conversion("to_dimensionless", derivs, props, trim)


def baseline(axis):
    return gen_3211(BASELINE_AMPLITUDE, BASELINE_DT, 1.0, channel=CHANNEL[axis])


class _Solved:
    def __init__(self, axis, derivs, trim):
        self.axis = axis
        self.baseline = baseline(axis)
        t0 = time.perf_counter()
        self.problem = make_problem(axis, derivs, trim, self.baseline)
        self.transcription = transcribe(self.problem)
        self.solution = solve_oed(self.problem, self.transcription)
        self.seconds = time.perf_counter() - t0


_CACHE = {}


@pytest.fixture(scope="session")
def solved(derivs, trim):
    """Solved designs, computed once per session and axis."""

    def get(axis):
        if axis not in _CACHE:
            _CACHE[axis] = _Solved(axis, derivs, trim)
        return _CACHE[axis]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
