import math

import numpy as np
import pytest

from flightoed.maneuvers import (
    InputSignal,
    gen_3211,
    gen_doublet,
    max_rate,
    quantization_error,
    quantize_to_fcc_steps,
    truncate_for_safety,
)

DEG = math.pi / 180.0


def test_3211_switch_times():
    # A = 5 deg, dT = 0.5 s, start 1.0 s: switches at 2.5, 3.5, 4.0; back to zero at 4.5
    s = gen_3211(5 * DEG, 0.5, 1.0, rate_limit=math.inf)
    sched = s.metadata["schedule"]
    assert [p[0] for p in sched] == pytest.approx([1.0, 2.5, 3.5, 4.0])
    assert sched[-1][0] + sched[-1][1] == pytest.approx(4.5)
    x = s.channel("de")
    t = s.time
    for lo, hi, level in [(1.0, 2.5, 5), (2.5, 3.5, -5), (3.5, 4.0, 5), (4.0, 4.5, -5)]:
        inside = (t > lo + 0.005) & (t < hi - 0.005)
        assert np.allclose(x[inside], level * DEG)
    assert np.all(x[t < 0.995] == 0) and np.all(x[t > 4.505] == 0)


def test_samples_and_grid():
    s = gen_3211(5 * DEG, 0.3)
    assert s.values.shape == (1001, 1)
    assert s.horizon == pytest.approx(10.0)


def test_rate_limit_respected():
    s = gen_3211(5 * DEG, 0.3, rate_limit=3.25)
    assert max_rate(s) <= 3.25 + 1e-9
    assert np.max(np.abs(s.values)) == pytest.approx(5 * DEG)


def test_infinite_rate_integral():
    # the first pulse alone: integral of +A over [start, start + dT]
    s = gen_doublet(2 * DEG, 0.4, 1.0, rate_limit=math.inf)
    x = s.channel("de")
    first = (s.time >= 1.0) & (s.time < 1.4 - 1e-9)
    assert np.sum(x[first]) * s.sample_period == pytest.approx(2 * DEG * 0.4, rel=1e-9)
    # with a finite rate the onset ramp is area-neutral, while the A -> -A ramp
    # centred on the switch gives up a triangle of A^2 / (2R) before it.
    # R puts every ramp end on the sample grid so the oracle is exact.
    A = 2 * DEG
    R = A / 0.04
    s2 = gen_doublet(A, 0.4, 1.0, rate_limit=R)
    x2 = s2.channel("de")
    upto = s2.time <= 1.4 + 1e-9
    area = np.trapezoid(x2[upto], dx=s2.sample_period)
    assert area == pytest.approx(A * 0.4 - A * A / (2 * R), rel=1e-6)
    assert np.trapezoid(x2, dx=s2.sample_period) == pytest.approx(0.0, abs=1e-12)


def test_3211_infinite_rate_integral():
    # +3 -2 +1 -1 pulse units: the pattern integrates to A * dT
    A, dT = 5 * DEG, 0.5
    s = gen_3211(A, dT, 1.0, rate_limit=math.inf)
    assert np.sum(s.channel("de")[:-1]) * s.sample_period == pytest.approx(A * dT, rel=1e-9)
    durations = [p[1] for p in s.metadata["schedule"]]
    assert durations == pytest.approx([3 * dT, 2 * dT, dT, dT])


def test_zero_amplitude():
    s = gen_3211(0.0, 0.5)
    assert np.all(s.values == 0.0)


@pytest.mark.parametrize(
    "kw",
    [
        dict(delta_t=0.0),
        dict(delta_t=2.0),  # ends past the horizon
        dict(delta_t=0.5, rate_limit=0.1),  # ramps overlap
        dict(delta_t=0.5, rate_limit=-1.0),
    ],
)
def test_generator_errors(kw):
    with pytest.raises(ValueError):
        gen_3211(5 * DEG, **kw)


def test_signal_validation():
    with pytest.raises(ValueError):
        InputSignal(0.01, [0.0])
    with pytest.raises(ValueError):
        InputSignal(0.01, [0.0, math.nan])
    with pytest.raises(ValueError):
        InputSignal(0.01, np.zeros((3, 2)), ("de",))


# --- quantization ---------------------------------------------------------


def test_quantize_steps_unchanged():
    x = np.r_[np.zeros(20), np.full(30, 0.05), np.full(51, -0.02)]
    s = InputSignal(0.01, x)
    q, sched = quantize_to_fcc_steps(s, 0.1)
    # a step between samples k and k+1 is a one-interval ramp; its midpoint
    # boundary lands on k+1, so the levels come back exactly
    assert np.allclose(q.values, s.values, rtol=1e-14, atol=0)
    assert [round(p["duration_s"], 9) for p in sched] == [0.2, 0.3, 0.51]


def test_quantize_ramp_midpoint_bound():
    # one full-swing ramp of height H at rate R: squared error near H^3 / (12 R)
    H, R = 10 * DEG, 1.0
    t = np.arange(501) * 0.01
    x = H * np.clip((t - 2.0) / (H / R), 0.0, 1.0)
    s = InputSignal(0.01, x)
    q, _ = quantize_to_fcc_steps(s, 0.2)
    err = quantization_error(s, q)
    assert err == pytest.approx(H**3 / (12 * R), rel=0.1)
    assert err <= H**3 / (12 * R) * 1.1


@pytest.mark.parametrize("dT", [0.3, 0.5])
def test_quantize_3211_triangle_bound(dT):
    # transitions 0->A, A->-A (x3), -A->0: heights A, 2A, 2A, 2A, A.  Each
    # midpoint step leaves a triangle-shaped error worth H^3 / (12 R); the
    # sampled sum may exceed the continuous value by a few percent.
    A, R = 5 * DEG, 3.25
    s = gen_3211(A, dT, rate_limit=R)
    q, _ = quantize_to_fcc_steps(s, 0.1)
    bound = sum(h**3 / (12 * R) for h in (A, 2 * A, 2 * A, 2 * A, A))
    assert quantization_error(s, q) <= 1.05 * bound
    assert quantization_error(s, q) >= 0.9 * bound


def test_quantize_whole_horizon_is_mean():
    s = gen_3211(5 * DEG, 0.3)
    q, sched = quantize_to_fcc_steps(s, 10.0)
    assert len(sched) == 1
    assert np.allclose(q.values, np.mean(s.values))


def test_quantize_min_duration_respected():
    s = gen_3211(5 * DEG, 0.3)
    q, sched = quantize_to_fcc_steps(s, 0.25)
    assert all(p["duration_s"] >= 0.25 - 1e-9 for p in sched)
    assert sum(p["duration_s"] for p in sched) == pytest.approx(s.values.shape[0] * s.sample_period)


def test_quantize_rejects_subsample_step():
    with pytest.raises(ValueError):
        quantize_to_fcc_steps(gen_3211(5 * DEG, 0.3), 0.001)


# --- truncation and CSV ---------------------------------------------------


def test_truncate():
    s = gen_3211(5 * DEG, 0.5)
    full = truncate_for_safety(s, (0.0, 10.0))
    assert np.array_equal(full.values, s.values)
    empty = truncate_for_safety(s, (7.0, 9.0))
    assert np.all(empty.values == 0.0)
    part = truncate_for_safety(s, (0.0, 5.0))
    assert part.energy() == pytest.approx(s.energy())  # the maneuver is done by 4.5 s
    part2 = truncate_for_safety(s, (0.0, 3.0))
    assert 0 < part2.energy() < s.energy()


def test_csv_round_trip_degrees():
    s = gen_3211(5 * DEG, 0.3, channel="dr")
    text = s.to_csv(degrees=True)
    assert text.splitlines()[0] == "t,dr_deg"
    back = InputSignal.from_csv(text)
    assert back.channels == ("dr",)
    assert back.sample_period == pytest.approx(0.01)
    assert np.allclose(back.values, s.values, rtol=1e-8, atol=1e-12)


def test_csv_errors():
    with pytest.raises(ValueError):
        InputSignal.from_csv("x,de\n0,0\n0.01,0\n")
    with pytest.raises(ValueError):
        InputSignal.from_csv("t,de\n0,0\n")
    with pytest.raises(ValueError):
        InputSignal.from_csv("t,de\n0,0\n0.01,0\n0.05,0\n")


def test_with_channels_pads_zero():
    s = gen_3211(5 * DEG, 0.3, channel="da").with_channels(["da", "dr"])
    assert s.values.shape[1] == 2 and np.all(s.channel("dr") == 0)
