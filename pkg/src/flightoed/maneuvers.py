"""Control input signals: multistep generators, FCC step quantization, truncation.

A signal holds deflection samples (relative to trim) at ``t_k = k * dt`` for
``k = 0..N``.  Between samples the deflection is linear, which is what a
rate-limited servo produces and what the rate-augmented models integrate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

DEFAULT_RATE_LIMIT = 3.25  # rad/s
DEFAULT_SAMPLE_PERIOD = 0.01
DEFAULT_HORIZON = 10.0


@dataclass(frozen=True, eq=False)
class InputSignal:
    """Uniformly sampled deflections, shape ``(N + 1, n_channels)``, radians."""

    sample_period: float
    values: np.ndarray
    channels: tuple = ("de",)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.shape[1] != len(self.channels):
            raise ValueError(f"{vals.shape[1]} value columns for {len(self.channels)} channels")
        if vals.shape[0] < 2:
            raise ValueError("a signal needs at least two samples")
        if not np.all(np.isfinite(vals)):
            raise ValueError("signal values must be finite")
        if not self.sample_period > 0:
            raise ValueError("sample period must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.n_intervals * self.sample_period

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) * self.sample_period

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, self.channels.index(name)]

    def rates(self) -> np.ndarray:
        """Piecewise-constant deflection rates, shape ``(N, n_channels)``."""
        return np.diff(self.values, axis=0) / self.sample_period

    def with_channels(self, channels: Sequence[str]) -> "InputSignal":
        """Reorder/expand to ``channels``; channels not present are zero."""
        out = np.zeros((self.values.shape[0], len(channels)))
        for j, name in enumerate(channels):
            if name in self.channels:
                out[:, j] = self.channel(name)
        return replace(self, values=out, channels=tuple(channels))

    def scaled(self, factor: float) -> "InputSignal":
        return replace(self, values=self.values * factor)

    def rounded(self, digits: int = 9) -> "InputSignal":
        """Round every sample to ``digits`` significant digits (CSV precision)."""
        vals = np.array([[float(f"{v:.{digits}g}") for v in row] for row in self.values])
        return replace(self, values=vals)

    def energy(self) -> float:
        return float(np.sum(self.values**2) * self.sample_period)

    def to_csv(self, digits: int = 9, degrees: bool = False) -> str:
        """CSV with a ``t`` column; ``degrees`` writes ``<channel>_deg`` columns."""
        k = 180.0 / math.pi if degrees else 1.0
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"{c}_deg" if degrees else c for c in self.channels])
        for t, row in zip(self.time, self.values * k):
            writer.writerow([f"{t:.{digits}g}"] + [f"{v:.{digits}g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metadata: dict | None = None) -> "InputSignal":
        """Inverse of :meth:`to_csv`; ``_deg`` columns are converted to radians."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty signal CSV")
        header, body = rows[0], [r for r in rows[1:] if r]
        if not header or header[0] != "t":
            raise ValueError("signal CSV must start with a 't' column")
        if len(body) < 2:
            raise ValueError("signal CSV needs at least two rows")
        data = np.array([[float(v) for v in r] for r in body])
        t = data[:, 0]
        dt = (t[-1] - t[0]) / (len(t) - 1)
        if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-9):
            raise ValueError("signal CSV time column is not uniform")
        channels, vals = [], data[:, 1:].copy()
        for j, name in enumerate(header[1:]):
            if name.endswith("_deg"):
                name = name[:-4]
                vals[:, j] *= math.pi / 180.0
            channels.append(name)
        return cls(float(f"{dt:.12g}"), vals, tuple(channels), metadata or {})


def _grid(sample_period: float, horizon: float) -> np.ndarray:
    n = int(round(horizon / sample_period))
    if abs(n * sample_period - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("horizon must be a whole number of sample periods")
    return np.arange(n + 1) * sample_period


def _ramped_steps(t, transitions, rate_limit):
    """Sum of ramps of height H centred at t_s and lasting |H| / rate_limit."""
    out = np.zeros_like(t)
    for t_s, H in transitions:
        if H == 0.0:
            continue
        if math.isinf(rate_limit):
            out += H * (t >= t_s - 1e-12)
            continue
        w = abs(H) / rate_limit
        out += H * np.clip((t - (t_s - 0.5 * w)) / w, 0.0, 1.0)
    return out


def _pulse_signal(pulses, amplitude, start_time, rate_limit, sample_period, horizon, channel, kind, delta_t):
    if rate_limit <= 0:
        raise ValueError("rate limit must be positive")
    if delta_t <= 0:
        raise ValueError("pulse duration must be positive")
    # pulses: list of (duration in delta_t units, sign)
    schedule = []
    t = start_time
    for units, sign in pulses:
        schedule.append((t, units * delta_t, sign * amplitude))
        t += units * delta_t
    end = t
    levels = [0.0] + [p[2] for p in schedule] + [0.0]
    times = [p[0] for p in schedule] + [end]
    transitions = [(ts, levels[i + 1] - levels[i]) for i, ts in enumerate(times)]
    half = max((abs(H) / rate_limit for _, H in transitions), default=0.0) / 2 if not math.isinf(rate_limit) else 0.0
    if half > 0.5 * delta_t + 1e-12:
        raise ValueError("rate limit too low for the pulse width: ramps would overlap")
    if start_time - half < -1e-12:
        raise ValueError("start time too early for the first ramp")
    if end + half > horizon + 1e-9:
        raise ValueError(f"maneuver ends at {end + half:.3f} s, beyond the {horizon:.3f} s horizon")
    t_grid = _grid(sample_period, horizon)
    vals = _ramped_steps(t_grid, transitions, rate_limit)
    meta = {
        "kind": kind,
        "amplitude": amplitude,
        "delta_t": delta_t,
        "start_time": start_time,
        "rate_limit": rate_limit,
        "schedule": [list(p) for p in schedule],
    }
    return InputSignal(sample_period, vals.reshape(-1, 1), (channel,), meta)


def gen_3211(
    amplitude: float,
    delta_t: float,
    start_time: float = 1.0,
    rate_limit: float = DEFAULT_RATE_LIMIT,
    sample_period: float = DEFAULT_SAMPLE_PERIOD,
    horizon: float = DEFAULT_HORIZON,
    channel: str = "de",
) -> InputSignal:
    """3-2-1-1 multistep: +A for 3dT, -A for 2dT, +A for dT, -A for dT.

    Sign switches sit at start + 3dT, 5dT, 6dT and the pulse ends at
    start + 7dT.  Each transition is a ramp at ``rate_limit`` centred on the
    nominal switch time; ``metadata["schedule"]`` keeps the ideal pulses as
    (start, duration, level).
    """
    pulses = [(3, 1.0), (2, -1.0), (1, 1.0), (1, -1.0)]
    return _pulse_signal(pulses, amplitude, start_time, rate_limit, sample_period, horizon, channel, "3211", delta_t)


def gen_doublet(
    amplitude: float,
    delta_t: float,
    start_time: float = 1.0,
    rate_limit: float = DEFAULT_RATE_LIMIT,
    sample_period: float = DEFAULT_SAMPLE_PERIOD,
    horizon: float = DEFAULT_HORIZON,
    channel: str = "de",
) -> InputSignal:
    """Doublet: +A for dT then -A for dT."""
    pulses = [(1, 1.0), (1, -1.0)]
    return _pulse_signal(pulses, amplitude, start_time, rate_limit, sample_period, horizon, channel, "doublet", delta_t)


def _piece_boundaries(x: np.ndarray) -> list[int]:
    """Start indices of constant pieces, boundaries at ramp midpoints."""
    moving = np.abs(np.diff(x)) > 0.0
    bounds = [0]
    k = 0
    n = len(moving)
    while k < n:
        if not moving[k]:
            k += 1
            continue
        i = k
        while k < n and moving[k]:
            k += 1
        j = k  # ramp spans samples i..j
        b = (i + j + 1) // 2
        if b > bounds[-1]:
            bounds.append(b)
    return bounds


def _merge_short(bounds: list[int], n_samples: int, min_len: int) -> list[int]:
    """Greedy left-to-right merge so each piece has at least min_len samples."""
    edges = bounds + [n_samples]
    out = [0]
    for b in edges[1:-1]:
        if b - out[-1] >= min_len:
            out.append(b)
    # the last piece may still be short: drop the boundary before it
    while len(out) > 1 and n_samples - out[-1] < min_len:
        out.pop()
    return out


def quantize_to_fcc_steps(signal: InputSignal, min_step_duration: float):
    """Approximate each channel by steps the flight computer can replay.

    Piece boundaries go to the midpoints of ramps (runs of changing samples)
    and pieces shorter than ``min_step_duration`` are merged into the previous
    one.  Each piece takes the mean of its samples, which is the L2-optimal
    level for fixed boundaries.  Returns ``(quantized_signal, schedule)``
    where the schedule lists ``{"channel", "amplitude_deg", "duration_s"}``.
    """
    dt = signal.sample_period
    if min_step_duration < dt - 1e-12:
        raise ValueError("minimum step duration is shorter than the sample period")
    n = signal.values.shape[0]
    min_len = max(1, int(math.ceil(min_step_duration / dt - 1e-9)))
    out = np.zeros_like(signal.values)
    schedule = []
    for c, name in enumerate(signal.channels):
        x = signal.values[:, c]
        bounds = _merge_short(_piece_boundaries(x), n, min_len)
        edges = bounds + [n]
        for a, b in zip(edges[:-1], edges[1:]):
            level = float(np.mean(x[a:b]))
            out[a:b, c] = level
            schedule.append({"channel": name, "amplitude_deg": math.degrees(level), "duration_s": (b - a) * dt})
    meta = dict(signal.metadata)
    meta.update(kind="fcc_steps", min_step_duration=min_step_duration)
    return replace(signal, values=out, metadata=meta), schedule


def quantization_error(original: InputSignal, quantized: InputSignal) -> float:
    """Time-integrated squared error, sum((q - x)^2) * dt."""
    return float(np.sum((quantized.values - original.values) ** 2) * original.sample_period)


def truncate_for_safety(signal: InputSignal, keep_window) -> InputSignal:
    """Zero the signal outside ``[t_start, t_end]``."""
    t0, t1 = keep_window
    t = signal.time
    mask = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    vals = np.where(mask[:, None], signal.values, 0.0)
    meta = dict(signal.metadata)
    meta["keep_window"] = [t0, t1]
    return replace(signal, values=vals, metadata=meta)


def max_rate(signal: InputSignal) -> float:
    return float(np.max(np.abs(signal.rates()))) if signal.n_intervals else 0.0
