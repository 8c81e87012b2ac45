"""Delta-modulator spike encoding and its reconstruction oracle.

Each modulator tracks a reference level: whenever the input rises one
threshold above it an UP spike is emitted and the reference steps up,
whenever it falls one threshold below a DOWN spike is emitted and the
reference steps down. Crossing times are linearly interpolated between
samples by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Signal
from .errors import DataError

DEFAULT_THRESHOLDS = (0.2, 0.1, 0.04)

# Absolute slack on level comparisons so that exact-multiple crossings
# (e.g. a ramp ending exactly on a level) are not lost to rounding.
_LEVEL_TOL = 1e-9

# Spacing between same-sample events in non-interpolated mode.
_MICRO_OFFSET = 1e-6


@dataclass(frozen=True)
class AdmConfig:
    threshold: float
    interpolate: bool = True

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")


@dataclass(frozen=True)
class SpikeTrain:
    """Sorted event times (seconds) for one named channel."""

    channel: str
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.size and (np.any(np.diff(times) <= 0) or times[0] < 0):
            raise DataError(f"channel {self.channel}: times must be strictly increasing and >= 0")

    def __len__(self) -> int:
        return len(self.times)

    def shifted(self, offset: float) -> "SpikeTrain":
        return SpikeTrain(self.channel, self.times + offset)

    def count_until(self, t: float) -> int:
        return int(np.searchsorted(self.times, t, side="right"))


def channel_name(threshold_index: int, up: bool) -> str:
    return f"{threshold_index}-{'UP' if up else 'DOWN'}"


def encode(signal: Signal, cfg: AdmConfig,
           threshold_index: int = 0) -> tuple[SpikeTrain, SpikeTrain]:
    """Encode one signal into (UP, DOWN) spike trains for one threshold."""
    x = signal.samples
    theta = cfg.threshold
    dt = 1.0 / signal.sample_rate_hz
    base = x[0]
    level = 0  # net UP minus DOWN steps; reference = base + level * theta
    up_times, down_times = [], []
    for i in range(1, len(x)):
        prev, cur = x[i - 1], x[i]
        t_prev = (i - 1) * dt
        n_same = 0
        while True:
            up_level = base + (level + 1) * theta
            down_level = base + (level - 1) * theta
            if cur >= up_level - _LEVEL_TOL:
                if cfg.interpolate and cur != prev:
                    frac = min(max((up_level - prev) / (cur - prev), 0.0), 1.0)
                    t = t_prev + frac * dt
                else:
                    t = i * dt + n_same * _MICRO_OFFSET
                up_times.append(t)
                level += 1
                n_same += 1
            elif cur <= down_level + _LEVEL_TOL:
                if cfg.interpolate and cur != prev:
                    frac = min(max((down_level - prev) / (cur - prev), 0.0), 1.0)
                    t = t_prev + frac * dt
                else:
                    t = i * dt + n_same * _MICRO_OFFSET
                down_times.append(t)
                level -= 1
                n_same += 1
            else:
                break
    return (SpikeTrain(channel_name(threshold_index, True), np.array(up_times)),
            SpikeTrain(channel_name(threshold_index, False), np.array(down_times)))


def encode_bank(signal: Signal, thresholds=DEFAULT_THRESHOLDS,
                interpolate: bool = True) -> list[SpikeTrain]:
    """Encode with one modulator per threshold; trains in threshold order."""
    if len(thresholds) == 0:
        raise ValueError("thresholds must be nonempty")
    trains = []
    for j, theta in enumerate(thresholds):
        up, down = encode(signal, AdmConfig(threshold=theta, interpolate=interpolate), j)
        trains.extend([up, down])
    return trains


def reconstruct(up: SpikeTrain, down: SpikeTrain, threshold: float,
                v0: float, t: float) -> float:
    """Staircase reconstruction at time t from the running spike counts."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return v0 + threshold * (up.count_until(t) - down.count_until(t))


def write_spike_csv(trains, path) -> None:
    """Serialize spike trains as (channel, time_s) rows, 9 sig. digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("channel,time_s\n")
        for train in trains:
            for t in train.times:
                fh.write(f"{train.channel},{t:.9g}\n")


def read_spike_csv(path) -> list[SpikeTrain]:
    by_channel: dict[str, list[float]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "channel,time_s":
            raise DataError(f"{path}: unexpected header {header!r}")
        for row_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                channel, value = line.split(",")
                t = float(value)
            except ValueError:
                raise DataError(f"row {row_no}: malformed spike row") from None
            if channel not in by_channel:
                by_channel[channel] = []
                order.append(channel)
            by_channel[channel].append(t)
    return [SpikeTrain(ch, np.array(by_channel[ch])) for ch in order]
