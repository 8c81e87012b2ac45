"""Firing-rate readout: window rates, feature vectors, spatial profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adm import SpikeTrain
from .chain import NetworkSpec

DEFAULT_WINDOW = 0.03
DEFAULT_SNAPSHOTS = (0.45, 0.90, 1.35)


@dataclass(frozen=True)
class RateSchedule:
    window: float = DEFAULT_WINDOW
    snapshot_times: tuple[float, ...] = DEFAULT_SNAPSHOTS

    def __post_init__(self):
        if self.window <= 0:
            raise ValueError("window must be positive")
        times = tuple(self.snapshot_times)
        object.__setattr__(self, "snapshot_times", times)
        if any(b <= a for a, b in zip(times, times[1:])) or not times:
            raise ValueError("snapshot_times must be nonempty and strictly increasing")


def auto_schedule(memory_span: float, n_snapshots: int = 3,
                  window: float = DEFAULT_WINDOW) -> RateSchedule:
    """Snapshots at multiples of the measured memory span, so consecutive
    readouts tile the signal history without gaps."""
    return RateSchedule(window=window,
                        snapshot_times=tuple(memory_span * (k + 1)
                                             for k in range(n_snapshots)))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.size and not (np.all(np.isfinite(values)) and values.min() >= 0):
            raise ValueError("feature values must be finite and non-negative")

    def __len__(self) -> int:
        return len(self.values)


def rate_in_window(train: SpikeTrain, t_end: float, window: float) -> float:
    """Spike count in (t_end - window, t_end] divided by the window (Hz)."""
    if window <= 0:
        raise ValueError("window must be positive")
    if t_end < window:
        raise ValueError("window extends before time zero")
    times = train.times
    count = (np.searchsorted(times, t_end, side="right")
             - np.searchsorted(times, t_end - window, side="right"))
    return float(count / window)


def extract_features(outputs: dict[int, SpikeTrain], net: NetworkSpec,
                     sched: RateSchedule, label: int = 0) -> FeatureVector:
    """Output-neuron rates at every snapshot, DOWN block then UP block per
    snapshot, snapshots concatenated in time order."""
    ordered = list(net.output_down) + list(net.output_up)
    missing = [nid for nid in ordered if nid not in outputs]
    if missing:
        raise KeyError(f"output trains missing for neuron ids {missing}")
    values = [rate_in_window(outputs[nid], t, sched.window)
              for t in sched.snapshot_times for nid in ordered]
    return FeatureVector(values=np.array(values), label=label)


def spatial_profile(outputs: dict[int, SpikeTrain], net: NetworkSpec,
                    t: float, window: float = DEFAULT_WINDOW):
    """Per-step output rates at time t: (down_rates, up_rates), step order."""
    down = np.array([rate_in_window(outputs[nid], t, window) for nid in net.output_down])
    up = np.array([rate_in_window(outputs[nid], t, window) for nid in net.output_up])
    return down, up


def weighted_input_history(inputs, net: NetworkSpec, t: float,
                           step_delay: float,
                           window: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Threshold-weighted input spike rates binned at the per-step delay.

    Bin k ends at lag (k + 1) * step_delay before t: the input slice that
    has propagated to chain step k (and hence output neuron k) by time t,
    including the first neuron's own delay. The bin width defaults to
    step_delay (contiguous binning); passing the rate window instead makes
    the history directly comparable to the spatial profile. Returns
    (down_history, up_history) aligned with the profile.
    """
    width = step_delay if window is None else window
    top = max(net.thresholds)
    down = np.zeros(net.steps)
    up = np.zeros(net.steps)
    by_channel = {tr.channel: tr for tr in inputs}
    for chain_pos, channel in enumerate(net.channels):
        train = by_channel[channel]
        weight = net.thresholds[net.channel_threshold_index(channel)] / top
        target = up if net.channel_is_up(channel) else down
        for k in range(net.steps):
            hi = t - (k + 1) * step_delay
            lo = hi - width
            if hi <= 0:
                continue
            count = (np.searchsorted(train.times, hi, side="right")
                     - np.searchsorted(train.times, max(lo, 0.0), side="right"))
            target[k] += weight * count / width
    return down, up


def profile_history_correlation(outputs, inputs, net: NetworkSpec, t: float,
                                step_delay: float,
                                window: float = DEFAULT_WINDOW) -> float:
    """Pearson correlation between the spatial rate profile and the
    threshold-weighted input history it should mirror (both polarities
    concatenated). Profile and history use the same estimation window."""
    down_p, up_p = spatial_profile(outputs, net, t, window)
    down_h, up_h = weighted_input_history(inputs, net, t, step_delay, window=window)
    profile = np.concatenate([down_p, up_p])
    history = np.concatenate([down_h, up_h])
    if profile.std() == 0.0 or history.std() == 0.0:
        return 0.0
    return float(np.corrcoef(profile, history)[0, 1])


def densest_history_time(inputs, span: float, lo: float, hi: float,
                         resolution: float = 0.005) -> float:
    """Grid-search the readout time whose trailing `span` holds the most
    input spikes; profiles are most informative there."""
    grid = np.arange(lo, hi, resolution)
    masses = [sum(int(np.searchsorted(tr.times, t, side="right")
                      - np.searchsorted(tr.times, t - span, side="right"))
                  for tr in inputs) for t in grid]
    return float(grid[int(np.argmax(masses))])


def write_features_csv(features, path) -> None:
    """Feature rows: rate columns then the class label, 9 sig. digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for fv in features:
            cells = [f"{v:.9g}" for v in fv.values]
            cells.append(str(fv.label))
            fh.write(",".join(cells) + "\n")


def read_features_csv(path) -> list[FeatureVector]:
    features = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            features.append(FeatureVector(values=np.array([float(c) for c in cells[:-1]]),
                                          label=int(cells[-1])))
    return features
