"""Beat dataset ingestion: CSV loading, balancing, splitting, synthesis.

The on-disk format is one beat per row: N amplitude columns followed by a
single integer class label. Amplitudes are min-max normalized to [0, 1]
per row when not already in range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DataError

DEFAULT_SAMPLE_RATE_HZ = 125.0


@dataclass(frozen=True)
class Signal:
    """One preprocessed ECG beat: normalized amplitudes plus a class label."""

    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    label: int = 0
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.size == 0:
            raise DataError("signal has no samples")
        if not np.all(np.isfinite(samples)):
            raise DataError("signal contains non-finite samples")
        if samples.min() < 0.0 or samples.max() > 1.0:
            raise DataError("signal amplitudes must lie in [0, 1]")
        if self.sample_rate_hz <= 0:
            raise DataError("sample_rate_hz must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class Dataset:
    signals: tuple[Signal, ...]
    class_count: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        for sig in self.signals:
            if not 0 <= sig.label < self.class_count:
                raise DataError(
                    f"label {sig.label} outside [0, {self.class_count}) "
                    f"in signal {sig.source_id!r}"
                )

    def __len__(self) -> int:
        return len(self.signals)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.signals], dtype=np.int64)

    def class_indices(self) -> dict[int, np.ndarray]:
        labels = self.labels()
        return {c: np.flatnonzero(labels == c) for c in range(self.class_count)}


def _normalize_row(values: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; rows already in range pass through."""
    lo, hi = values.min(), values.max()
    if 0.0 <= lo and hi <= 1.0:
        return values
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def load_csv(path, class_count: int, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
             header: bool = False, name: str = "") -> Dataset:
    """Load a beat dataset from CSV (amplitude columns + final label column).

    Column count is inferred from the first data row and enforced for the
    rest. Rows with non-numeric or non-finite cells are rejected with an
    error naming the offending row.
    """
    signals = []
    n_cols = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row_no, line in enumerate(fh, start=1):
            if header and row_no == 1:
                continue
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if n_cols is None:
                n_cols = len(cells)
                if n_cols < 2:
                    raise DataError(f"row {row_no}: need at least one amplitude and a label")
            elif len(cells) != n_cols:
                raise DataError(f"row {row_no}: expected {n_cols} columns, got {len(cells)}")
            try:
                values = np.array([float(c) for c in cells], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"row {row_no}: non-numeric cell ({exc})") from None
            if not np.all(np.isfinite(values)):
                raise DataError(f"row {row_no}: non-finite value")
            raw_label = values[-1]
            label = int(round(raw_label))
            if abs(raw_label - label) > 1e-9:
                raise DataError(f"row {row_no}: label {raw_label} is not an integer")
            if not 0 <= label < class_count:
                raise DataError(f"row {row_no}: label {label} outside [0, {class_count})")
            signals.append(Signal(
                samples=_normalize_row(values[:-1]),
                sample_rate_hz=sample_rate_hz,
                label=label,
                source_id=f"{path}:{row_no}",
            ))
    if not signals:
        raise DataError(f"{path}: no data rows")
    return Dataset(signals=tuple(signals), class_count=class_count, name=name)


def write_csv(ds: Dataset, path) -> None:
    """Write a dataset in the same CSV format load_csv reads (9 sig. digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sig in ds.signals:
            cells = [f"{v:.9g}" for v in sig.samples]
            cells.append(str(sig.label))
            fh.write(",".join(cells) + "\n")


def balanced_sample(ds: Dataset, total: int, seed: int) -> Dataset:
    """Draw `total` signals with exactly equal per-class representation."""
    if total % ds.class_count != 0:
        raise ValueError(f"total {total} not divisible by class_count {ds.class_count}")
    per_class = total // ds.class_count
    by_class = ds.class_indices()
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(ds.class_count):
        members = by_class[c]
        if len(members) < per_class:
            raise CapacityError(
                f"class {c} has {len(members)} members, need {per_class}")
        chosen.append(rng.choice(members, size=per_class, replace=False))
    order = rng.permutation(np.concatenate(chosen))
    return Dataset(signals=tuple(ds.signals[i] for i in order),
                   class_count=ds.class_count, name=ds.name)


def stratified_split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split into train/test preserving per-class proportions within one signal."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c, members in ds.class_indices().items():
        if len(members) < 2:
            raise CapacityError(f"class {c} has {len(members)} members, need at least 2")
        members = rng.permutation(members)
        n_train = int(round(len(members) * train_fraction))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.extend(members[:n_train])
        test_idx.extend(members[n_train:])
    train_idx.sort()
    test_idx.sort()
    make = lambda idx: Dataset(signals=tuple(ds.signals[i] for i in idx),
                               class_count=ds.class_count, name=ds.name)
    return make(train_idx), make(test_idx)


# Synthetic beats: sums of Gaussian bumps standing in for the P, QRS and T
# deflections. The two classes differ in T-wave amplitude, latency and
# width relative to the (always full-scale) QRS, so the difference survives
# per-row min-max normalization.
_SYNTH_CLASSES = {
    0: ((0.065, 0.013, 0.16), (0.150, 0.0095, 1.00), (0.330, 0.034, 0.30)),
    1: ((0.065, 0.013, 0.11), (0.150, 0.0130, 1.00), (0.460, 0.052, 0.62)),
}


def make_synthetic(n_signals: int, seed: int, n_samples: int = 187,
                   sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> Dataset:
    """Generate a seeded two-class synthetic beat dataset (labels alternate)."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / sample_rate_hz
    signals = []
    for k in range(n_signals):
        label = k % 2
        beat = np.zeros(n_samples)
        for center, width, amp in _SYNTH_CLASSES[label]:
            center = center + rng.normal(0.0, 0.006)
            width = width * (1.0 + 0.08 * rng.normal())
            amp = amp * (1.0 + 0.06 * rng.normal())
            beat += amp * np.exp(-0.5 * ((t - center) / max(width, 1e-4)) ** 2)
        peak = beat.max()
        if peak > 0:
            beat = beat / peak
        beat = np.clip(beat, 0.0, 1.0)
        signals.append(Signal(samples=beat, sample_rate_hz=sample_rate_hz,
                              label=label, source_id=f"synth:{k}"))
    return Dataset(signals=tuple(signals), class_count=2, name="synthetic")
