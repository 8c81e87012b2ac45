"""Flat key=value run configuration with round-trip serialization."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .adm import DEFAULT_THRESHOLDS
from .errors import DataError


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI command needs to reproduce a run bit-for-bit."""

    dataset_path: str = ""
    dataset_name: str = "synthetic"
    class_count: int = 2
    header: bool = False
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    interpolate: bool = True
    steps: int = 15
    pool_size: int = 256
    cv: float = 0.2
    seed: int = 0
    dt: float = 1e-4
    duration: float = 0.0          # 0: derive from signal length and schedule
    window: float = 0.03
    snapshots: tuple[float, ...] = (0.45, 0.9, 1.35)
    auto_schedule: bool = False
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    train_fraction: float = 0.7
    sample_total: int = 1000
    jobs: int = 1
    out_dir: str = "out"


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text: str, annotation: str):
    if annotation == "bool":
        if text not in ("true", "false"):
            raise DataError(f"expected true/false, got {text!r}")
        return text == "true"
    if annotation == "int":
        return int(text)
    if annotation == "float":
        return float(text)
    if annotation.startswith("tuple"):
        return tuple(float(v) for v in text.split(",")) if text else ()
    return text


def serialize_config(config: RunConfig) -> str:
    lines = [f"{f.name}={_format_value(getattr(config, f.name))}"
             for f in fields(config)]
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse key=value lines; unknown keys are an error, missing keys keep
    the base (default) value."""
    config = base if base is not None else RunConfig()
    by_name = {f.name: f for f in fields(RunConfig)}
    updates = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in by_name:
            raise DataError(f"config line {line_no}: unknown key {key!r}")
        try:
            updates[key] = _parse_value(value.strip(), by_name[key].type)
        except ValueError as exc:
            raise DataError(f"config line {line_no}: {exc}") from None
    return replace(config, **updates)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base)


def save_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_config(config))
