"""Command-line interface: encode, calibrate, run, experiment, synth.

Every command is driven by a RunConfig (file plus flag overrides), writes
its resolved configuration next to its outputs, and is deterministic under
a fixed seed; worker count never changes output bytes.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import adm, chain, classify, dataio, figures, readout
from .config import RunConfig, load_config, save_config
from .errors import CalibrationError, DataError, DelayChainError
from .neuro import (DELAY_NEURON, OUTPUT_NEURON, MismatchModel, SimConfig,
                    measure_f_curve)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CALIBRATION = 3


def _common_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Key=value config file; flags override it."),
        click.option("--seed", type=int, default=None, help="Master seed."),
        click.option("--jobs", type=int, default=None, help="Worker processes."),
        click.option("--thresholds", type=str, default=None,
                     help="Comma-separated ADM thresholds."),
        click.option("--steps", type=int, default=None, help="Neurons per chain."),
        click.option("--cv", type=float, default=None,
                     help="Mismatch coefficient of variation."),
        click.option("--auto-schedule", is_flag=True, default=False,
                     help="Derive snapshot times from the measured memory span."),
        click.option("--out", "out_dir", type=click.Path(), default=None,
                     help="Output directory."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _resolve(config_path, **flags) -> RunConfig:
    config = RunConfig()
    if config_path is not None:
        config = load_config(config_path, config)
    updates = {}
    for key, value in flags.items():
        if value is None or (key == "auto_schedule" and value is False):
            continue
        if key == "thresholds":
            value = tuple(float(t) for t in value.split(","))
        updates[key] = value
    return replace(config, **updates)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / "config.txt")
    return out


def _load_dataset(config: RunConfig) -> dataio.Dataset:
    if config.dataset_path:
        return dataio.load_csv(config.dataset_path, config.class_count,
                               header=config.header, name=config.dataset_name)
    if config.dataset_name == "synthetic":
        return dataio.make_synthetic(max(config.sample_total + 400, 600), config.seed)
    raise DataError(f"dataset {config.dataset_name!r} needs --dataset-path")


def _schedule(config: RunConfig, memory_span: float | None = None) -> readout.RateSchedule:
    if config.auto_schedule:
        if memory_span is None:
            raise CalibrationError("auto schedule requires a calibrated memory span")
        return readout.auto_schedule(memory_span, len(config.snapshots), config.window)
    return readout.RateSchedule(window=config.window, snapshot_times=config.snapshots)


def _calibrate(config: RunConfig):
    mm = MismatchModel(cv=config.cv, seed=config.seed)
    n_chains = 2 * len(config.thresholds)
    records = chain.calibrate_pool(config.pool_size, mm=mm,
                                   required=n_chains * config.steps)
    assignment, cal = chain.select_matched(records, n_chains, config.steps)
    net = chain.build_network(assignment, records, thresholds=config.thresholds)
    return records, cal, net


@click.group()
def cli():
    """Delay-chain spiking working memory for ECG beat classification."""


@cli.command()
@click.option("--count", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default="synthetic.csv",
              show_default=True)
def synth(count, seed, out_path):
    """Write a synthetic two-class beat dataset as CSV."""
    ds = dataio.make_synthetic(count, seed)
    dataio.write_csv(ds, out_path)
    click.echo(f"wrote {len(ds)} signals to {out_path}")


@cli.command()
@click.argument("input_csv", type=click.Path())
@click.option("--row", type=int, default=0, show_default=True,
              help="Signal row to encode.")
@click.option("--class-count", type=int, default=2, show_default=True)
@click.option("--header", is_flag=True, default=False)
@click.option("--no-interpolate", is_flag=True, default=False,
              help="Emit spikes on the sample grid instead of interpolating.")
@_common_options
def encode(input_csv, row, class_count, header, no_interpolate, config_path, **flags):
    """Encode one signal into UP/DOWN spike-train CSV files per threshold."""
    config = _resolve(config_path, **flags)
    config = replace(config, dataset_path=str(input_csv), class_count=class_count,
                     header=header, interpolate=not no_interpolate)
    out = _out_dir(config)
    ds = dataio.load_csv(input_csv, class_count, header=header)
    if not 0 <= row < len(ds):
        raise DataError(f"row {row} outside dataset of {len(ds)} signals")
    trains = adm.encode_bank(ds.signals[row], config.thresholds,
                             interpolate=config.interpolate)
    for train in trains:
        path = out / f"spikes_{train.channel}.csv"
        adm.write_spike_csv([train], path)
        click.echo(f"wrote {len(train)} spikes to {path}")


@cli.command()
@_common_options
def calibrate(config_path, **flags):
    """Calibrate a mismatched pool and emit the selection report and figures."""
    config = _resolve(config_path, **flags)
    out = _out_dir(config)
    records, cal, net = _calibrate(config)

    chain.write_records_csv(records, out / "calibration_records.csv")
    chain.write_calibration_csv(cal, out / "calibration_report.csv")
    chain.write_network_spec(net, out / "network_spec.txt")

    curve = measure_f_curve(DELAY_NEURON, [1, 2, 5, 10, 15, 20, 25, 30, 40, 50])
    np.savetxt(out / "delay_neuron_f_curve.csv", curve.points, fmt="%.9g",
               delimiter=",", header="f_in_hz,f_out_hz", comments="")
    figures.fig_f_curve(curve.points, out / "delay_neuron_f_curve.svg")

    delays = np.array([r.measured_delay for r in records if r.measured_delay is not None])
    np.savetxt(out / "measured_delays.csv", delays, fmt="%.9g",
               delimiter=",", header="delay_s", comments="")
    figures.fig_delay_histogram(delays, out / "delay_histogram.svg")

    weights = chain.default_readout_weights(config.thresholds)
    curves = {}
    rows = []
    for j, theta in enumerate(config.thresholds):
        p = replace(OUTPUT_NEURON, base_weight=weights[j])
        c = measure_f_curve(p, [5, 10, 20, 30, 50])
        curves[f"threshold {theta:g}"] = c.points
        rows.extend((theta, fi, fo) for fi, fo in c.points)
    np.savetxt(out / "output_neuron_f_curves.csv", np.array(rows), fmt="%.9g",
               delimiter=",", header="threshold,f_in_hz,f_out_hz", comments="")
    figures.fig_output_curves(curves, out / "output_neuron_f_curves.svg")

    with open(out / "calibration_summary.txt", "w", encoding="utf-8") as fh:
        usable = sum(1 for r in records if r.usable
                     and r.f_one_to_one_max >= chain.MIN_ONE_TO_ONE_HZ)
        fh.write(f"pool_size={len(records)}\n")
        fh.write(f"usable={usable}\n")
        fh.write(f"memory_span_s={cal.memory_span:.9g}\n")
        fh.write(f"max_per_step_spread_s={cal.per_step_spread.max():.9g}\n")
        fh.write("per_step_delay_s="
                 + ",".join(f"{d:.9g}" for d in cal.per_step_delay) + "\n")
    click.echo(f"calibrated {len(records)} neurons; memory span "
               f"{cal.memory_span * 1e3:.1f} ms; outputs in {out}")


@cli.command()
@click.argument("input_csv", type=click.Path(), required=False)
@click.option("--row", type=int, default=0, show_default=True)
@click.option("--repeats", type=int, default=4, show_default=True,
              help="Repetitions of the beat for the preservation run.")
@click.option("--class-count", type=int, default=2, show_default=True)
@click.option("--header", is_flag=True, default=False)
@_common_options
def run(input_csv, row, repeats, class_count, header, config_path, **flags):
    """Run one beat through the network; emit features and figure data."""
    config = _resolve(config_path, **flags)
    if input_csv:
        config = replace(config, dataset_path=str(input_csv),
                         class_count=class_count, header=header)
    out = _out_dir(config)
    ds = _load_dataset(config)
    if not 0 <= row < len(ds):
        raise DataError(f"row {row} outside dataset of {len(ds)} signals")
    signal = ds.signals[row]

    records, cal, net = _calibrate(config)
    chain.write_network_spec(net, out / "network_spec.txt")
    sched = _schedule(config, cal.memory_span)

    trains = adm.encode_bank(signal, config.thresholds, interpolate=config.interpolate)
    period = signal.duration
    repeated = [adm.SpikeTrain(t.channel,
                               np.concatenate([t.times + k * period
                                               for k in range(repeats)]))
                for t in trains]
    duration = config.duration or repeats * period + cal.memory_span + 0.3
    outputs = chain.run_network(net, repeated, SimConfig(duration=duration, dt=config.dt))

    first_last = {}
    rows = []
    for pos, channel in enumerate(net.channels):
        first = outputs[net.chains[pos][0]]
        last = outputs[net.chains[pos][-1]]
        first_last[channel] = (first, last)
        expected = chain.chain_expected_delay(net, records, pos)
        count_error, jitter = chain.measure_preservation(first, last, expected)
        rows.append(f"{channel},{len(first)},{len(last)},"
                    f"{expected:.9g},{count_error:.9g},{jitter:.9g}")
        adm.write_spike_csv([first, last], out / f"raster_{channel}.csv")
    with open(out / "preservation.csv", "w", encoding="utf-8") as fh:
        fh.write("channel,first_count,last_count,expected_delay_s,count_error,jitter_s\n")
        fh.write("\n".join(rows) + "\n")
    figures.fig_chain_raster(first_last, out / "chain_raster.svg")
    figures.fig_output_raster(outputs, net, cal.memory_span,
                              out / "output_raster.svg", duration)

    single = chain.run_network(net, trains, SimConfig(
        duration=config.duration or signal.duration + cal.memory_span + 0.1,
        dt=config.dt))
    fv = readout.extract_features(single, net, sched, label=signal.label)
    readout.write_features_csv([fv], out / "features.csv")
    step_delay = cal.memory_span / net.steps
    t_profile = cal.memory_span + step_delay
    down_p, up_p = readout.spatial_profile(single, net, t_profile, sched.window)
    down_h, up_h = readout.weighted_input_history(trains, net, t_profile, step_delay)
    np.savetxt(out / "spatial_profile.csv",
               np.column_stack([np.arange(net.steps), down_p, up_p, down_h, up_h]),
               fmt="%.9g", delimiter=",",
               header="step,down_rate_hz,up_rate_hz,down_history,up_history",
               comments="")
    figures.fig_spatial_profile(down_p, up_p, down_h, up_h,
                                out / "spatial_profile.svg")
    click.echo(f"ran signal {row}; outputs in {out}")


@cli.command()
@_common_options
def experiment(config_path, **flags):
    """Full pipeline: sample, encode, simulate, classify, compare to raw."""
    config = _resolve(config_path, **flags)
    out = _out_dir(config)
    ds = _load_dataset(config)
    pipeline = classify.PipelineConfig(
        thresholds=config.thresholds,
        steps=config.steps,
        pool_size=config.pool_size,
        cv=config.cv,
        sample_total=config.sample_total,
        train_fraction=config.train_fraction,
        dt=config.dt,
        schedule=readout.RateSchedule(window=config.window,
                                      snapshot_times=config.snapshots),
        auto_schedule=config.auto_schedule,
        hyper=classify.Hyper(learning_rate=config.learning_rate,
                             epochs=config.epochs, l2=config.l2,
                             seed=config.seed),
        jobs=config.jobs,
    )
    result = classify.run_experiment(ds, pipeline, seed=config.seed)

    chain.write_network_spec(result.network, out / "network_spec.txt")
    readout.write_features_csv(result.features, out / "features.csv")
    classify.write_report_csv(result.feature_report, out / "report_features.csv")
    classify.write_report_csv(result.raw_report, out / "report_raw.csv")
    figures.fig_confusion(result.feature_report.confusion,
                          out / "confusion_features.svg", "Rate features")
    figures.fig_confusion(result.raw_report.confusion,
                          out / "confusion_raw.svg", "Raw amplitudes")
    summary = "\n".join([
        f"dataset={config.dataset_name} n={config.sample_total} "
        f"classes={ds.class_count}",
        f"memory_span_s={result.calibration.memory_span:.9g}",
        "snapshots_s=" + ",".join(f"{t:.9g}" for t in result.schedule.snapshot_times),
        f"feature_accuracy={result.feature_report.accuracy:.9g}",
        f"raw_accuracy={result.raw_report.accuracy:.9g}",
        f"accuracy_gap={result.accuracy_gap:.9g}",
    ])
    (out / "summary.txt").write_text(summary + "\n", encoding="utf-8")
    click.echo(summary)


def main(argv=None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except (click.UsageError, click.BadParameter) as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except CalibrationError as exc:
        click.echo(f"calibration failure: {exc}", err=True)
        return EXIT_CALIBRATION
    except (DataError, DelayChainError, FileNotFoundError, ValueError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
