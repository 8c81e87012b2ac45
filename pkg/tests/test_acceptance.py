"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s`. Real datasets are picked
up from $DELAYCHAIN_DATA or ./data (mitbih_train.csv / ptbdb_*.csv); the
classification criterion falls back to the bundled synthetic generator
when they are absent.
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from delaychain import adm, chain, classify, readout
from delaychain.dataio import Signal, load_csv, make_synthetic
from delaychain.neuro import (DELAY_NEURON, MismatchModel, SimConfig, measure_delay,
                              regular_train, simulate)


def verdict(criterion: str, passed: bool, detail: str) -> bool:
    print(f"\nACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    return passed


# -- criterion 1 -------------------------------------------------------------

def test_criterion_1_adm_reconstruction_bound():
    """Reconstruction error strictly below the threshold at every sample,
    1000 seeded random signals x thresholds {0.2, 0.1, 0.04}, under 10 s."""
    rng = np.random.default_rng(2024)
    t0 = time.time()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(30, 190))
        raw = np.cumsum(rng.normal(0.0, 0.07, n))
        span = raw.max() - raw.min()
        raw = (raw - raw.min()) / (span if span > 0 else 1.0)
        sig = Signal(samples=raw, sample_rate_hz=125.0)
        for theta in (0.2, 0.1, 0.04):
            up, down = adm.encode(sig, adm.AdmConfig(threshold=theta))
            # staircase value just after each sample instant
            ts = np.arange(n) / 125.0 + 1e-12
            recon = (sig.samples[0]
                     + theta * (np.searchsorted(up.times, ts, side="right")
                                - np.searchsorted(down.times, ts, side="right")))
            err = np.abs(recon - sig.samples).max()
            worst = max(worst, err / theta)
            assert err < theta
    elapsed = time.time() - t0
    ok = worst < 1.0 and elapsed < 10.0
    assert verdict("1 adm-reconstruction-bound", ok,
                   f"worst |err|/theta={worst:.9f}, {elapsed:.1f} s")


# -- criterion 2 -------------------------------------------------------------

def test_criterion_2_one_to_one_transfer():
    """Default delay neuron at cv=0: exact spike-count equality at 1..20 Hz
    over 2 s windows and measured delay within [0.015, 0.035] s, under 30 s."""
    t0 = time.time()
    for f in range(1, 21):
        n_spikes = 5 + 2 * f  # warm-up plus a 2 s evaluation window
        inputs = regular_train(float(f), n_spikes)
        out = simulate([DELAY_NEURON], [],
                       (inputs, np.zeros(n_spikes, dtype=int),
                        np.full(n_spikes, DELAY_NEURON.base_weight)),
                       SimConfig(duration=float(inputs[-1] + 0.25)))[0]
        assert len(out) == n_spikes, f"{len(out)} outputs for {n_spikes} inputs at {f} Hz"
    delay = measure_delay(DELAY_NEURON, 10.0)
    elapsed = time.time() - t0
    ok = 0.015 <= delay <= 0.035 and elapsed < 30.0
    assert verdict("2 one-to-one-transfer", ok,
                   f"exact counts 1-20 Hz, delay={delay * 1e3:.2f} ms, {elapsed:.1f} s")


# -- criterion 3 -------------------------------------------------------------

def test_criterion_3_chain_preservation(calibrated):
    """Repeating heartbeat through the 6x15 network at cv=0.2: per-chain
    count error <= 5 % and jitter <= 10 ms, under 2 min."""
    records, _, report, net = calibrated
    t0 = time.time()
    beat = make_synthetic(2, seed=42).signals[0]
    trains = adm.encode_bank(beat)
    period = beat.duration
    reps = 4
    repeated = [adm.SpikeTrain(t.channel,
                               np.concatenate([t.times + k * period
                                               for k in range(reps)]))
                for t in trains]
    sim = SimConfig(duration=reps * period + report.memory_span + 0.3)
    outputs = chain.run_network(net, repeated, sim)
    worst_count, worst_jitter = 0.0, 0.0
    for pos in range(len(net.channels)):
        first = outputs[net.chains[pos][0]]
        last = outputs[net.chains[pos][-1]]
        expected = chain.chain_expected_delay(net, records, pos)
        count_error, jitter = chain.measure_preservation(first, last, expected)
        worst_count = max(worst_count, count_error)
        worst_jitter = max(worst_jitter, jitter)
    elapsed = time.time() - t0
    ok = worst_count <= 0.05 and worst_jitter <= 0.010 and elapsed < 120.0
    assert verdict("3 chain-preservation", ok,
                   f"worst count_error={worst_count * 100:.1f}%, "
                   f"worst jitter={worst_jitter * 1e3:.1f} ms, {elapsed:.1f} s")


# -- criterion 4 -------------------------------------------------------------

def test_criterion_4_synchrony(calibrated):
    """Per-step delay spread <= 5 ms from the 256-neuron cv=0.2 pool, and
    the greedy assignment matches brute force on a 4-neuron 2x2 instance."""
    _, _, report, _ = calibrated
    spread = float(report.per_step_spread.max())

    import itertools
    from delaychain.neuro import NeuronRecord
    delays = [0.011, 0.019, 0.013, 0.024]
    records = [NeuronRecord(id=i, params=DELAY_NEURON, measured_delay=d,
                            f_one_to_one_max=25.0) for i, d in enumerate(delays)]
    _, small = chain.select_matched(records, 2, 2)
    greedy = float(small.per_step_spread.max())
    brute = min(max(abs(delays[p[0]] - delays[p[1]]),
                    abs(delays[p[2]] - delays[p[3]]))
                for p in itertools.permutations(range(4)))
    ok = spread <= 0.005 and greedy == pytest.approx(brute)
    assert verdict("4 synchrony", ok,
                   f"max per-step spread={spread * 1e3:.2f} ms, "
                   f"greedy==bruteforce on 2x2: {greedy == pytest.approx(brute)}")


# -- criterion 5 -------------------------------------------------------------

def test_criterion_5_temporal_to_spatial(calibrated):
    """Step profile vs threshold-weighted input history: mean Pearson
    correlation >= 0.7 over 20 held-out beats."""
    _, _, report, net = calibrated
    span = report.memory_span
    step_delay = span / net.steps
    beats = make_synthetic(80, seed=7).signals[40:60]
    inputs = [adm.encode_bank(b) for b in beats]
    outs = chain.run_network_batch(net, inputs, SimConfig(duration=beats[0].duration + 0.4))
    corrs = []
    for beat, trains, out in zip(beats, inputs, outs):
        t = readout.densest_history_time(trains, span, span + step_delay,
                                         beat.duration + 0.2)
        corrs.append(readout.profile_history_correlation(
            out, trains, net, t, step_delay, window=0.05))
    mean_corr = float(np.mean(corrs))
    ok = mean_corr >= 0.7
    assert verdict("5 temporal-to-spatial", ok,
                   f"mean correlation={mean_corr:.3f} over {len(corrs)} beats "
                   f"(min {min(corrs):.2f})")


# -- criterion 6 -------------------------------------------------------------

def _find_datasets():
    root = Path(os.environ.get("DELAYCHAIN_DATA", "data"))
    sets = {}
    if (root / "mitbih_train.csv").exists():
        sets["mitbih"] = (root / "mitbih_train.csv", 5, 0.77)
    for name in ("ptbdb.csv", "ptb.csv"):
        if (root / name).exists():
            sets["ptb"] = (root / name, 2, 0.81)
            break
    else:
        if (root / "ptbdb_normal.csv").exists() and (root / "ptbdb_abnormal.csv").exists():
            sets["ptb"] = ((root / "ptbdb_normal.csv", root / "ptbdb_abnormal.csv"), 2, 0.81)
    return sets


def test_criterion_6_classification():
    """Feature accuracy floors on real datasets (MIT-BIH >= 77 %, PTB >= 81 %,
    gap <= 8 points) or the synthetic >= 90 % floor when data is absent.
    Under 15 min."""
    t0 = time.time()
    sets = _find_datasets()
    details = []
    ok = True
    if sets:
        for name, (paths, class_count, floor) in sets.items():
            if isinstance(paths, tuple):
                import tempfile
                rows = []
                for part, label in zip(paths, (0, 1)):
                    for line in Path(part).read_text().strip().splitlines():
                        cells = line.split(",")
                        cells[-1] = str(label)
                        rows.append(",".join(cells))
                merged = Path(tempfile.mkdtemp()) / "ptb.csv"
                merged.write_text("\n".join(rows) + "\n")
                ds = load_csv(merged, class_count, name=name)
            else:
                ds = load_csv(paths, class_count, name=name)
            result = classify.run_experiment(ds, classify.PipelineConfig(), seed=0)
            acc = result.feature_report.accuracy
            gap = result.accuracy_gap
            details.append(f"{name}: features={acc:.3f} raw={result.raw_report.accuracy:.3f}")
            ok = ok and acc >= floor and gap <= 0.08
    else:
        ds = make_synthetic(1400, seed=7)
        result = classify.run_experiment(ds, classify.PipelineConfig(), seed=0)
        acc = result.feature_report.accuracy
        details.append(f"synthetic: features={acc:.3f} "
                       f"raw={result.raw_report.accuracy:.3f} gap={result.accuracy_gap:.3f}")
        ok = acc >= 0.90 and result.accuracy_gap <= 0.08
    elapsed = time.time() - t0
    ok = ok and elapsed < 900.0
    assert verdict("6 classification", ok, "; ".join(details) + f", {elapsed:.0f} s")


# -- criterion 7 -------------------------------------------------------------

def test_criterion_7_numerical_soundness(tmp_path):
    """Gradient check at 1e-6 relative, dt-halving < 2 %, and bit-identical
    CLI reruns including --jobs > 1."""
    # analytic vs central-difference gradients
    rng = np.random.default_rng(3)
    xs = rng.standard_normal((60, 5))
    y = rng.integers(0, 3, 60)
    onehot = np.zeros((60, 3))
    onehot[np.arange(60), y] = 1.0
    w = 0.4 * rng.standard_normal((3, 5))
    b = 0.1 * rng.standard_normal(3)
    _, grad_w, grad_b = classify.loss_and_gradients(w, b, xs, onehot, l2=1e-3)
    h = 1e-6
    fd = np.zeros_like(w)
    for idx in np.ndindex(*w.shape):
        wp, wm = w.copy(), w.copy()
        wp[idx] += h
        wm[idx] -= h
        fd[idx] = (classify.loss_and_gradients(wp, b, xs, onehot, 1e-3)[0]
                   - classify.loss_and_gradients(wm, b, xs, onehot, 1e-3)[0]) / (2 * h)
    grad_rel = float(np.linalg.norm(grad_w - fd) / np.linalg.norm(grad_w))

    # dt robustness
    d1 = measure_delay(DELAY_NEURON, 10.0, sim=SimConfig(duration=2.0, dt=1e-4))
    d2 = measure_delay(DELAY_NEURON, 10.0, sim=SimConfig(duration=2.0, dt=5e-5))
    dt_rel = abs(d2 - d1) / d1

    # bit-identical reruns, including a parallel one
    def run_cli(out, jobs):
        cmd = [sys.executable, "-m", "delaychain.cli", "encode", "beats.csv",
               "--row", "2", "--jobs", str(jobs), "--out", out]
        r = subprocess.run(cmd, cwd=tmp_path, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        # data outputs only; config.txt intentionally records out_dir/jobs
        return {p.name: p.read_bytes() for p in (tmp_path / out).glob("spikes_*.csv")}

    r = subprocess.run([sys.executable, "-m", "delaychain.cli", "synth",
                        "--count", "12", "--seed", "5", "--out", "beats.csv"],
                       cwd=tmp_path, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    runs = [run_cli("o1", 1), run_cli("o2", 1), run_cli("o3", 2)]
    cli_identical = runs[0] == runs[1] == runs[2]

    # parallel simulation equals sequential, byte for byte
    records = chain.calibrate_pool(12, mm=MismatchModel(cv=0.0, seed=0))
    assignment, _ = chain.select_matched(records, 2, 6)
    net = chain.build_network(assignment, records, thresholds=(0.1,))
    beat = make_synthetic(4, seed=9).signals[1]
    sets = [adm.encode_bank(beat, (0.1,)) for _ in range(4)]
    sim = SimConfig(duration=1.2)
    seq = chain.run_network_batch(net, sets, sim, jobs=1, chunk_size=1)
    par = chain.run_network_batch(net, sets, sim, jobs=3, chunk_size=1)
    sim_identical = all(
        np.array_equal(a[n].times, b[n].times)
        for a, b in zip(seq, par) for n in a)

    ok = grad_rel < 1e-6 and dt_rel < 0.02 and cli_identical and sim_identical
    assert verdict("7 numerical-soundness", ok,
                   f"grad rel={grad_rel:.2e}, dt delta={dt_rel * 100:.2f}%, "
                   f"cli bytes identical={cli_identical}, jobs identical={sim_identical}")
