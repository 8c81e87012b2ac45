"""Parallel delay chains: calibration, matched selection, wiring, running.

One delay chain per ADM channel. Every neuron in a chain re-emits its
input spikes ~16 ms later, so step k of a chain holds the input as it was
k steps ago; output neurons sum the step-k activity of all UP (or DOWN)
chains with weights proportional to the originating ADM threshold.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass

import numpy as np

from .adm import DEFAULT_THRESHOLDS, SpikeTrain, channel_name
from .errors import BuildError, PoolExhaustedError
from .neuro import (CALIBRATION_RATES, DELAY_NEURON, OUTPUT_NEURON, MismatchModel,
                    NeuronParams, NeuronRecord, SimConfig, measure_delay_batch,
                    measure_f_curve_batch, sample_mismatch, simulate_batch)

DEFAULT_POOL_SIZE = 256
DEFAULT_CHAIN_STEPS = 15
CORE_CAPACITY = 256          # neurons per hardware-style core
MAX_FAN_IN = 64              # synapse inputs per neuron
MIN_ONE_TO_ONE_HZ = 20.0     # usable-neuron rate floor
SYNC_TOLERANCE = 0.005       # max per-step delay spread (s)


@dataclass(frozen=True)
class NetworkSpec:
    """Wired topology plus the post-mismatch parameters needed to run it."""

    thresholds: tuple[float, ...]
    steps: int
    channels: tuple[str, ...]                 # chain order, one per ADM channel
    chains: tuple[tuple[int, ...], ...]       # per channel, neuron id per step
    output_up: tuple[int, ...]
    output_down: tuple[int, ...]
    readout_weights: dict[int, float]         # threshold index -> synapse weight
    neuron_params: dict[int, NeuronParams]

    @property
    def delay_ids(self) -> list[int]:
        return [nid for chain in self.chains for nid in chain]

    @property
    def output_ids(self) -> list[int]:
        return list(self.output_down) + list(self.output_up)

    def channel_threshold_index(self, channel: str) -> int:
        return int(channel.split("-")[0])

    def channel_is_up(self, channel: str) -> bool:
        return channel.endswith("-UP")


@dataclass(frozen=True)
class CalibrationReport:
    pool: tuple[NeuronRecord, ...]
    per_step_delay: np.ndarray     # mean delay across chains at each step (s)
    per_step_spread: np.ndarray    # max - min delay across chains at each step (s)

    @property
    def memory_span(self) -> float:
        return float(self.per_step_delay.sum())


def calibrate_pool(pool_size: int, params: NeuronParams = DELAY_NEURON,
                   mm: MismatchModel = MismatchModel(), sim: SimConfig | None = None,
                   required: int = 0, probe_rates=CALIBRATION_RATES) -> list[NeuronRecord]:
    """Sample mismatch for `pool_size` neurons and measure each one.

    Neurons that are not one-to-one at the 10 Hz probe carry an absent
    delay; the frequency sweep yields f_one_to_one_max. With `required` set,
    raises PoolExhaustedError when too few neurons calibrate cleanly.
    """
    mismatched = [sample_mismatch(params, mm, i) for i in range(pool_size)]
    delays = measure_delay_batch(mismatched, 10.0, sim=sim)
    curves = measure_f_curve_batch(mismatched, probe_rates, sim=sim)
    records = [NeuronRecord(id=i, params=p, measured_delay=d,
                            f_one_to_one_max=c.f_one_to_one_max)
               for i, (p, d, c) in enumerate(zip(mismatched, delays, curves))]
    if required:
        usable = sum(1 for r in records if _selectable(r))
        if usable < required:
            raise PoolExhaustedError(
                f"{usable} usable neurons calibrated, {required} required")
    return records


def _selectable(record: NeuronRecord) -> bool:
    return (record.measured_delay is not None
            and record.f_one_to_one_max is not None
            and record.f_one_to_one_max >= MIN_ONE_TO_ONE_HZ)


def select_matched(records, chains: int, steps: int) -> tuple[np.ndarray, CalibrationReport]:
    """Assign delay-matched neurons to every (chain, step) slot.

    Usable neurons are sorted by measured delay and cut into `steps`
    consecutive groups of `chains`; sorting makes each group's spread no
    worse than any other contiguous grouping. When more neurons are usable
    than needed, the contiguous window with the smallest worst-group spread
    is used.
    """
    usable = sorted((r for r in records if _selectable(r)),
                    key=lambda r: r.measured_delay)
    need = chains * steps
    if len(usable) < need:
        raise PoolExhaustedError(
            f"{len(usable)} usable neurons after the {MIN_ONE_TO_ONE_HZ:.0f} Hz "
            f"filter, {need} required")
    delays = np.array([r.measured_delay for r in usable])
    best_off = 0
    best_spread = np.inf
    for off in range(len(usable) - need + 1):
        win = delays[off:off + need].reshape(steps, chains)
        spread = float((win.max(axis=1) - win.min(axis=1)).max())
        if spread < best_spread:
            best_off, best_spread = off, spread
    chosen = usable[best_off:best_off + need]
    assignment = np.array([[chosen[k * chains + c].id for k in range(steps)]
                           for c in range(chains)])
    win = delays[best_off:best_off + need].reshape(steps, chains)
    report = CalibrationReport(pool=tuple(records),
                               per_step_delay=win.mean(axis=1),
                               per_step_spread=win.max(axis=1) - win.min(axis=1))
    return assignment, report


def default_readout_weights(thresholds=DEFAULT_THRESHOLDS,
                            output_params: NeuronParams = OUTPUT_NEURON) -> dict[int, float]:
    """Readout weight per threshold index, proportional to the threshold;
    the largest threshold maps onto the output neuron's one-to-one weight."""
    top = max(thresholds)
    return {j: output_params.base_weight * t / top for j, t in enumerate(thresholds)}


def build_network(assignment, records, thresholds=DEFAULT_THRESHOLDS,
                  output_params: NeuronParams = OUTPUT_NEURON,
                  readout_weights: dict[int, float] | None = None) -> NetworkSpec:
    """Wire chains and output neurons from a matched assignment.

    `assignment` is (chains, steps) neuron ids into `records`; chains come
    in encode_bank channel order (threshold-0 UP, threshold-0 DOWN, ...).
    """
    assignment = np.asarray(assignment)
    n_chains, steps = assignment.shape
    if n_chains != 2 * len(thresholds):
        raise BuildError(f"{n_chains} chains cannot serve {len(thresholds)} thresholds")
    flat = assignment.ravel().tolist()
    if len(set(flat)) != len(flat):
        raise BuildError("assignment reuses a neuron id")
    if len(flat) > CORE_CAPACITY:
        raise BuildError(f"{len(flat)} delay neurons exceed the {CORE_CAPACITY}-neuron core")
    if 2 * steps > CORE_CAPACITY:
        raise BuildError(f"{2 * steps} output neurons exceed the {CORE_CAPACITY}-neuron core")
    if len(thresholds) > MAX_FAN_IN:
        raise BuildError(f"output fan-in {len(thresholds)} exceeds {MAX_FAN_IN}")
    if readout_weights is None:
        readout_weights = default_readout_weights(thresholds, output_params)

    by_id = {r.id: r for r in records}
    params = {}
    for nid in flat:
        if nid not in by_id:
            raise BuildError(f"neuron id {nid} missing from records")
        params[nid] = by_id[nid].params
    base = max(flat) + 1
    output_down = tuple(range(base, base + steps))
    output_up = tuple(range(base + steps, base + 2 * steps))
    for oid in output_down + output_up:
        params[oid] = output_params

    channels = tuple(channel_name(j, up)
                     for j in range(len(thresholds)) for up in (True, False))
    return NetworkSpec(
        thresholds=tuple(thresholds),
        steps=steps,
        channels=channels,
        chains=tuple(tuple(int(i) for i in chain) for chain in assignment),
        output_up=output_up,
        output_down=output_down,
        readout_weights=dict(readout_weights),
        neuron_params=params,
    )


def _engine_layout(net: NetworkSpec):
    """Dense index mapping plus edge list for the simulation kernel."""
    ids = net.delay_ids + net.output_ids
    index = {nid: k for k, nid in enumerate(ids)}
    params_list = [net.neuron_params[nid] for nid in ids]
    edges = []
    for chain_pos, channel in enumerate(net.channels):
        chain = net.chains[chain_pos]
        w_readout = net.readout_weights[net.channel_threshold_index(channel)]
        outputs = net.output_up if net.channel_is_up(channel) else net.output_down
        for k, nid in enumerate(chain):
            if k + 1 < len(chain):
                nxt = chain[k + 1]
                edges.append((index[nid], index[nxt],
                              net.neuron_params[nxt].base_weight))
            edges.append((index[nid], index[outputs[k]], w_readout))
    return ids, index, params_list, edges


def _input_events(net: NetworkSpec, index, inputs):
    by_channel = {t.channel: t for t in inputs}
    missing = [c for c in net.channels if c not in by_channel]
    if missing:
        raise ValueError(f"missing input channels: {missing}")
    times, neurons, weights = [], [], []
    for chain_pos, channel in enumerate(net.channels):
        train = by_channel[channel]
        first = net.chains[chain_pos][0]
        w = net.neuron_params[first].base_weight
        times.append(train.times)
        neurons.append(np.full(len(train.times), index[first], dtype=np.int64))
        weights.append(np.full(len(train.times), w))
    return (np.concatenate(times), np.concatenate(neurons), np.concatenate(weights))


def run_network(net: NetworkSpec, inputs, sim: SimConfig) -> dict[int, SpikeTrain]:
    """Simulate the full network for one set of input trains; returns the
    spike train of every neuron (delay and output) keyed by neuron id."""
    return run_network_batch(net, [inputs], sim)[0]


def _run_chunk(args):
    net, chunk, sim = args
    ids, index, params_list, edges = _engine_layout(net)
    events = [_input_events(net, index, inputs) for inputs in chunk]
    raw = simulate_batch(params_list, edges, events, sim)
    out = []
    for per_run in raw:
        out.append({nid: SpikeTrain(f"neuron-{nid}", per_run[index[nid]])
                    for nid in ids})
    return out


def run_network_batch(net: NetworkSpec, input_sets, sim: SimConfig,
                      jobs: int = 1, chunk_size: int = 64) -> list[dict[int, SpikeTrain]]:
    """run_network over many input sets; results ordered by input index.

    Runs are independent in the kernel, so neither batching nor the worker
    count changes any output value.
    """
    input_sets = list(input_sets)
    chunks = [input_sets[i:i + chunk_size] for i in range(0, len(input_sets), chunk_size)]
    args = [(net, chunk, sim) for chunk in chunks]
    if jobs > 1 and len(chunks) > 1:
        with multiprocessing.Pool(processes=jobs) as pool:
            parts = pool.map(_run_chunk, args)
    else:
        parts = [_run_chunk(a) for a in args]
    results = []
    for part in parts:
        results.extend(part)
    return results


def measure_preservation(first: SpikeTrain, last: SpikeTrain,
                         expected_delay: float) -> tuple[float, float]:
    """Count error and timing jitter between a chain's first and last neuron.

    Spikes are matched greedily in order, each first-neuron spike to the
    unconsumed last-neuron spike closest to its expected arrival. Jitter is
    the RMS deviation from the expected delay over matched pairs.
    """
    a, b = first.times, last.times
    count_error = abs(len(b) - len(a)) / max(1, len(a))
    if len(a) == 0 or len(b) == 0:
        return count_error, 0.0
    devs = []
    j = 0
    for t in a:
        target = t + expected_delay
        while j + 1 < len(b) and abs(b[j + 1] - target) <= abs(b[j] - target):
            j += 1
        if j >= len(b):
            break
        devs.append(b[j] - target)
        j += 1
        if j >= len(b):
            break
    if not devs:
        return count_error, 0.0
    return count_error, float(np.sqrt(np.mean(np.square(devs))))


def chain_expected_delay(net: NetworkSpec, records, chain_pos: int) -> float:
    """Expected first-to-last propagation delay: the summed measured delays
    of the chain's neurons at steps 1 and beyond."""
    by_id = {r.id: r for r in records}
    return float(sum(by_id[nid].measured_delay for nid in net.chains[chain_pos][1:]))


# ---------------------------------------------------------------------------
# serialization

def write_network_spec(net: NetworkSpec, path) -> None:
    """Key-value text serialization; parses back to an equal NetworkSpec."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"thresholds={','.join(f'{t:.9g}' for t in net.thresholds)}\n")
        fh.write(f"steps={net.steps}\n")
        fh.write(f"channels={','.join(net.channels)}\n")
        for channel, chain in zip(net.channels, net.chains):
            fh.write(f"chain.{channel}={','.join(str(i) for i in chain)}\n")
        fh.write(f"output_down={','.join(str(i) for i in net.output_down)}\n")
        fh.write(f"output_up={','.join(str(i) for i in net.output_up)}\n")
        for j in sorted(net.readout_weights):
            fh.write(f"readout_weight.{j}={net.readout_weights[j]:.9g}\n")
        for nid in sorted(net.neuron_params):
            p = net.neuron_params[nid]
            fields = (p.tau_mem, p.tau_syn, p.v_threshold, p.v_reset,
                      p.refractory, p.base_weight)
            fh.write(f"neuron.{nid}={','.join(f'{v:.9g}' for v in fields)}\n")


def read_network_spec(path) -> NetworkSpec:
    kv = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            kv[key] = value
    thresholds = tuple(float(x) for x in kv["thresholds"].split(","))
    channels = tuple(kv["channels"].split(","))
    chains = tuple(tuple(int(i) for i in kv[f"chain.{c}"].split(",")) for c in channels)
    params = {}
    for key, value in kv.items():
        if key.startswith("neuron."):
            nid = int(key.split(".", 1)[1])
            tm, ts, vt, vr, rf, bw = (float(x) for x in value.split(","))
            params[nid] = NeuronParams(tau_mem=tm, tau_syn=ts, v_threshold=vt,
                                       v_reset=vr, refractory=rf, base_weight=bw)
    return NetworkSpec(
        thresholds=thresholds,
        steps=int(kv["steps"]),
        channels=channels,
        chains=chains,
        output_up=tuple(int(i) for i in kv["output_up"].split(",")),
        output_down=tuple(int(i) for i in kv["output_down"].split(",")),
        readout_weights={int(k.split(".", 1)[1]): float(v)
                         for k, v in kv.items() if k.startswith("readout_weight.")},
        neuron_params=params,
    )


def write_calibration_csv(report: CalibrationReport, path) -> None:
    """Per-step delay statistics of the matched assignment."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"memory_span_s,{report.memory_span:.9g}\n")
        fh.write("step,mean_delay_s,spread_s\n")
        for k, (d, s) in enumerate(zip(report.per_step_delay, report.per_step_spread)):
            fh.write(f"{k},{d:.9g},{s:.9g}\n")


def write_records_csv(records, path) -> None:
    """Calibration table: one row per neuron, absent measurements blank."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,tau_mem,tau_syn,v_threshold,base_weight,"
                 "measured_delay,f_one_to_one_max\n")
        for r in records:
            p = r.params
            delay = f"{r.measured_delay:.9g}" if r.measured_delay is not None else ""
            fmax = f"{r.f_one_to_one_max:.9g}" if r.f_one_to_one_max is not None else ""
            fh.write(f"{r.id},{p.tau_mem:.9g},{p.tau_syn:.9g},{p.v_threshold:.9g},"
                     f"{p.base_weight:.9g},{delay},{fmax}\n")
