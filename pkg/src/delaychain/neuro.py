"""Spiking neuron model, mismatch sampling, and the clock-driven kernel.

The neuron is a leaky integrate-and-fire unit with an exponential
current-based synapse, stepped on a fixed clock with exact per-step decay
factors:

    i <- i * exp(-dt / tau_syn) + sum(incoming weights)
    v <- v * exp(-dt / tau_mem) + i * dt
    fire when v >= v_threshold and the refractory clock has expired

The membrane keeps integrating during the refractory window; only firing
is gated. A spike therefore either occurs at its natural crossing time or
is pinned to the end of the refractory window, which is what lets a chain
of these neurons re-emit closely spaced inputs without dropping them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CalibrationError

WARMUP_SPIKES = 5

# Probe rates used when calibrating a pool (Hz). Must extend past the
# one-to-one ceiling so saturation is observed.
CALIBRATION_RATES = (1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0)


@dataclass(frozen=True)
class NeuronParams:
    tau_mem: float        # membrane leak time constant (s)
    tau_syn: float        # synaptic current decay time constant (s)
    v_threshold: float
    v_reset: float
    refractory: float     # minimum inter-spike interval (s)
    base_weight: float    # synaptic efficacy per incoming spike

    def __post_init__(self):
        if self.tau_mem <= 0 or self.tau_syn <= 0 or self.refractory <= 0:
            raise ValueError("tau_mem, tau_syn, refractory must be positive")
        if self.v_threshold <= self.v_reset:
            raise ValueError("v_threshold must exceed v_reset")


@dataclass(frozen=True)
class MismatchModel:
    """Log-normal device mismatch, median 1, coefficient of variation cv."""

    cv: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.cv < 1.0:
            raise ValueError("cv must be in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class SimConfig:
    duration: float       # s
    dt: float = 1e-4      # s

    def __post_init__(self):
        if not 0.0 < self.dt <= 1e-3:
            raise ValueError("dt must be in (0, 1e-3]")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class NeuronRecord:
    """Calibration outcome for one neuron; absent fields mean failure."""

    id: int
    params: NeuronParams
    measured_delay: float | None = None
    f_one_to_one_max: float | None = None

    @property
    def usable(self) -> bool:
        return self.measured_delay is not None and self.f_one_to_one_max is not None


# Default parameter sets, fixed by running the calibration oracles below
# (tune_one_to_one_weight + measure_delay + measure_f_curve) at cv = 0.
#
# Delay neuron: ~16 ms latency at the 10 Hz probe, exact one-to-one
# transfer at 1..20 Hz, saturation at 50 Hz (the 40 ms refractory caps the
# cadence at 25 Hz). The hyperpolarizing reset quenches the synaptic tail
# after each spike so latency stays insensitive to preceding activity,
# which is what keeps parallel chains in sync; base_weight is 1.03x the
# bisected firing boundary (124.48 at 10 Hz).
DELAY_NEURON = NeuronParams(
    tau_mem=0.032,
    tau_syn=0.016,
    v_threshold=1.0,
    v_reset=-1.0,
    refractory=0.040,
    base_weight=128.2,
)

# Output neuron: fast readout unit, ~3 ms response, one-to-one at the
# 20 Hz reference drive; base_weight is 1.3x the bisected boundary
# (394.07 at 20 Hz) and serves as the reference readout weight that the
# largest ADM threshold maps onto.
OUTPUT_NEURON = NeuronParams(
    tau_mem=0.010,
    tau_syn=0.005,
    v_threshold=1.0,
    v_reset=0.0,
    refractory=0.001,
    base_weight=512.3,
)


# ---------------------------------------------------------------------------
# single-neuron stepping (reference semantics for the vectorized kernel)

@dataclass
class NeuronState:
    v: float = 0.0
    i: float = 0.0
    refractory_steps: int = 0


def step_neuron(state: NeuronState, input_weight_sum: float,
                params: NeuronParams, dt: float) -> tuple[NeuronState, bool]:
    """Advance one neuron by one clock step; returns (new state, fired)."""
    i = state.i * math.exp(-dt / params.tau_syn) + input_weight_sum
    v = state.v * math.exp(-dt / params.tau_mem) + i * dt
    ref = max(0, state.refractory_steps - 1)
    fired = v >= params.v_threshold and ref == 0
    if fired:
        v = params.v_reset
        ref = max(1, int(round(params.refractory / dt)))
    if not (math.isfinite(v) and math.isfinite(i)):
        raise FloatingPointError("neuron state diverged")
    return NeuronState(v=v, i=i, refractory_steps=ref), fired


# ---------------------------------------------------------------------------
# vectorized kernel

def _bin_events(times, dt: float, steps: int) -> np.ndarray:
    """Map event times to the first clock step strictly after them."""
    s = np.floor(np.asarray(times, dtype=np.float64) / dt).astype(np.int64) + 1
    return s


def simulate(params_list, edges, events, sim: SimConfig,
             record=None) -> list[np.ndarray]:
    """Run one network instance; see simulate_batch."""
    return simulate_batch(params_list, edges, [events], sim, record=record)[0]


def simulate_batch(params_list, edges, events_per_run, sim: SimConfig,
                   record=None) -> list[list[np.ndarray]]:
    """Clock-driven simulation of one network over a batch of input sets.

    Args:
        params_list: NeuronParams per neuron (length N).
        edges: iterable of (pre, post, weight) internal connections; a spike
            at step s is delivered to its targets at step s + 1.
        events_per_run: per run, a (times, neurons, weights) triple of
            external input events (arrays of equal length).
        sim: clock configuration.
        record: optional iterable of neuron indices to record (default all).

    Returns:
        Per run, a list of N sorted spike-time arrays (seconds); unrecorded
        neurons get empty arrays. Runs are fully independent, so results do
        not depend on how runs are batched.
    """
    n = len(params_list)
    b = len(events_per_run)
    dt = sim.dt
    steps = sim.steps

    tau_mem = np.array([p.tau_mem for p in params_list])
    tau_syn = np.array([p.tau_syn for p in params_list])
    decay_m = np.exp(-dt / tau_mem)
    decay_s = np.exp(-dt / tau_syn)
    v_th = np.array([p.v_threshold for p in params_list])
    v_reset = np.array([p.v_reset for p in params_list])
    ref_steps = np.array([max(1, int(round(p.refractory / dt))) for p in params_list],
                         dtype=np.int64)

    # External events, sorted by delivery step with per-step offsets.
    ev_step = np.empty(0, dtype=np.int64)
    ev_run = np.empty(0, dtype=np.int64)
    ev_neuron = np.empty(0, dtype=np.int64)
    ev_weight = np.empty(0, dtype=np.float64)
    chunks = []
    for r, (times, neurons, weights) in enumerate(events_per_run):
        times = np.asarray(times, dtype=np.float64)
        if times.size == 0:
            continue
        s = _bin_events(times, dt, steps)
        keep = s <= steps
        chunks.append((s[keep],
                       np.full(int(keep.sum()), r, dtype=np.int64),
                       np.asarray(neurons, dtype=np.int64)[keep],
                       np.asarray(weights, dtype=np.float64)[keep]))
    if chunks:
        ev_step = np.concatenate([c[0] for c in chunks])
        ev_run = np.concatenate([c[1] for c in chunks])
        ev_neuron = np.concatenate([c[2] for c in chunks])
        ev_weight = np.concatenate([c[3] for c in chunks])
        order = np.argsort(ev_step, kind="stable")
        ev_step, ev_run = ev_step[order], ev_run[order]
        ev_neuron, ev_weight = ev_neuron[order], ev_weight[order]
    offsets = np.searchsorted(ev_step, np.arange(1, steps + 2))

    # Outgoing adjacency in CSR form for event-driven recurrent delivery.
    edges = list(edges)
    out_post = [[] for _ in range(n)]
    out_w = [[] for _ in range(n)]
    for pre, post, w in edges:
        out_post[pre].append(post)
        out_w[pre].append(w)
    out_post = [np.array(p, dtype=np.int64) for p in out_post]
    out_w = [np.array(w, dtype=np.float64) for w in out_w]

    recorded = np.zeros(n, dtype=bool)
    recorded[list(record) if record is not None else range(n)] = True

    v = np.zeros((b, n))
    i_syn = np.zeros((b, n))
    ref_until = np.zeros((b, n), dtype=np.int64)
    pending: list[tuple[np.ndarray, np.ndarray]] = []
    spikes_run: list[np.ndarray] = []
    spikes_neuron: list[np.ndarray] = []
    spikes_step: list[np.ndarray] = []

    for s in range(1, steps + 1):
        i_syn *= decay_s
        a, z = offsets[s - 1], offsets[s]
        if a < z:
            np.add.at(i_syn, (ev_run[a:z], ev_neuron[a:z]), ev_weight[a:z])
        for rr, nn in pending:
            for r, pre in zip(rr, nn):
                posts = out_post[pre]
                if posts.size:
                    i_syn[r, posts] += out_w[pre]
        v *= decay_m
        v += i_syn * dt
        fired = (v >= v_th) & (ref_until <= s)
        if fired.any():
            rr, nn = np.nonzero(fired)
            v[rr, nn] = v_reset[nn]
            ref_until[rr, nn] = s + ref_steps[nn]
            pending = [(rr, nn)]
            rec = recorded[nn]
            if rec.any():
                spikes_run.append(rr[rec])
                spikes_neuron.append(nn[rec])
                spikes_step.append(np.full(int(rec.sum()), s, dtype=np.int64))
        else:
            pending = []

    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(i_syn))):
        raise FloatingPointError("network state diverged")

    results = [[np.empty(0) for _ in range(n)] for _ in range(b)]
    if spikes_run:
        run_all = np.concatenate(spikes_run)
        neuron_all = np.concatenate(spikes_neuron)
        step_all = np.concatenate(spikes_step)
        order = np.lexsort((step_all, neuron_all, run_all))
        run_all, neuron_all, step_all = run_all[order], neuron_all[order], step_all[order]
        boundaries = np.flatnonzero(np.diff(run_all * n + neuron_all)) + 1
        starts = np.concatenate(([0], boundaries))
        ends = np.concatenate((boundaries, [len(run_all)]))
        for a, z in zip(starts, ends):
            results[run_all[a]][neuron_all[a]] = step_all[a:z] * dt
    return results


# ---------------------------------------------------------------------------
# mismatch

_MISMATCH_FIELDS = ("tau_mem", "tau_syn", "v_threshold", "base_weight")


def sample_mismatch(params: NeuronParams, mm: MismatchModel,
                    neuron_id: int) -> NeuronParams:
    """Scale tau_mem, tau_syn, v_threshold and base_weight by independent
    log-normal factors (median 1, coefficient of variation mm.cv), derived
    deterministically from (seed, neuron_id, field index)."""
    if mm.cv == 0.0:
        return params
    sigma = math.sqrt(math.log(1.0 + mm.cv ** 2))
    updates = {}
    for field_index, name in enumerate(_MISMATCH_FIELDS):
        rng = np.random.default_rng([mm.seed, neuron_id, field_index])
        factor = math.exp(sigma * rng.standard_normal())
        updates[name] = getattr(params, name) * factor
    return replace(params, **updates)


# ---------------------------------------------------------------------------
# drive / matching helpers

def regular_train(rate: float, n_spikes: int) -> np.ndarray:
    """Regular spike times 1/rate, 2/rate, ..., n/rate."""
    return np.arange(1, n_spikes + 1, dtype=np.float64) / rate


def match_following(inputs: np.ndarray, outputs: np.ndarray) -> list[int | None]:
    """Greedy nearest-following match: per input, the earliest unconsumed
    output spike after it (or None)."""
    matched: list[int | None] = []
    j = 0
    for t in inputs:
        while j < len(outputs) and outputs[j] <= t:
            j += 1
        if j < len(outputs):
            matched.append(j)
            j += 1
        else:
            matched.append(None)
    return matched


def _drive_batch(params_list, rate: float, n_eval: int, dt: float):
    """Drive every neuron (no edges) with the same regular train at its own
    base weight; returns (input times, per-neuron output arrays)."""
    n = len(params_list)
    inputs = regular_train(rate, WARMUP_SPIKES + n_eval)
    sim = SimConfig(duration=float(inputs[-1] + 0.25), dt=dt)
    neuron_idx = np.tile(np.arange(n), len(inputs))
    times = np.repeat(inputs, n)
    weights = np.array([p.base_weight for p in params_list] * len(inputs))
    outputs = simulate(params_list, [], (times, neuron_idx, weights), sim)
    return inputs, outputs


def _eval_latencies(inputs: np.ndarray, outputs: np.ndarray) -> np.ndarray | None:
    """Latencies of the post-warm-up inputs under strict one-to-one transfer,
    or None if transfer is not one-to-one."""
    matched = match_following(inputs, outputs)
    warm = matched[:WARMUP_SPIKES]
    rest = matched[WARMUP_SPIKES:]
    if any(m is None for m in rest):
        return None
    n_out_eval = len(outputs) - sum(m is not None for m in warm)
    if n_out_eval != len(rest):
        return None
    return np.array([outputs[m] - t for t, m in zip(inputs[WARMUP_SPIKES:], rest)])


def measure_latencies(params: NeuronParams, probe_rate: float = 10.0,
                      sim: SimConfig | None = None, n_eval: int = 10) -> np.ndarray:
    """Per-spike input-to-output latencies for a regular drive.

    Raises CalibrationError when the neuron is not one-to-one at this rate
    (missing outputs, or extra outputs after the warm-up spikes).
    """
    dt = sim.dt if sim is not None else 1e-4
    inputs, outputs = _drive_batch([params], probe_rate, n_eval, dt)
    lat = _eval_latencies(inputs, outputs[0])
    if lat is None:
        raise CalibrationError(
            f"neuron is not one-to-one at {probe_rate} Hz probe")
    return lat


def measure_delay(params: NeuronParams, probe_rate: float = 10.0,
                  sim: SimConfig | None = None) -> float:
    """Mean input-to-output latency at a regular probe (warm-up discarded)."""
    return float(measure_latencies(params, probe_rate, sim).mean())


@dataclass(frozen=True)
class FCurve:
    points: np.ndarray               # rows of (f_in, f_out)
    f_one_to_one_max: float | None   # largest rate with <=2% error at all rates below


def _f_one_to_one_max(points) -> float | None:
    best = None
    for f_in, f_out in points:
        if f_in == 0.0:
            continue
        if abs(f_out - f_in) <= 0.02 * f_in:
            best = f_in
        else:
            break
    return best


def measure_f_curve(params: NeuronParams, rates, sim: SimConfig | None = None,
                    window: float = 2.0) -> FCurve:
    """Output rate against input rate for regular drives.

    Each rate is probed with 5 warm-up spikes plus a `window`-long
    evaluation train; the output rate counts spikes attributable to the
    evaluation train, so one-to-one transfer reports f_out == f_in exactly.
    """
    curves = measure_f_curve_batch([params], rates, sim=sim, window=window)
    return curves[0]


def measure_f_curve_batch(params_list, rates, sim: SimConfig | None = None,
                          window: float = 2.0) -> list[FCurve]:
    dt = sim.dt if sim is not None else 1e-4
    rates = list(rates)
    if any(r < 0 for r in rates):
        raise ValueError("rates must be non-negative")
    if sorted(rates) != rates:
        raise ValueError("rates must be ascending")
    per_neuron_points = [[] for _ in params_list]
    for f in rates:
        if f == 0.0:
            for pts in per_neuron_points:
                pts.append((0.0, 0.0))
            continue
        n_eval = max(1, int(round(window * f)))
        inputs, outputs = _drive_batch(params_list, f, n_eval, dt)
        span = n_eval / f
        for k, out in enumerate(outputs):
            matched = match_following(inputs, out)
            consumed_warm = sum(m is not None for m in matched[:WARMUP_SPIKES])
            f_out = (len(out) - consumed_warm) / span
            per_neuron_points[k].append((f, f_out))
    return [FCurve(points=np.array(pts), f_one_to_one_max=_f_one_to_one_max(pts))
            for pts in per_neuron_points]


def measure_delay_batch(params_list, probe_rate: float = 10.0,
                        sim: SimConfig | None = None,
                        n_eval: int = 10) -> list[float | None]:
    """measure_delay over many neurons in one simulation; None on failure."""
    dt = sim.dt if sim is not None else 1e-4
    inputs, outputs = _drive_batch(params_list, probe_rate, n_eval, dt)
    delays = []
    for out in outputs:
        lat = _eval_latencies(inputs, out)
        delays.append(float(lat.mean()) if lat is not None else None)
    return delays


def tune_one_to_one_weight(params: NeuronParams, drive_rate: float = 10.0,
                           dt: float = 1e-4, lo: float = 1e-2, hi: float = 1e5,
                           rel_tol: float = 1e-3) -> float:
    """Bisect the smallest base_weight giving one output spike per input
    spike at `drive_rate`. The returned value is the firing boundary; callers
    apply their own safety margin on top."""

    def fires_for_every_input(w: float) -> bool:
        p = replace(params, base_weight=w)
        inputs, outputs = _drive_batch([p], drive_rate, 10, dt)
        matched = match_following(inputs, outputs[0])
        return all(m is not None for m in matched[WARMUP_SPIKES:])

    if fires_for_every_input(lo):
        raise CalibrationError("lower bracket already fires")
    if not fires_for_every_input(hi):
        raise CalibrationError("upper bracket never fires")
    while (hi - lo) / hi > rel_tol:
        mid = 0.5 * (lo + hi)
        if fires_for_every_input(mid):
            hi = mid
        else:
            lo = mid
    return hi
