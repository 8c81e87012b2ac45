import math
from dataclasses import replace

import numpy as np
import pytest

from delaychain.errors import CalibrationError
from delaychain.neuro import (DELAY_NEURON, OUTPUT_NEURON, MismatchModel, NeuronParams,
                              NeuronState, SimConfig, measure_delay, measure_f_curve,
                              measure_latencies, regular_train, sample_mismatch,
                              simulate, step_neuron, tune_one_to_one_weight)


class TestStepNeuron:
    def test_rest_state_stays_at_rest(self):
        st = NeuronState()
        for _ in range(1000):
            st, fired = step_neuron(st, 0.0, DELAY_NEURON, 1e-4)
            assert not fired
        assert st.v == 0.0 and st.i == 0.0

    def test_subthreshold_decays_back(self):
        st = NeuronState()
        st, fired = step_neuron(st, DELAY_NEURON.base_weight * 0.3, DELAY_NEURON, 1e-4)
        assert not fired
        peak = 0.0
        for _ in range(3000):
            st, fired = step_neuron(st, 0.0, DELAY_NEURON, 1e-4)
            assert not fired
            peak = max(peak, st.v)
        assert 0.0 < peak < DELAY_NEURON.v_threshold
        assert st.v < 0.05 * peak

    def test_matches_vectorized_kernel_bitwise(self):
        rng = np.random.default_rng(0)
        spikes = np.sort(rng.uniform(0.0, 0.5, 12))
        sim = SimConfig(duration=0.7)
        out = simulate([DELAY_NEURON], [], (spikes, np.zeros(12, dtype=int),
                                            np.full(12, DELAY_NEURON.base_weight)), sim)[0]
        steps_in = {int(np.floor(t / sim.dt)) + 1: DELAY_NEURON.base_weight
                    for t in spikes}
        st = NeuronState()
        fires = []
        for s in range(1, sim.steps + 1):
            st, fired = step_neuron(st, steps_in.get(s, 0.0), DELAY_NEURON, sim.dt)
            if fired:
                fires.append(s * sim.dt)
        np.testing.assert_array_equal(out, np.array(fires))


class TestDefaultDelayNeuron:
    def test_delay_in_band(self):
        d = measure_delay(DELAY_NEURON, 10.0)
        assert 0.015 <= d <= 0.035

    def test_latency_stationarity(self):
        lat = measure_latencies(DELAY_NEURON, 10.0)
        assert lat.std() < 0.10 * lat.mean()

    def test_one_to_one_band_and_saturation(self):
        fc = measure_f_curve(DELAY_NEURON, [1, 5, 10, 20, 50])
        points = dict(fc.points)
        for f in (1.0, 5.0, 10.0, 20.0):
            assert points[f] == f
        assert points[50.0] < 50.0 * 0.98
        assert fc.f_one_to_one_max >= 20.0

    def test_zero_rate_is_zero(self):
        fc = measure_f_curve(DELAY_NEURON, [0, 10])
        assert fc.points[0].tolist() == [0.0, 0.0]

    def test_unreachable_threshold_fails_calibration(self):
        dead = replace(DELAY_NEURON, v_threshold=1e9)
        with pytest.raises(CalibrationError):
            measure_delay(dead, 10.0)

    def test_dt_halving_changes_delay_under_2_percent(self):
        d1 = measure_delay(DELAY_NEURON, 10.0, sim=SimConfig(duration=2.0, dt=1e-4))
        d2 = measure_delay(DELAY_NEURON, 10.0, sim=SimConfig(duration=2.0, dt=5e-5))
        assert abs(d2 - d1) / d1 < 0.02

    def test_output_neuron_is_fast(self):
        d = measure_delay(OUTPUT_NEURON, 20.0)
        assert d < 0.005

    def test_tuned_weight_matches_frozen_default(self):
        base = replace(DELAY_NEURON, base_weight=1.0)
        w_star = tune_one_to_one_weight(base, 10.0)
        assert DELAY_NEURON.base_weight == pytest.approx(1.03 * w_star, rel=0.01)


class TestDeterminism:
    def test_identical_runs_bit_identical(self):
        rng = np.random.default_rng(5)
        spikes = np.sort(rng.uniform(0, 1.0, 30))
        ev = (spikes, np.zeros(30, dtype=int), np.full(30, DELAY_NEURON.base_weight))
        sim = SimConfig(duration=1.3)
        a = simulate([DELAY_NEURON], [], ev, sim)[0]
        b = simulate([DELAY_NEURON], [], ev, sim)[0]
        np.testing.assert_array_equal(a, b)

    def test_batching_never_changes_results(self):
        rng = np.random.default_rng(6)
        sets = []
        for _ in range(4):
            spikes = np.sort(rng.uniform(0, 0.8, 15))
            sets.append((spikes, np.zeros(15, dtype=int),
                         np.full(15, DELAY_NEURON.base_weight)))
        sim = SimConfig(duration=1.0)
        from delaychain.neuro import simulate_batch
        together = simulate_batch([DELAY_NEURON], [], sets, sim)
        for k, ev in enumerate(sets):
            alone = simulate([DELAY_NEURON], [], ev, sim)
            np.testing.assert_array_equal(together[k][0], alone[0])


class TestMismatch:
    def test_cv_zero_is_identity(self):
        assert sample_mismatch(DELAY_NEURON, MismatchModel(cv=0.0, seed=3), 7) is DELAY_NEURON

    def test_deterministic_per_id(self):
        mm = MismatchModel(cv=0.2, seed=12)
        a = sample_mismatch(DELAY_NEURON, mm, 42)
        b = sample_mismatch(DELAY_NEURON, mm, 42)
        assert a == b
        c = sample_mismatch(DELAY_NEURON, mm, 43)
        assert c != a

    def test_only_documented_fields_vary(self):
        p = sample_mismatch(DELAY_NEURON, MismatchModel(cv=0.3, seed=0), 5)
        assert p.v_reset == DELAY_NEURON.v_reset
        assert p.refractory == DELAY_NEURON.refractory

    def test_empirical_cv(self):
        mm = MismatchModel(cv=0.2, seed=0)
        draws = np.array([sample_mismatch(DELAY_NEURON, mm, i).tau_mem
                          for i in range(10_000)])
        cv = draws.std() / draws.mean()
        assert abs(cv - 0.2) < 0.02

    def test_median_close_to_nominal(self):
        mm = MismatchModel(cv=0.2, seed=1)
        draws = np.array([sample_mismatch(DELAY_NEURON, mm, i).v_threshold
                          for i in range(10_000)])
        assert np.median(draws) == pytest.approx(DELAY_NEURON.v_threshold, rel=0.02)


class TestHelpers:
    def test_regular_train(self):
        np.testing.assert_allclose(regular_train(10.0, 3), [0.1, 0.2, 0.3])

    def test_params_validation(self):
        with pytest.raises(ValueError):
            NeuronParams(tau_mem=-1, tau_syn=0.01, v_threshold=1, v_reset=0,
                         refractory=0.001, base_weight=1)
        with pytest.raises(ValueError):
            NeuronParams(tau_mem=0.01, tau_syn=0.01, v_threshold=0, v_reset=0,
                         refractory=0.001, base_weight=1)

    def test_sim_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(duration=1.0, dt=0.01)
        with pytest.raises(ValueError):
            SimConfig(duration=-1.0)
