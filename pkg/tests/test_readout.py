import numpy as np
import pytest

from delaychain import chain
from delaychain.adm import SpikeTrain, encode_bank
from delaychain.chain import build_network
from delaychain.dataio import make_synthetic
from delaychain.neuro import SimConfig
from delaychain.readout import (FeatureVector, RateSchedule, auto_schedule,
                                extract_features, profile_history_correlation,
                                rate_in_window, read_features_csv, spatial_profile,
                                write_features_csv)
from test_chain import record


def tiny_net(steps=1):
    records = [record(i, 0.016) for i in range(2 * steps)]
    assignment = np.arange(2 * steps).reshape(2, steps)
    return build_network(assignment, records, thresholds=(0.1,))


class TestRateInWindow:
    def test_three_spikes_in_30ms(self):
        train = SpikeTrain("x", np.array([0.98, 0.99, 1.0]))
        assert rate_in_window(train, 1.0, 0.03) == pytest.approx(100.0)

    def test_empty_train(self):
        assert rate_in_window(SpikeTrain("x", np.array([])), 1.0, 0.03) == 0.0

    def test_window_boundaries(self):
        train = SpikeTrain("x", np.array([0.97, 0.975, 1.0]))
        # (0.97, 1.0]: spike exactly at t_end-window excluded, at t_end included
        assert rate_in_window(train, 1.0, 0.03) == pytest.approx(2 / 0.03)

    def test_poisson_rate_statistics(self):
        rng = np.random.default_rng(0)
        rates = []
        for _ in range(100):
            times = np.cumsum(rng.exponential(1 / 50.0, 200))
            train = SpikeTrain("p", times[times <= 2.0])
            rates.append(rate_in_window(train, 1.5, 1.0))
        assert abs(np.mean(rates) - 50.0) < 15.0

    def test_additive_over_merged_channels(self):
        rng = np.random.default_rng(1)
        a = np.sort(rng.uniform(0, 1, 40))
        b = np.sort(rng.uniform(0, 1, 25))
        merged = np.sort(np.concatenate([a, b]))
        ra = rate_in_window(SpikeTrain("a", a), 1.0, 0.5)
        rb = rate_in_window(SpikeTrain("b", b), 1.0, 0.5)
        rm = rate_in_window(SpikeTrain("m", merged), 1.0, 0.5)
        assert rm == pytest.approx(ra + rb)


class TestExtractFeatures:
    def test_feature_length_default_shape(self, calibrated):
        _, _, _, net = calibrated
        outputs = {nid: SpikeTrain(str(nid), np.array([]))
                   for nid in net.output_ids + net.delay_ids}
        fv = extract_features(outputs, net, RateSchedule())
        assert len(fv) == 2 * 15 * 3
        assert np.all(fv.values == 0.0)

    def test_down_block_before_up_block(self):
        net = tiny_net(steps=1)
        up_id = net.output_up[0]
        down_id = net.output_down[0]
        outputs = {up_id: SpikeTrain("u", np.array([0.08, 0.09, 0.10])),
                   down_id: SpikeTrain("d", np.array([]))}
        fv = extract_features(outputs, net,
                              RateSchedule(window=0.03, snapshot_times=(0.1,)))
        assert fv.values == pytest.approx([0.0, 100.0])

    def test_missing_output_train(self):
        net = tiny_net(steps=1)
        with pytest.raises(KeyError):
            extract_features({}, net, RateSchedule(window=0.03, snapshot_times=(0.1,)))

    def test_time_translation_consistency(self, calibrated):
        _, _, _, net = calibrated
        rng = np.random.default_rng(2)
        base = {nid: np.sort(rng.uniform(0, 1.4, rng.integers(0, 25)))
                for nid in net.output_ids}
        delta = 0.173
        sched = RateSchedule()
        shifted_sched = RateSchedule(
            window=sched.window,
            snapshot_times=tuple(t + delta for t in sched.snapshot_times))
        a = extract_features({n: SpikeTrain(str(n), t) for n, t in base.items()},
                             net, sched)
        b = extract_features({n: SpikeTrain(str(n), t + delta) for n, t in base.items()},
                             net, shifted_sched)
        np.testing.assert_allclose(a.values, b.values)

    def test_roundtrip_csv(self, tmp_path):
        rng = np.random.default_rng(3)
        fvs = [FeatureVector(values=rng.uniform(0, 200, 90).round(3), label=k % 2)
               for k in range(7)]
        p = tmp_path / "features.csv"
        write_features_csv(fvs, p)
        back = read_features_csv(p)
        for a, b in zip(fvs, back):
            assert a.label == b.label
            np.testing.assert_allclose(a.values, b.values, rtol=1e-8)


class TestSchedules:
    def test_auto_schedule_multiples(self):
        sched = auto_schedule(0.15, 3)
        assert sched.snapshot_times == pytest.approx((0.15, 0.30, 0.45))

    def test_validation(self):
        with pytest.raises(ValueError):
            RateSchedule(window=-0.1)
        with pytest.raises(ValueError):
            RateSchedule(snapshot_times=(0.2, 0.1))


class TestSpatialProfile:
    def test_silent_network_zero_profiles(self, calibrated):
        _, _, _, net = calibrated
        outputs = {nid: SpikeTrain(str(nid), np.array([])) for nid in net.output_ids}
        down, up = spatial_profile(outputs, net, 0.5)
        assert np.all(down == 0) and np.all(up == 0)

    def test_burst_reaches_chain_end_after_span(self, calibrated):
        records, _, report, net = calibrated
        burst = SpikeTrain("0-UP", np.array([0.01, 0.06, 0.11, 0.16]))
        trains = [burst if c == "0-UP" else SpikeTrain(c, np.array([]))
                  for c in net.channels]
        sim = SimConfig(duration=report.memory_span + 0.4)
        out = chain.run_network(net, trains, sim)
        step_delay = report.memory_span / net.steps
        t = report.memory_span + step_delay + 0.02
        down, up = spatial_profile(out, net, t, window=0.1)
        # by t = span the burst has propagated deep into the chain
        assert up[len(up) // 2:].sum() > 0
        assert down.sum() == 0

    def test_heartbeat_profile_tracks_input_history(self, calibrated):
        records, _, report, net = calibrated
        beat = make_synthetic(30, seed=21).signals[4]
        trains = encode_bank(beat)
        out = chain.run_network(net, trains, SimConfig(duration=beat.duration + 0.3))
        span = report.memory_span
        step_delay = span / net.steps
        # evaluate where the chain holds the densest part of the beat
        from delaychain.readout import densest_history_time
        t = densest_history_time(trains, span, span + step_delay, beat.duration + 0.2)
        corr = profile_history_correlation(out, trains, net, t, step_delay, window=0.05)
        assert corr > 0.5
