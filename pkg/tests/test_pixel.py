"""Detection-chain unit tests and invariant properties.

Statistical checks run on fixed seeds, so they are deterministic: the
bounds are sized generously (several standard errors) and a failure
means behavior changed, not bad luck.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from spadsim import (
    ConfigurationError,
    PixelTrace,
    RngSeedPolicy,
    SceneConfig,
    SpadConfig,
    apply_afterpulsing,
    apply_dead_time,
    apply_jitter,
    apply_quantum_efficiency,
    sample_arrivals,
    sample_dark_counts,
    simulate_pixel,
)
from spadsim.pixel import (
    PS_PER_SECOND,
    _dead_time_filter_ps,
    quantize_timestamps,
    seconds_to_ps,
)
from spadsim.rng import (
    STAGE_AFTERPULSE,
    STAGE_ARRIVALS,
    STAGE_DARK,
    STAGE_JITTER,
    STAGE_QE,
)

EXPOSURE = 1e-3
EXPOSURE_PS = 10**9


def stream(seed=0, pixel=0, stage=0):
    return RngSeedPolicy(master_seed=seed).stream(pixel, stage)


class TestPixelTrace:
    def test_from_seconds_snaps_to_grid(self):
        trace = PixelTrace.from_seconds([0.0, 10e-9, 50e-9], exposure=EXPOSURE)
        assert trace.timestamps_ps.tolist() == [0, 10_000, 50_000]
        assert trace.exposure_ps == EXPOSURE_PS
        assert trace.count == 3
        assert trace.exposure == EXPOSURE
        np.testing.assert_array_equal(trace.seconds, [0.0, 10e-9, 50e-9])

    def test_rejects_unsorted_and_out_of_range(self):
        with pytest.raises(ConfigurationError):
            PixelTrace(np.asarray([5, 3]), 10)
        with pytest.raises(ConfigurationError):
            PixelTrace(np.asarray([-1]), 10)
        with pytest.raises(ConfigurationError):
            PixelTrace(np.asarray([11]), 10)
        # The exposure end itself is reachable (jitter clamps onto it).
        assert PixelTrace(np.asarray([10]), 10).count == 1

    def test_rejects_degenerate_exposure(self):
        with pytest.raises(ConfigurationError):
            PixelTrace(np.asarray([], dtype=np.int64), 0)


class TestSampleArrivals:
    def test_zero_flux_is_empty(self):
        assert sample_arrivals(0.0, EXPOSURE, stream()).size == 0

    def test_negative_flux_rejected(self):
        with pytest.raises(ConfigurationError):
            sample_arrivals(-1.0, EXPOSURE, stream())

    def test_sorted_within_window(self):
        times = sample_arrivals(1e6, EXPOSURE, stream(seed=3))
        assert times.size > 0
        assert np.all(np.diff(times) >= 0)
        assert times[0] >= 0.0 and times[-1] < EXPOSURE

    def test_count_matches_rate(self):
        # lambda = 5e4; 4.5 sigma window.
        times = sample_arrivals(5e7, EXPOSURE, stream(seed=11))
        assert abs(times.size - 5e4) < 4.5 * np.sqrt(5e4)

    def test_times_uniform(self):
        times = sample_arrivals(2e7, EXPOSURE, stream(seed=12))
        result = scipy_stats.kstest(times / EXPOSURE, "uniform")
        assert result.pvalue > 0.01


class TestQuantumEfficiency:
    def test_unit_q_is_identity_copy(self):
        arrivals = np.asarray([1e-9, 2e-9])
        out = apply_quantum_efficiency(arrivals, 1.0, stream())
        np.testing.assert_array_equal(out, arrivals)
        assert out is not arrivals

    def test_output_is_subset_in_order(self):
        arrivals = np.sort(stream(seed=5).random(1000)) * EXPOSURE
        kept = apply_quantum_efficiency(arrivals, 0.4, stream(seed=6))
        assert np.all(np.isin(kept, arrivals))
        assert np.all(np.diff(kept) >= 0)

    def test_retention_fraction(self):
        n = 200_000
        arrivals = np.linspace(0.0, EXPOSURE, n, endpoint=False)
        kept = apply_quantum_efficiency(arrivals, 0.3, stream(seed=7))
        # 6 sigma of a Binomial(n, 0.3) sample fraction.
        assert abs(kept.size / n - 0.3) < 6 * np.sqrt(0.3 * 0.7 / n)

    def test_invalid_q_rejected(self):
        with pytest.raises(ConfigurationError):
            apply_quantum_efficiency([1e-9], 0.0, stream())
        with pytest.raises(ConfigurationError):
            apply_quantum_efficiency([1e-9], 1.5, stream())


class TestDarkCounts:
    def test_mean_rate(self):
        policy = RngSeedPolicy(master_seed=21)
        counts = [
            sample_dark_counts(1e5, EXPOSURE, policy.stream(pixel, STAGE_DARK)).size
            for pixel in range(1000)
        ]
        # lambda = 100 per trial; the mean of 1000 trials has sigma 0.316.
        assert abs(np.mean(counts) - 100.0) < 4.5 * 0.316

    def test_zero_rate_is_empty(self):
        assert sample_dark_counts(0.0, EXPOSURE, stream()).size == 0


class TestAfterpulsing:
    def test_zero_probability_is_identity_copy(self):
        detections = np.asarray([1e-9, 2e-9])
        out = apply_afterpulsing(detections, 0.0, 50e-9, EXPOSURE, stream())
        np.testing.assert_array_equal(out, detections)
        assert out is not detections

    def test_parents_always_survive(self):
        detections = np.sort(stream(seed=8).random(500)) * EXPOSURE
        merged = apply_afterpulsing(detections, 0.9, 50e-9, EXPOSURE, stream(seed=9))
        assert np.all(np.isin(detections, merged))
        assert np.all(np.diff(merged) >= 0)
        assert merged.size >= detections.size

    def test_afterpulses_stay_inside_exposure(self):
        # Parents at the very end of the window: almost every afterpulse
        # would land past the end and must be dropped, never clamped.
        detections = np.full(1000, EXPOSURE - 1e-12)
        merged = apply_afterpulsing(detections, 0.99, 1e-4, EXPOSURE, stream(seed=10))
        assert np.all(merged < EXPOSURE)

    def test_delay_distribution_mean(self):
        # Parents at zero make added events read out their delays directly.
        parents = np.zeros(100_000)
        merged = apply_afterpulsing(parents, 0.999, 50e-9, EXPOSURE, stream(seed=13))
        delays = merged[merged > 0.0]
        assert delays.size > 90_000
        # Exponential with mean 25 ns; 6 sigma on the sample mean.
        assert abs(delays.mean() - 25e-9) < 6 * 25e-9 / np.sqrt(delays.size)

    def test_fraction_added(self):
        parents = np.linspace(0, EXPOSURE / 2, 100_000, endpoint=False)
        merged = apply_afterpulsing(parents, 0.25, 50e-9, EXPOSURE, stream(seed=14))
        added = merged.size - parents.size
        assert abs(added / parents.size - 0.25) < 6 * np.sqrt(0.25 * 0.75 / parents.size)


class TestQuantization:
    def test_rounds_half_to_even(self):
        out = quantize_timestamps(np.asarray([0.5e-12, 1.5e-12, 2.5e-12]), 10)
        assert out.tolist() == [0, 2, 2]

    def test_clips_at_exposure_end(self):
        out = quantize_timestamps(np.asarray([0.0, 1e-3 - 0.4e-12, 1e-3]), EXPOSURE_PS)
        assert out.tolist() == [0, EXPOSURE_PS - 1, EXPOSURE_PS - 1]

    def test_seconds_to_ps(self):
        assert seconds_to_ps(50e-9) == 50_000
        assert seconds_to_ps(1e-3) == EXPOSURE_PS
        assert seconds_to_ps(0.5e-12) == 0  # half to even


class TestDeadTime:
    def test_basic_example(self):
        # tau = 50 ns: 10 ns and 70 ns fall in the shadow of an accepted event.
        out = apply_dead_time([0.0, 10e-9, 60e-9, 70e-9, 130e-9], 50e-9)
        assert out.tolist() == [0.0, 60e-9, 130e-9]

    def test_spaced_input_unchanged(self):
        events = np.arange(20) * 50e-9
        out = apply_dead_time(events, 50e-9)
        assert out.size == events.size
        np.testing.assert_array_equal(
            np.rint(out * PS_PER_SECOND), np.arange(20) * 50_000
        )

    def test_float_grid_hazard(self):
        # Multiples of float 1e-9 accumulate ulp error: in pure float64
        # roughly a third of the 50-step gaps land one ulp below 50e-9 and
        # get rejected. On the ps grid every 50th event must survive.
        events = np.arange(1000) * 1e-9
        out = apply_dead_time(events, 50e-9)
        assert out.size == 20
        np.testing.assert_array_equal(np.rint(out * PS_PER_SECOND), np.arange(20) * 50_000)

    def test_empty_and_single(self):
        assert apply_dead_time([], 50e-9).size == 0
        assert apply_dead_time([1e-9], 50e-9).tolist() == [1e-9]

    def test_negative_dead_time_rejected(self):
        with pytest.raises(ConfigurationError):
            apply_dead_time([1e-9], -1e-9)

    def test_result_lies_on_grid(self):
        # 0.3 ps rounds onto tick 0; 60.2 ns stays at tick 60200 (the grid
        # is 1 ps — the dead time only gates acceptance, it never snaps).
        out = apply_dead_time([0.3e-12, 60.2e-9], 50e-9)
        assert out.tolist() == [0.0, 60200 / PS_PER_SECOND]

    @given(
        times=st.lists(
            st.floats(min_value=0.0, max_value=EXPOSURE, exclude_max=True, allow_nan=False),
            max_size=200,
        ),
        dead_time_ns=st.sampled_from([1, 7, 50, 333, 10_000]),
    )
    @settings(deadline=None, max_examples=200)
    def test_gap_invariant(self, times, dead_time_ns):
        dead_time = dead_time_ns * 1e-9
        out = apply_dead_time(np.sort(np.asarray(times)), dead_time)
        out_ps = np.rint(out * PS_PER_SECOND).astype(np.int64)
        if out_ps.size > 1:
            assert np.min(np.diff(out_ps)) >= dead_time_ns * 1000
        if times:
            # First event always survives, modulo grid snap.
            assert out_ps[0] == np.rint(min(times) * PS_PER_SECOND)

    def test_filter_keeps_first_of_each_shadow(self):
        events = np.asarray([0, 10, 49_999, 50_000, 99_999, 100_000], dtype=np.int64)
        out = _dead_time_filter_ps(events, 50_000)
        assert out.tolist() == [0, 50_000, 100_000]


class TestJitter:
    def test_zero_sigma_is_identity_copy(self):
        events = np.asarray([1e-9, 2e-9])
        out = apply_jitter(events, 0.0, EXPOSURE, stream())
        np.testing.assert_array_equal(out, events)
        assert out is not events

    def test_negative_sigma_rejected(self):
        with pytest.raises(ConfigurationError):
            apply_jitter([1e-9], -1.0, EXPOSURE, stream())

    def test_count_preserved_sorted_clamped(self):
        events = np.sort(stream(seed=15).random(5000)) * EXPOSURE
        out = apply_jitter(events, 200e-12, EXPOSURE, stream(seed=16))
        assert out.size == events.size
        assert np.all(np.diff(out) >= 0)
        assert out[0] >= 0.0 and out[-1] <= EXPOSURE

    def test_boundary_clamping(self):
        # Events pinned to the window edges with huge jitter: results must
        # clamp to [0, exposure], never wrap or escape.
        events = np.asarray([0.0, EXPOSURE])
        for seed in range(20):
            out = apply_jitter(events, 1e-3, EXPOSURE, stream(seed=seed, stage=STAGE_JITTER))
            assert np.all(out >= 0.0) and np.all(out <= EXPOSURE)

    def test_perturbation_scale(self):
        events = np.full(100_000, EXPOSURE / 2)
        out = apply_jitter(events, 200e-12, EXPOSURE, stream(seed=17))
        deltas = out - EXPOSURE / 2
        assert abs(deltas.std() - 200e-12) < 6 * 200e-12 / np.sqrt(2 * deltas.size)
        assert abs(deltas.mean()) < 6 * 200e-12 / np.sqrt(deltas.size)

    @given(seed=st.integers(min_value=0, max_value=2**32))
    @settings(deadline=None, max_examples=50)
    def test_jitter_bounds_property(self, seed):
        rng = np.random.default_rng(seed)
        events = np.sort(rng.random(50)) * EXPOSURE
        out = apply_jitter(events, 5e-5, EXPOSURE, np.random.default_rng(seed + 1))
        assert out.size == events.size
        assert np.all(np.diff(out) >= 0)
        assert np.all((out >= 0.0) & (out <= EXPOSURE))


class TestSimulatePixel:
    """The chain of public stage ops equals the fused pixel kernel."""

    def manual_chain(self, flux, config, scene, policy, pixel):
        arrivals = sample_arrivals(flux, scene.exposure, policy.stream(pixel, STAGE_ARRIVALS))
        detected = apply_quantum_efficiency(
            arrivals, config.quantum_efficiency, policy.stream(pixel, STAGE_QE)
        )
        dark = sample_dark_counts(
            config.dark_count_rate, scene.exposure, policy.stream(pixel, STAGE_DARK)
        )
        merged = np.concatenate((detected, dark))
        merged.sort()
        merged = apply_afterpulsing(
            merged, config.afterpulse_prob, config.dead_time, scene.exposure,
            policy.stream(pixel, STAGE_AFTERPULSE),
        )
        pre = apply_dead_time(merged, config.dead_time)
        post = apply_jitter(
            pre, config.jitter_sigma, scene.exposure, policy.stream(pixel, STAGE_JITTER)
        )
        return pre, post

    @pytest.mark.parametrize("seed,flux", [(0, 5e5), (1, 1e3), (2, 0.0), (3, 5e7)])
    def test_matches_manual_composition(self, seed, flux, default_config):
        scene = SceneConfig(reference_lux=1.0)
        policy = RngSeedPolicy(master_seed=seed, image_key=9)
        result = simulate_pixel(flux, default_config, scene, policy, pixel_index=4)
        pre, post = self.manual_chain(flux, default_config, scene, policy, 4)
        np.testing.assert_array_equal(
            result.pre_jitter.timestamps_ps, np.rint(pre * PS_PER_SECOND).astype(np.int64)
        )
        np.testing.assert_array_equal(
            result.trace.timestamps_ps, np.rint(post * PS_PER_SECOND).astype(np.int64)
        )

    def test_unit_q_matches_manual_composition(self):
        # q == 1 takes the stream-skipping fast path inside the kernel.
        config = SpadConfig(quantum_efficiency=1.0)
        scene = SceneConfig(reference_lux=1.0)
        policy = RngSeedPolicy(master_seed=5)
        result = simulate_pixel(2e5, config, scene, policy)
        pre, post = self.manual_chain(2e5, config, scene, policy, 0)
        np.testing.assert_array_equal(
            result.trace.timestamps_ps, np.rint(post * PS_PER_SECOND).astype(np.int64)
        )

    def test_dead_time_invariants_hold_pre_jitter(self, default_config):
        scene = SceneConfig(reference_lux=1.0)
        policy = RngSeedPolicy(master_seed=33)
        for pixel in range(50):
            result = simulate_pixel(5e6, default_config, scene, policy, pixel_index=pixel)
            gaps = np.diff(result.pre_jitter.timestamps_ps)
            if gaps.size:
                assert int(gaps.min()) >= 50_000
            assert result.pre_jitter.count <= 20_000
            assert result.trace.count == result.pre_jitter.count

    def test_count_cap_under_extreme_flux(self, default_config):
        scene = SceneConfig(reference_lux=1.0)
        policy = RngSeedPolicy(master_seed=34)
        result = simulate_pixel(1e11, default_config, scene, policy)
        assert result.pre_jitter.count <= 20_000
        # At 1e11 photons/s the detector is fully saturated: nearly one
        # detection per dead-time window.
        assert result.pre_jitter.count > 19_000

    def test_dark_only_pixel(self, default_config):
        scene = SceneConfig(reference_lux=1.0)
        policy = RngSeedPolicy(master_seed=35)
        counts = [
            simulate_pixel(0.0, default_config, scene, policy, pixel_index=p).trace.count
            for p in range(500)
        ]
        # DCR 100 Hz over 1 ms -> 0.1 expected detections per pixel.
        assert abs(np.mean(counts) - 0.1) < 4.5 * np.sqrt(0.1 / 500)

    def test_silent_pixel_is_empty(self):
        config = SpadConfig(dark_count_rate=0.0)
        scene = SceneConfig(reference_lux=1.0)
        result = simulate_pixel(0.0, config, scene, RngSeedPolicy(master_seed=36))
        assert result.trace.count == 0
        assert result.pre_jitter.count == 0
