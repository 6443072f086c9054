import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from moeload import (
    InvalidConfig,
    ProportionSeries,
    SeriesTooShort,
    StateTimeline,
    SynthConfig,
    WindowConfig,
    detect_state,
    generate_trace,
    layer_window_stats,
    to_proportions,
    window_range,
    window_variance,
)


def naive_variance(x, w, stride=1):
    return np.array([np.var(x[s : s + w]) for s in range(0, len(x) - w + 1, stride)])


def naive_range(x, w, stride=1):
    return np.array([np.ptp(x[s : s + w]) for s in range(0, len(x) - w + 1, stride)])


class TestAgainstNaiveOracle:
    @pytest.mark.parametrize("w", [2, 3, 10, 100])
    @pytest.mark.parametrize("stride", [1, 3, 100])
    def test_variance_matches(self, w, stride):
        rng = np.random.default_rng(w * 1000 + stride)
        x = rng.random(777)
        cfg = WindowConfig(w, stride)
        got = window_variance(x, cfg)
        want = naive_variance(x, w, stride)
        assert got.shape == want.shape
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("w", [2, 3, 10, 100])
    @pytest.mark.parametrize("stride", [1, 3, 100])
    def test_range_matches_exactly(self, w, stride):
        rng = np.random.default_rng(w * 2000 + stride)
        x = rng.random(777)
        got = window_range(x, WindowConfig(w, stride))
        np.testing.assert_array_equal(got, naive_range(x, w, stride))

    def test_range_exact_on_adversarial_plateaus(self):
        # repeated values stress the deque eviction logic
        x = np.repeat([0.25, 0.75, 0.25, 0.5, 0.75], 7).astype(np.float64)
        got = window_range(x, WindowConfig(6, 2))
        np.testing.assert_array_equal(got, naive_range(x, 6, 2))

    def test_window_count(self):
        x = np.arange(10, dtype=np.float64)
        assert window_variance(x, WindowConfig(4)).size == 7
        assert window_variance(x, WindowConfig(4, stride=3)).size == 3
        assert window_range(x, WindowConfig(10)).size == 1

    def test_short_series_rejected(self):
        with pytest.raises(SeriesTooShort):
            window_variance(np.zeros(5), WindowConfig(6))
        with pytest.raises(SeriesTooShort):
            window_range(np.zeros(5), WindowConfig(6))

    def test_bad_config_rejected(self):
        with pytest.raises(InvalidConfig):
            WindowConfig(1)
        with pytest.raises(InvalidConfig):
            WindowConfig(5, stride=0)


window_arrays = hnp.arrays(
    np.float64,
    st.integers(2, 60),
    elements=st.floats(0.0, 1.0, allow_nan=False, width=64),
)


class TestWindowLaws:
    @settings(max_examples=300, deadline=None)
    @given(x=window_arrays)
    def test_popoviciu_bound(self, x):
        cfg = WindowConfig(x.size)
        var = window_variance(x, cfg)[0]
        rng = window_range(x, cfg)[0]
        assert var >= 0
        assert var <= rng * rng / 4 + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(x=window_arrays, shift=st.floats(-5, 5, allow_nan=False))
    def test_shift_invariance(self, x, shift):
        cfg = WindowConfig(x.size)
        assert abs(window_variance(x + shift, cfg)[0]
                   - window_variance(x, cfg)[0]) < 1e-12
        assert abs(window_range(x + shift, cfg)[0]
                   - window_range(x, cfg)[0]) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(x=window_arrays, scale=st.floats(-3, 3, allow_nan=False))
    def test_scale_equivariance(self, x, scale):
        cfg = WindowConfig(x.size)
        assert abs(window_variance(scale * x, cfg)[0]
                   - scale * scale * window_variance(x, cfg)[0]) < 1e-9
        assert abs(window_range(scale * x, cfg)[0]
                   - abs(scale) * window_range(x, cfg)[0]) < 1e-12

    def test_constant_window_is_zero(self):
        x = np.full(50, 0.125)
        cfg = WindowConfig(10)
        assert (window_variance(x, cfg) == 0).all()
        assert (window_range(x, cfg) == 0).all()


class TestLayerStats:
    def test_per_expert_columns(self):
        rng = np.random.default_rng(0)
        raw = rng.random((120, 4))
        props = ProportionSeries(7, raw / raw.sum(axis=1, keepdims=True))
        stats = layer_window_stats(props, WindowConfig(30, stride=10))
        assert stats.layer_id == 7
        assert stats.variance.shape == stats.range.shape == (10, 4)
        np.testing.assert_array_equal(stats.start_iterations, np.arange(0, 91, 10))
        for j in range(4):
            np.testing.assert_allclose(
                stats.variance[:, j], naive_variance(props.values[:, j], 30, 10),
                rtol=0, atol=1e-12)
            np.testing.assert_array_equal(
                stats.range[:, j], naive_range(props.values[:, j], 30, 10))

    def test_sixteen_expert_layer_gives_sixteen_columns(self):
        cfg = SynthConfig(num_layers=1, experts_per_layer=16,
                          tokens_per_iteration=65536, num_iterations=400, seed=1)
        props = to_proportions(generate_trace(cfg), 0)
        stats = layer_window_stats(props, WindowConfig(100))
        assert stats.variance.shape[1] == 16


def block_series(block_ranges, w=20, e=4):
    """Proportion rows whose per-block range is controlled exactly.

    Each block oscillates +/- amplitude/2 around 1/e on expert 0, mirrored
    on expert 1, so every expert's in-block range equals the requested value.
    """
    rows = []
    for amp in block_ranges:
        for i in range(w):
            delta = (amp / 2) if i % 2 == 0 else (-amp / 2)
            row = np.full(e, 1.0 / e)
            row[0] += delta
            row[1] -= delta
            rows.append(row)
    return ProportionSeries(0, np.array(rows))


class TestStateDetector:
    def test_uniform_trace_stabilizes_at_w_times_c(self):
        props = block_series([0.0] * 8)
        tl = detect_state(props, w=20, tau_rho=0.5, consec_C=5)
        assert tl.transition_iteration == 100
        assert list(tl.labels[:100]) == ["transient"] * 100
        assert list(tl.labels[100:]) == ["stable"] * 60

    def test_loud_blocks_postpone_the_run(self):
        # threshold is tau_rho / e = 0.125; block 2 is loud, so the first
        # 5-quiet run is blocks 3..7 and stability starts at 8 * 20 = 160
        amps = [0.0, 0.0, 0.2, 0.01, 0.01, 0.01, 0.01, 0.01, 0.0]
        tl = detect_state(block_series(amps), w=20, tau_rho=0.5, consec_C=5)
        assert tl.transition_iteration == 160

    def test_never_quiet_gives_none(self):
        tl = detect_state(block_series([0.2] * 8), w=20, tau_rho=0.5, consec_C=5)
        assert tl.transition_iteration is None
        assert not tl.stable_mask().any()

    def test_boundary_equal_range_is_not_quiet(self):
        # in-block range exactly at the threshold must not count as quiet
        amps = [0.125] * 5
        tl = detect_state(block_series(amps), w=20, tau_rho=0.5, consec_C=5)
        assert tl.transition_iteration is None

    def test_run_ending_at_series_end(self):
        tl = detect_state(block_series([0.0] * 5), w=20, tau_rho=0.5, consec_C=5)
        assert tl.transition_iteration == 100
        assert not tl.stable_mask().any()  # stability starts just past the data

    def test_partial_trailing_block_is_ignored(self):
        props = block_series([0.0] * 6)
        clipped = ProportionSeries(0, props.values[:110])  # 5.5 blocks
        tl = detect_state(clipped, w=20, tau_rho=0.5, consec_C=5)
        assert tl.transition_iteration == 100

    def test_too_short_series_rejected(self):
        with pytest.raises(SeriesTooShort):
            detect_state(block_series([0.0] * 4), w=20, tau_rho=0.5, consec_C=5)

    def test_labels_never_revert(self):
        cfg = SynthConfig(num_layers=1, experts_per_layer=8,
                          tokens_per_iteration=32768, num_iterations=1500,
                          sigma0=0.1, sigma_inf=0.001, decay_T=200.0, seed=5)
        tl = detect_state(to_proportions(generate_trace(cfg), 0), w=100)
        labels = tl.labels
        seen_stable = False
        for lab in labels:
            if lab == "stable":
                seen_stable = True
            assert not (seen_stable and lab == "transient")

    def test_timeline_validation(self):
        with pytest.raises(InvalidConfig):
            StateTimeline(0, np.array(["stable", "transient"]), 0)
        with pytest.raises(InvalidConfig):
            StateTimeline(0, np.array(["transient", "stable"]), 0)  # wrong index
