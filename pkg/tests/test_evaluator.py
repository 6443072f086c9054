import numpy as np
import pytest

from moeload import (
    CoverageMismatch,
    EvalConfig,
    InvalidConfig,
    LengthMismatch,
    LoadTrace,
    StateTimeline,
    SwAvgConfig,
    TraceTooShort,
    blocked_eval,
    error_rate,
    sampling_error_floor,
    sliding_eval,
    state_conditioned_summary,
)


def constant_trace(n=400, layers=1, e=4, n_token=400):
    row = np.full(e, n_token // e, dtype=np.int64)
    counts = np.tile(row, (n, layers, 1))
    return LoadTrace.from_counts(counts, range(layers), n_token)


def noisy_trace(n=600, layers=2, e=4, n_token=4000, seed=0):
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n_token, np.full(e, 1.0 / e), size=(n, layers))
    return LoadTrace.from_counts(counts.astype(np.int64), range(layers), n_token)


class TestErrorRate:
    def test_mean_relative_known_value(self):
        got = error_rate([0.3, 0.7], [0.25, 0.75], "mean_relative")
        assert abs(got - 0.5 * (0.05 / 0.25 + 0.05 / 0.75)) < 1e-15

    def test_epsilon_floors_tiny_denominators(self):
        got = error_rate([0.5, 0.5], [1.0, 0.0], "mean_relative", epsilon=0.01)
        assert abs(got - 0.5 * (0.5 / 1.0 + 0.5 / 0.01)) < 1e-12

    def test_total_variation_known_value(self):
        got = error_rate([0.3, 0.7], [0.25, 0.75], "total_variation")
        assert abs(got - 0.05) < 1e-15

    def test_total_variation_bounds(self):
        assert error_rate([1.0, 0.0], [0.0, 1.0], "total_variation") == 1.0
        assert error_rate([0.5, 0.5], [0.5, 0.5], "total_variation") == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(LengthMismatch):
            error_rate([0.5, 0.5], [1.0], "mean_relative")


class TestSamplingFloor:
    def test_formula(self):
        p, n_tok, k, w = 1.0 / 128, 262144, 1000, 250
        k_eff = 1.0 / (1.0 / k + 1.0 / w)
        want = np.sqrt((1 - p) / (p * n_tok * k_eff))
        assert abs(sampling_error_floor(p, n_tok, k, w) - want) < 1e-15

    def test_more_averaging_lowers_the_floor(self):
        a = sampling_error_floor(0.01, 10000, 1000, 100)
        b = sampling_error_floor(0.01, 10000, 2000, 200)
        assert b < a

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            sampling_error_floor(0.0, 1000, 10, 10)
        with pytest.raises(InvalidConfig):
            sampling_error_floor(0.5, 0, 10, 10)


class TestProtocols:
    def test_blocked_origin_layout(self):
        trace = noisy_trace(n=1000)
        cfg = EvalConfig(horizon=100, mode="blocked")
        report = blocked_eval(None, trace, "sw_avg", cfg, SwAvgConfig(window=50))
        # (1000 - 100) // 100 = 9 scored blocks starting at 100, 200, ...
        np.testing.assert_array_equal(report.origins, np.arange(100, 1000, 100))
        assert report.errors.shape == (9, 2)

    def test_sliding_origin_layout(self):
        trace = noisy_trace(n=300, layers=1)
        cfg = EvalConfig(horizon=50, mode="sliding", stride=25)
        report = sliding_eval(None, trace, "sw_avg", cfg, SwAvgConfig(window=100))
        np.testing.assert_array_equal(report.origins, np.arange(100, 251, 25))

    def test_oracle_scores_zero(self):
        trace = noisy_trace(n=500, layers=1)
        cfg = EvalConfig(horizon=100, mode="blocked")
        report = blocked_eval(None, trace, "oracle", cfg)
        assert report.errors.max() == 0.0
        assert report.alt_errors.max() == 0.0

    def test_sw_avg_on_constant_trace_scores_zero(self):
        trace = constant_trace()
        cfg = EvalConfig(horizon=100, mode="blocked")
        report = blocked_eval(None, trace, "sw_avg", cfg, SwAvgConfig(window=50))
        assert report.errors.max() == 0.0

    def test_both_metrics_are_scored(self):
        trace = noisy_trace(n=500, layers=1, seed=3)
        cfg = EvalConfig(horizon=100, mode="blocked", metric="mean_relative")
        report = blocked_eval(None, trace, "sw_avg", cfg, SwAvgConfig(window=50))
        assert report.metric == "mean_relative"
        assert report.alt_metric == "total_variation"
        assert report.alt_overall_mean > 0
        swapped = EvalConfig(horizon=100, mode="blocked", metric="total_variation")
        report2 = blocked_eval(None, trace, "sw_avg", swapped, SwAvgConfig(window=50))
        np.testing.assert_allclose(report2.errors, report.alt_errors, rtol=0, atol=0)

    def test_stepwise_differs_from_block_mean(self):
        trace = noisy_trace(n=500, layers=1, seed=5)
        base = dict(horizon=100, mode="blocked")
        mean_rep = blocked_eval(None, trace, "sw_avg",
                                EvalConfig(**base), SwAvgConfig(window=50))
        step_rep = blocked_eval(None, trace, "sw_avg",
                                EvalConfig(**base, stepwise=True), SwAvgConfig(window=50))
        # per-step scoring keeps the sampling noise that block means cancel
        assert step_rep.overall_mean > mean_rep.overall_mean

    def test_trace_too_short(self):
        trace = noisy_trace(n=150, layers=1)
        with pytest.raises(TraceTooShort):
            blocked_eval(None, trace, "sw_avg", EvalConfig(horizon=100, mode="blocked"),
                         SwAvgConfig(window=150))  # first origin below min history
        with pytest.raises(TraceTooShort):
            sliding_eval(None, trace, "sw_avg", EvalConfig(horizon=100, mode="sliding"),
                         SwAvgConfig(window=100))

    def test_mode_mismatch_rejected(self):
        trace = noisy_trace(n=400, layers=1)
        with pytest.raises(InvalidConfig):
            blocked_eval(None, trace, "sw_avg", EvalConfig(horizon=50, mode="sliding"))

    def test_lstm_requires_train_trace(self):
        trace = noisy_trace(n=400, layers=1)
        with pytest.raises(InvalidConfig):
            blocked_eval(None, trace, "lstm", EvalConfig(horizon=100, mode="blocked"))


class TestStateSummary:
    def make_report(self, trace, horizon=100):
        cfg = EvalConfig(horizon=horizon, mode="blocked")
        return blocked_eval(None, trace, "sw_avg", cfg, SwAvgConfig(window=50))

    def test_split_means(self):
        trace = noisy_trace(n=1000, layers=1)
        report = self.make_report(trace)
        labels = np.array(["transient"] * 500 + ["stable"] * 500)
        tl = StateTimeline(0, labels, 500, window_size=100, tau_rho=0.5, consec_C=5)
        summary = state_conditioned_summary(report, tl)
        trans = report.errors[report.origins < 500]
        stab = report.errors[report.origins >= 500]
        assert summary.transient_origins == trans.shape[0]
        assert summary.stable_origins == stab.shape[0]
        assert abs(summary.transient_mean - trans.mean()) < 1e-15
        assert abs(summary.stable_mean - stab.mean()) < 1e-15
        assert abs(summary.overall_mean - report.overall_mean) < 1e-15

    def test_all_stable_reports_none_for_transient(self):
        trace = noisy_trace(n=1000, layers=1)
        report = self.make_report(trace)
        labels = np.array(["stable"] * 1000)
        tl = StateTimeline(0, labels, 0)
        summary = state_conditioned_summary(report, tl)
        assert summary.transient_mean is None
        assert summary.transient_origins == 0

    def test_timeline_must_cover_origins(self):
        trace = noisy_trace(n=1000, layers=1)
        report = self.make_report(trace)
        tl = StateTimeline(0, np.array(["transient"] * 600), None)
        with pytest.raises(CoverageMismatch):
            state_conditioned_summary(report, tl)
