import numpy as np
import pytest

from moeload import (
    ArmaSynthConfig,
    InvalidConfig,
    NonStationaryCoefficients,
    SynthConfig,
    WindowConfig,
    generate_arma,
    generate_trace,
    to_proportions,
    window_variance,
)


def small_cfg(**overrides):
    base = dict(num_layers=2, experts_per_layer=8, tokens_per_iteration=4096,
                num_iterations=300, seed=11)
    base.update(overrides)
    return SynthConfig(**base)


class TestTraceGenerator:
    def test_strict_row_sums_and_shape(self):
        trace = generate_trace(small_cfg())
        assert trace.counts.shape == (300, 2, 8)
        assert (trace.counts.sum(axis=2) == 4096).all()
        assert trace.moe_layer_ids == (0, 1)

    def test_same_seed_is_identical(self):
        a = generate_trace(small_cfg())
        b = generate_trace(small_cfg())
        assert a == b

    def test_different_seed_differs(self):
        a = generate_trace(small_cfg())
        b = generate_trace(small_cfg(seed=12))
        assert a != b

    def test_layers_get_independent_streams(self):
        trace = generate_trace(small_cfg())
        assert not np.array_equal(trace.counts[:, 0, :], trace.counts[:, 1, :])

    def test_adding_a_layer_keeps_earlier_layers(self):
        # per-layer substreams: layer 0 must not depend on how many layers exist
        a = generate_trace(small_cfg(num_layers=1))
        b = generate_trace(small_cfg(num_layers=2))
        np.testing.assert_array_equal(a.counts[:, 0, :], b.counts[:, 0, :])

    def test_loads_calm_down_with_decaying_steps(self):
        # default decay schedule: late windows fluctuate less than early ones
        cfg = SynthConfig(num_layers=1, experts_per_layer=16,
                          tokens_per_iteration=65536, num_iterations=9000,
                          sigma0=0.2, sigma_inf=0.005, decay_T=1000.0, seed=3)
        props = to_proportions(generate_trace(cfg), 0)
        var = window_variance(props.values[:, 0], WindowConfig(100))
        assert var[8000] < var[200]

    def test_hard_transition_changes_step_size_abruptly(self):
        cfg = small_cfg(num_layers=1, sigma0=0.3, sigma_inf=0.0,
                        hard_transition_at=150, num_iterations=300)
        props = to_proportions(generate_trace(cfg), 0)
        early = props.values[:150].std(axis=0).max()
        late = props.values[160:].std(axis=0).max()
        assert late < early / 3

    def test_validation(self):
        with pytest.raises(InvalidConfig):
            small_cfg(experts_per_layer=0)
        with pytest.raises(InvalidConfig):
            small_cfg(sigma0=0.001, sigma_inf=0.01)  # late sigma above initial
        with pytest.raises(InvalidConfig):
            small_cfg(seed=2**64)
        with pytest.raises(InvalidConfig):
            small_cfg(hard_transition_at=-1)


class TestArmaGenerator:
    def test_reproducible(self):
        cfg = ArmaSynthConfig(phi=(0.6,), theta=(0.3,), d=0, length=500, seed=5)
        np.testing.assert_array_equal(generate_arma(cfg), generate_arma(cfg))

    def test_matches_explicit_loop_recursion(self):
        # independent oracle: same documented noise stream and burn-in, but
        # the recursion w_t = phi w_{t-1} + eps_t + theta eps_{t-1} run as a
        # plain Python loop with zero initial conditions
        phi, theta, length, sigma, seed = 0.6, 0.3, 200, 2.0, 9
        cfg = ArmaSynthConfig(phi=(phi,), theta=(theta,), d=0, length=length,
                              noise_sigma=sigma, seed=seed)
        x = generate_arma(cfg)
        assert x.shape == (length,)

        from moeload.synth import ARMA_STREAM_TAG
        rng = np.random.Generator(np.random.Philox(key=[seed, ARMA_STREAM_TAG]))
        burn = 10 * (1 + 1 + 1)
        eps = sigma * rng.standard_normal(burn + length)
        w = np.zeros(burn + length)
        for t in range(burn + length):
            w_prev = w[t - 1] if t > 0 else 0.0
            e_prev = eps[t - 1] if t > 0 else 0.0
            w[t] = phi * w_prev + eps[t] + theta * e_prev
        np.testing.assert_allclose(x, w[burn:], rtol=0, atol=1e-10)

    def test_integration_is_cumsum(self):
        flat = ArmaSynthConfig(phi=(0.5,), theta=(), d=0, length=400, seed=2)
        walk = ArmaSynthConfig(phi=(0.5,), theta=(), d=1, length=400, seed=2)
        np.testing.assert_allclose(generate_arma(walk), np.cumsum(generate_arma(flat)),
                                   rtol=0, atol=1e-12)

    def test_nonstationary_ar_rejected(self):
        with pytest.raises(NonStationaryCoefficients):
            ArmaSynthConfig(phi=(1.0,), theta=(), d=0, length=100, seed=0)
        with pytest.raises(NonStationaryCoefficients):
            ArmaSynthConfig(phi=(0.7, 0.5), theta=(), d=0, length=100, seed=0)

    def test_noninvertible_ma_rejected(self):
        with pytest.raises(NonStationaryCoefficients):
            ArmaSynthConfig(phi=(), theta=(-1.0,), d=0, length=100, seed=0)

    def test_stationary_variance_is_bounded(self):
        cfg = ArmaSynthConfig(phi=(0.6,), theta=(0.3,), d=0, length=20000,
                              noise_sigma=1.0, seed=7)
        x = generate_arma(cfg)
        # AR(1)+MA(1) stationary variance: (1 + 2*phi*theta + theta^2)/(1 - phi^2)
        expect = (1 + 2 * 0.6 * 0.3 + 0.09) / (1 - 0.36)
        assert abs(np.var(x) / expect - 1) < 0.15
