"""Deterministic synthetic traces and ARMA test series.

The trace generator models the observed load dynamics: per-layer expert
logits follow a Gaussian random walk whose step size decays from ``sigma0``
to ``sigma_inf`` (early fluctuation settling into temporal locality), and
token counts are multinomial draws from the softmax routing distribution.

Randomness comes from the counter-based Philox bit generator. Each layer owns
the substream keyed (seed, layer position); ARMA simulation uses the key
(seed, ARMA_STREAM_TAG). Within a layer the draw order is fixed: first the
(n-1, e) block of standard normals for the logit walk, then one binomial
vector per expert column for the sequential multinomial decomposition. Layers
are therefore independent and reordering their generation cannot change the
output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidConfig, NonStationaryCoefficients
from .trace import LoadTrace

ARMA_STREAM_TAG = 0x41524D41  # disjoint from layer-position keys


def _stream(seed: int, substream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, substream]))


@dataclass(frozen=True)
class SynthConfig:
    num_layers: int
    experts_per_layer: int
    tokens_per_iteration: int
    num_iterations: int
    sigma0: float = 0.2
    sigma_inf: float = 0.005
    decay_T: float = 1000.0
    temperature: float = 1.0
    seed: int = 0
    hard_transition_at: int | None = None

    def __post_init__(self):
        for name in ("num_layers", "experts_per_layer", "tokens_per_iteration",
                     "num_iterations"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if self.sigma0 < 0 or self.sigma_inf < 0:
            raise InvalidConfig("sigma0 and sigma_inf must be non-negative")
        if self.sigma_inf > self.sigma0:
            raise InvalidConfig("sigma_inf must not exceed sigma0")
        if self.decay_T <= 0:
            raise InvalidConfig("decay_T must be positive")
        if self.temperature <= 0:
            raise InvalidConfig("temperature must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must fit an unsigned 64-bit integer")
        if self.hard_transition_at is not None and self.hard_transition_at < 0:
            raise InvalidConfig("hard_transition_at must be non-negative")


@dataclass(frozen=True)
class ArmaSynthConfig:
    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    d: int = 0
    length: int = 1000
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(x) for x in self.phi))
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        if self.d < 0:
            raise InvalidConfig("d must be non-negative")
        if self.length < 1:
            raise InvalidConfig("length must be >= 1")
        if self.noise_sigma <= 0:
            raise InvalidConfig("noise_sigma must be positive")
        _check_roots_outside_unit_circle(self.phi, ar=True)
        _check_roots_outside_unit_circle(self.theta, ar=False)


def _check_roots_outside_unit_circle(coeffs, ar: bool) -> None:
    # AR: 1 - sum phi_i z^i; MA: 1 + sum theta_j z^j. Roots strictly outside
    # the unit circle mean stationarity (AR) / invertibility (MA).
    if not coeffs:
        return
    signed = [-c for c in coeffs] if ar else list(coeffs)
    poly = np.array(signed[::-1] + [1.0])
    roots = np.roots(poly)
    if roots.size and np.min(np.abs(roots)) <= 1.0 + 1e-10:
        kind = "AR polynomial is non-stationary" if ar else "MA polynomial is non-invertible"
        raise NonStationaryCoefficients(f"{kind}: root magnitude {np.min(np.abs(roots)):.6f}")


def _step_sizes(cfg: SynthConfig) -> np.ndarray:
    """Walk step size for updates t = 1 .. num_iterations-1."""
    t = np.arange(1, cfg.num_iterations, dtype=np.float64)
    if cfg.hard_transition_at is not None:
        return np.where(t < cfg.hard_transition_at, cfg.sigma0, cfg.sigma_inf)
    return cfg.sigma_inf + (cfg.sigma0 - cfg.sigma_inf) * np.exp(-t / cfg.decay_T)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _multinomial_rows(rng: np.random.Generator, n_token: int, p: np.ndarray) -> np.ndarray:
    """Multinomial per row via the sequential binomial decomposition.

    Column-by-column conditional binomials keep every row sum exactly
    n_token. Vectorized over rows; one binomial draw call per expert.
    """
    rows, e = p.shape
    counts = np.zeros((rows, e), dtype=np.int64)
    remaining = np.full(rows, n_token, dtype=np.int64)
    suffix = np.cumsum(p[:, ::-1], axis=1)[:, ::-1]
    for j in range(e - 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(suffix[:, j] > 0, p[:, j] / suffix[:, j], 0.0)
        ratio = np.clip(ratio, 0.0, 1.0)
        counts[:, j] = rng.binomial(remaining, ratio)
        remaining -= counts[:, j]
    counts[:, e - 1] = remaining
    return counts


def generate_trace(cfg: SynthConfig) -> LoadTrace:
    """Generate a strict-mode trace; bit-for-bit reproducible from the seed."""
    n, e = cfg.num_iterations, cfg.experts_per_layer
    counts = np.zeros((n, cfg.num_layers, e), dtype=np.int64)
    sigma = _step_sizes(cfg)
    for li in range(cfg.num_layers):
        rng = _stream(cfg.seed, li)
        steps = rng.standard_normal((n - 1, e)) if n > 1 else np.zeros((0, e))
        z = np.vstack([np.zeros((1, e)), np.cumsum(sigma[:, None] * steps, axis=0)])
        p = _softmax_rows(z / cfg.temperature)
        counts[:, li, :] = _multinomial_rows(rng, cfg.tokens_per_iteration, p)
    return LoadTrace.from_counts(counts, range(cfg.num_layers),
                                 cfg.tokens_per_iteration, mode="strict")


def generate_arma(cfg: ArmaSynthConfig) -> np.ndarray:
    """Simulate ARIMA(p, d, q) data with Gaussian innovations.

    The ARMA core w_t = sum phi_i w_{t-i} + eps_t + sum theta_j eps_{t-j}
    runs with a discarded burn-in of 10*(p+q+1) samples, then is integrated
    d times by cumulative summation.
    """
    p, q = len(cfg.phi), len(cfg.theta)
    burn = 10 * (p + q + 1)
    rng = _stream(cfg.seed, ARMA_STREAM_TAG)
    eps = cfg.noise_sigma * rng.standard_normal(burn + cfg.length)
    b = np.concatenate(([1.0], cfg.theta))
    a = np.concatenate(([1.0], -np.asarray(cfg.phi, dtype=np.float64)))
    w = lfilter(b, a, eps)[burn:]
    for _ in range(cfg.d):
        w = np.cumsum(w)
    return w
