"""Forecast evaluation: sliding error curves and per-block error bars.

Both protocols walk forecast origins through a test trace. At each origin
the forecaster sees only history before it, predicts the next k iterations,
and is scored per layer. The default scoring unit compares the mean
predicted proportion over the k-step block with the mean actual proportion
(resource plans consume block aggregates); per-step scoring is available
via EvalConfig.stepwise.

The LSTM never fits on the test trace: it trains once on a separate train
trace and is reused read-only at every origin. The "oracle" method feeds
the actual future back as the prediction and exists to calibrate the
harness (its error is identically zero).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageMismatch, InvalidConfig, LengthMismatch, TraceTooShort
from .forecasters import (
    ArimaOrder,
    ForecastRequest,
    LstmConfig,
    LstmForecaster,
    SwAvgConfig,
    forecast,
    lstm_train,
)
from .trace import LoadTrace, _freeze, flatten_all_experts
from .windows import StateTimeline

EVAL_MODES = ("sliding", "blocked")
METRICS = ("mean_relative", "total_variation")
EVAL_METHODS = ("sw_avg", "arima", "lstm", "oracle")


@dataclass(frozen=True)
class EvalConfig:
    horizon: int
    mode: str
    stride: int = 1
    metric: str = "mean_relative"
    epsilon: float = 1e-6
    stepwise: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidConfig("horizon must be >= 1")
        if self.stride < 1:
            raise InvalidConfig("stride must be >= 1")
        if self.mode not in EVAL_MODES:
            raise InvalidConfig(f"mode must be one of {EVAL_MODES}")
        if self.metric not in METRICS:
            raise InvalidConfig(f"metric must be one of {METRICS}")
        if self.epsilon <= 0:
            raise InvalidConfig("epsilon must be positive")


@dataclass(frozen=True)
class EvalReport:
    """errors holds the headline metric; the other metric is always
    co-scored from the same forecasts and kept in alt_errors."""

    mode: str
    method: str
    metric: str
    alt_metric: str
    layer_ids: tuple[int, ...]
    origins: np.ndarray
    errors: np.ndarray  # [origin][layer]
    alt_errors: np.ndarray
    config: EvalConfig

    def __post_init__(self):
        origins = _freeze(np.asarray(self.origins, dtype=np.int64))
        for name in ("errors", "alt_errors"):
            arr = _freeze(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.ndim != 2 or arr.shape != (origins.size, len(self.layer_ids)):
                raise InvalidConfig(f"{name} must be [origin][layer]")
            if arr.size and (not np.isfinite(arr).all() or (arr < 0).any()):
                raise InvalidConfig(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "origins", origins)
        object.__setattr__(self, "layer_ids", tuple(int(l) for l in self.layer_ids))

    @property
    def overall_mean(self) -> float:
        return float(self.errors.mean())

    @property
    def alt_overall_mean(self) -> float:
        return float(self.alt_errors.mean())

    @property
    def per_layer_mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)


@dataclass(frozen=True)
class StateSummary:
    overall_mean: float
    transient_mean: float | None
    stable_mean: float | None
    transient_origins: int
    stable_origins: int


def error_rate(pred_row, true_row, metric: str = "mean_relative",
               epsilon: float = 1e-6) -> float:
    """Per-layer error between one predicted and one actual proportion row.

    mean_relative averages |predicted - actual| / max(actual, epsilon) over
    experts; total_variation is half the L1 distance.
    """
    p = np.asarray(pred_row, dtype=np.float64)
    t = np.asarray(true_row, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise LengthMismatch(f"prediction shape {p.shape} != actual shape {t.shape}")
    if metric == "mean_relative":
        return float(np.mean(np.abs(p - t) / np.maximum(t, epsilon)))
    if metric == "total_variation":
        return float(0.5 * np.abs(p - t).sum())
    raise InvalidConfig(f"metric must be one of {METRICS}")


def sampling_error_floor(p_bar: float, n_token: int, k: int, w: int) -> float:
    """Irreducible mean_relative error of the block-mean protocol on an
    i.i.d. multinomial trace.

    The prediction is a mean over w samples and the target a mean over k
    samples, so their difference has the variance of a single proportion
    divided by the harmonic combination k_eff = 1 / (1/k + 1/w). The
    returned value is the relative standard deviation sqrt((1 - p) /
    (p * N * k_eff)) at the uniform share p = p_bar; it upper-bounds the
    expected absolute relative error.
    """
    if not 0 < p_bar < 1:
        raise InvalidConfig("p_bar must lie in (0, 1)")
    if n_token < 1 or k < 1 or w < 1:
        raise InvalidConfig("n_token, k, w must be >= 1")
    k_eff = 1.0 / (1.0 / k + 1.0 / w)
    return float(np.sqrt((1.0 - p_bar) / (p_bar * n_token * k_eff)))


def _method_min_history(method: str, method_config) -> int:
    if method == "sw_avg":
        cfg = method_config if method_config is not None else SwAvgConfig()
        return cfg.window
    if method == "arima":
        cfg = method_config if method_config is not None else ArimaOrder()
        return 10 * (cfg.p + cfg.q + 1) + cfg.d
    return 1  # lstm warm-up and the oracle need only one row


def _layer_slices(trace: LoadTrace) -> tuple[tuple[int, int], ...]:
    e = trace.experts_per_layer
    return tuple((i * e, (i + 1) * e) for i in range(len(trace.moe_layer_ids)))


def _alt_metric(metric: str) -> str:
    return METRICS[1] if metric == METRICS[0] else METRICS[0]


def _score_origin(pred: np.ndarray, actual: np.ndarray, slices,
                  cfg: EvalConfig) -> tuple[list[float], list[float]]:
    head, alt = [], []
    for a, b in slices:
        for metric, out in ((cfg.metric, head), (_alt_metric(cfg.metric), alt)):
            if cfg.stepwise:
                steps = [error_rate(pred[s, a:b], actual[s, a:b], metric, cfg.epsilon)
                         for s in range(pred.shape[0])]
                out.append(float(np.mean(steps)))
            else:
                out.append(error_rate(pred[:, a:b].mean(axis=0), actual[:, a:b].mean(axis=0),
                                      metric, cfg.epsilon))
    return head, alt


def _run_origins(trace_train, trace_test, method, cfg, method_config, origins):
    if method not in EVAL_METHODS:
        raise InvalidConfig(f"method must be one of {EVAL_METHODS}")
    flat = flatten_all_experts(trace_test)
    slices = _layer_slices(trace_test)
    k = cfg.horizon

    fitted = None
    if method == "lstm":
        if isinstance(method_config, LstmForecaster):
            fitted = method_config
        else:
            if trace_train is None:
                raise InvalidConfig("lstm evaluation needs a train trace or a trained forecaster")
            if method_config is not None and not isinstance(method_config, LstmConfig):
                raise InvalidConfig("lstm expects an LstmConfig or a trained LstmForecaster")
            fitted = lstm_train(flatten_all_experts(trace_train), method_config)

    rows, alt_rows = [], []
    for t in origins:
        actual = flat[t : t + k]
        if method == "oracle":
            pred = actual
        else:
            req = ForecastRequest(flat[:t], k, method,
                                  config=fitted if method == "lstm" else method_config,
                                  layer_slices=slices)
            pred = forecast(req).predictions
        head, alt = _score_origin(pred, actual, slices, cfg)
        rows.append(head)
        alt_rows.append(alt)
    return EvalReport(cfg.mode, method, cfg.metric, _alt_metric(cfg.metric),
                      tuple(trace_test.moe_layer_ids), np.asarray(origins),
                      np.asarray(rows, dtype=np.float64),
                      np.asarray(alt_rows, dtype=np.float64), cfg)


def sliding_eval(trace_train, trace_test: LoadTrace, method: str, cfg: EvalConfig,
                 method_config=None) -> EvalReport:
    """Error curve over origins t = t_min, t_min + stride, ...; at each one
    the method sees history [0, t) and is scored on [t, t + k)."""
    if cfg.mode != "sliding":
        raise InvalidConfig("sliding_eval requires mode='sliding'")
    n = trace_test.num_iterations
    t_min = _method_min_history(method, method_config)
    last = n - cfg.horizon
    if last < t_min:
        raise TraceTooShort(f"{n} iterations leave no origin with {t_min} history rows"
                            f" and a {cfg.horizon}-step horizon")
    origins = list(range(t_min, last + 1, cfg.stride))
    return _run_origins(trace_train, trace_test, method, cfg, method_config, origins)


def blocked_eval(trace_train, trace_test: LoadTrace, method: str, cfg: EvalConfig,
                 method_config=None) -> EvalReport:
    """One error per consecutive k-iteration block; the first block only
    seeds history. A 10,000-iteration trace with k=1,000 scores 9 blocks."""
    if cfg.mode != "blocked":
        raise InvalidConfig("blocked_eval requires mode='blocked'")
    n = trace_test.num_iterations
    k = cfg.horizon
    num_blocks = (n - k) // k
    if num_blocks < 1:
        raise TraceTooShort(f"{n} iterations hold no evaluable {k}-step block")
    t_min = _method_min_history(method, method_config)
    if k < t_min:
        raise TraceTooShort(f"first block origin {k} is below the method minimum history {t_min}")
    origins = [k * b for b in range(1, num_blocks + 1)]
    return _run_origins(trace_train, trace_test, method, cfg, method_config, origins)


def state_conditioned_summary(report: EvalReport, timeline: StateTimeline) -> StateSummary:
    """Mean error split by the state label at each origin; a phase with no
    origins reports None rather than zero."""
    labels = timeline.labels
    if report.origins.size and int(report.origins.max()) >= labels.size:
        raise CoverageMismatch(f"timeline covers {labels.size} iterations,"
                               f" report origins reach {int(report.origins.max())}")
    origin_labels = labels[report.origins]
    stable = origin_labels == "stable"
    parts: dict[str, float | None] = {}
    counts: dict[str, int] = {}
    for name, mask in (("transient", ~stable), ("stable", stable)):
        counts[name] = int(mask.sum())
        parts[name] = float(report.errors[mask].mean()) if mask.any() else None
    return StateSummary(
        overall_mean=report.overall_mean,
        transient_mean=parts["transient"],
        stable_mean=parts["stable"],
        transient_origins=counts["transient"],
        stable_origins=counts["stable"],
    )
