"""Sliding-window dispersion statistics and the transient/stable detector.

Per-expert load proportions move a lot early in training and settle later.
Windowed variance and range quantify that; the detector turns the range
signal into a single transition iteration per layer.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CoverageMismatch, InvalidConfig, SeriesTooShort
from .trace import ProportionSeries, _freeze

POPOVICIU_SLACK = 1e-12

DETECT_WINDOW = 100
DETECT_TAU_RHO = 0.5
DETECT_CONSEC = 5


@dataclass(frozen=True)
class WindowConfig:
    window_size: int
    stride: int = 1

    def __post_init__(self):
        if self.window_size < 2:
            raise InvalidConfig("window_size must be >= 2")
        if self.stride < 1:
            raise InvalidConfig("stride must be >= 1")


@dataclass(frozen=True)
class WindowStats:
    layer_id: int
    window_size: int
    stride: int
    start_iterations: np.ndarray
    variance: np.ndarray
    range: np.ndarray

    def __post_init__(self):
        starts = _freeze(np.asarray(self.start_iterations, dtype=np.int64))
        var = _freeze(np.asarray(self.variance, dtype=np.float64))
        rng = _freeze(np.asarray(self.range, dtype=np.float64))
        if not (var.shape == rng.shape and var.ndim == 2 and len(starts) == var.shape[0]):
            raise InvalidConfig("stats arrays must be [window][expert] with one start per window")
        if (var < 0).any() or (rng < 0).any() or (rng > 1).any():
            raise InvalidConfig("variance must be >= 0 and range within [0, 1]")
        if (var > rng**2 / 4 + POPOVICIU_SLACK).any():
            raise InvalidConfig("variance exceeds the Popoviciu bound range^2/4")
        object.__setattr__(self, "start_iterations", starts)
        object.__setattr__(self, "variance", var)
        object.__setattr__(self, "range", rng)

    @property
    def num_windows(self) -> int:
        return self.variance.shape[0]


@dataclass(frozen=True)
class StateTimeline:
    layer_id: int
    labels: np.ndarray  # "transient" / "stable" per iteration
    transition_iteration: int | None
    window_size: int = DETECT_WINDOW
    tau_rho: float = DETECT_TAU_RHO
    consec_C: int = DETECT_CONSEC

    def __post_init__(self):
        labels = np.asarray(self.labels)
        bad = ~np.isin(labels, ("transient", "stable"))
        if bad.any():
            raise InvalidConfig("labels must be 'transient' or 'stable'")
        stable = labels == "stable"
        # single monotone transition: once stable, stable for good
        if stable.size and (np.diff(stable.astype(np.int8)) < 0).any():
            raise InvalidConfig("labels must not revert from stable to transient")
        t = self.transition_iteration
        if stable.any():
            if t != int(np.argmax(stable)):
                raise InvalidConfig("transition_iteration must mark the first stable label")
        elif t is not None and t != labels.size:
            # a transition at exactly labels.size means stability begins just
            # past the observed series, so no iteration carries the label
            raise InvalidConfig("transition_iteration must mark the first stable label")
        object.__setattr__(self, "labels", _freeze(labels))

    def stable_mask(self) -> np.ndarray:
        return self.labels == "stable"


def _as_series(series) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidConfig("expected a 1-D series")
    return x


def _window_starts(n: int, cfg: WindowConfig) -> np.ndarray:
    return np.arange(0, n - cfg.window_size + 1, cfg.stride, dtype=np.int64)


def window_variance(series, cfg: WindowConfig) -> np.ndarray:
    """Population variance of every window, two-pass per window.

    The mean is subtracted before squaring (no sum-of-squares shortcut);
    proportions near 1/E with tiny spread would otherwise cancel
    catastrophically. Windows are processed in bounded-memory chunks over
    a strided view, so total work is O(n * w) flops but O(chunk * w) bytes.
    """
    x = _as_series(series)
    w = cfg.window_size
    if x.size < w:
        raise SeriesTooShort(f"series length {x.size} < window size {w}")
    wins = sliding_window_view(x, w)[:: cfg.stride]
    out = np.empty(wins.shape[0], dtype=np.float64)
    chunk = max(1, 2_000_000 // w)
    for s in range(0, wins.shape[0], chunk):
        block = wins[s : s + chunk]
        dev = block - block.mean(axis=1, keepdims=True)
        out[s : s + chunk] = np.einsum("ij,ij->i", dev, dev) / w
    return out


def window_range(series, cfg: WindowConfig) -> np.ndarray:
    """max - min of every window via monotonic double-ended queues, O(n)."""
    x = _as_series(series)
    w, stride = cfg.window_size, cfg.stride
    if x.size < w:
        raise SeriesTooShort(f"series length {x.size} < window size {w}")
    vals = x.tolist()
    out = np.empty((x.size - w) // stride + 1, dtype=np.float64)
    maxq: deque[int] = deque()
    minq: deque[int] = deque()
    for i, v in enumerate(vals):
        while maxq and vals[maxq[-1]] <= v:
            maxq.pop()
        maxq.append(i)
        while minq and vals[minq[-1]] >= v:
            minq.pop()
        minq.append(i)
        start = i - w + 1
        if start < 0:
            continue
        while maxq[0] < start:
            maxq.popleft()
        while minq[0] < start:
            minq.popleft()
        if start % stride == 0:
            out[start // stride] = vals[maxq[0]] - vals[minq[0]]
    return out


def layer_window_stats(props: ProportionSeries, cfg: WindowConfig) -> WindowStats:
    """Windowed variance and range for every expert column of one layer."""
    n, e = props.values.shape
    if n < cfg.window_size:
        raise SeriesTooShort(f"{n} iterations < window size {cfg.window_size}")
    starts = _window_starts(n, cfg)
    var = np.empty((starts.size, e), dtype=np.float64)
    rng = np.empty((starts.size, e), dtype=np.float64)
    for j in range(e):
        col = props.values[:, j]
        var[:, j] = window_variance(col, cfg)
        rng[:, j] = window_range(col, cfg)
    return WindowStats(props.layer_id, cfg.window_size, cfg.stride, starts, var, rng)


def detect_state(
    props: ProportionSeries,
    w: int = DETECT_WINDOW,
    tau_rho: float = DETECT_TAU_RHO,
    consec_C: int = DETECT_CONSEC,
) -> StateTimeline:
    """Locate the transient-to-stable transition of one layer.

    The series is cut into non-overlapping w-iteration blocks. A block is
    quiet when every expert's in-block range stays below tau_rho * (1/E),
    the tolerance being relative to the uniform share so one threshold
    works across expert counts. The layer turns stable at the end of the
    first run of consec_C consecutive quiet blocks; it stays transient
    throughout if no such run exists.
    """
    if w < 2 or consec_C < 1 or tau_rho <= 0:
        raise InvalidConfig("need w >= 2, consec_C >= 1, tau_rho > 0")
    n, e = props.values.shape
    if n < w * consec_C:
        raise SeriesTooShort(f"{n} iterations < w * consec_C = {w * consec_C}")
    num_blocks = n // w
    blocks = props.values[: num_blocks * w].reshape(num_blocks, w, e)
    block_range = blocks.max(axis=1) - blocks.min(axis=1)
    quiet = (block_range < tau_rho / e).all(axis=1)

    transition = None
    run = 0
    for b in range(num_blocks):
        run = run + 1 if quiet[b] else 0
        if run == consec_C:
            transition = (b + 1) * w
            break
    labels = np.where(
        np.arange(n) >= (transition if transition is not None else n),
        "stable", "transient",
    )
    return StateTimeline(props.layer_id, labels, transition, w, tau_rho, consec_C)
