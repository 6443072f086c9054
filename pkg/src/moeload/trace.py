"""In-memory expert-load traces and conversion to load proportions.

A trace holds per-iteration, per-MoE-layer token counts for every expert.
Everything downstream (statistics, forecasting, evaluation) consumes the
normalized per-layer load proportions derived here.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, RangeOutOfBounds, UnknownLayer, ValidationError, ZeroRowSum

ROW_SUM_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LoadTrace:
    """Per-iteration token counts, shape [iteration, layer, expert].

    Instances are immutable; the counts array is marked read-only. Shape and
    non-negativity are always enforced. Row-sum discipline (strict: every
    per-layer row sums to ``tokens_per_iteration``; lenient: sums merely
    positive) is checked by :meth:`from_counts` / the readers, because real
    traces with capacity-factor token dropping violate the strict sum.
    """

    counts: np.ndarray
    moe_layer_ids: tuple[int, ...]
    tokens_per_iteration: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 3:
            raise ValidationError("*", "*", f"counts must be 3-D, got ndim={counts.ndim}")
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValidationError("*", "*", f"counts must be integers, got {counts.dtype}")
        layer_ids = tuple(int(x) for x in self.moe_layer_ids)
        if len(set(layer_ids)) != len(layer_ids):
            raise ValidationError("*", "*", f"duplicate layer ids in {layer_ids}")
        if counts.shape[1] != len(layer_ids):
            raise ValidationError(
                "*", "*",
                f"counts has {counts.shape[1]} layers but {len(layer_ids)} layer ids given")
        if counts.shape[2] < 1:
            raise ValidationError("*", "*", "experts_per_layer must be >= 1")
        if self.tokens_per_iteration < 1:
            raise ValidationError("*", "*", "tokens_per_iteration must be >= 1")
        if counts.size and counts.min() < 0:
            it, li, _ = np.unravel_index(int(np.argmin(counts)), counts.shape)
            raise ValidationError(int(it), layer_ids[li], "negative token count")
        object.__setattr__(self, "counts", _freeze(counts.astype(np.int64)))
        object.__setattr__(self, "moe_layer_ids", layer_ids)
        object.__setattr__(self, "tokens_per_iteration", int(self.tokens_per_iteration))

    @classmethod
    def from_counts(cls, counts, moe_layer_ids, tokens_per_iteration, mode: str = "strict"):
        """Build a validated trace. ``mode`` is 'strict' or 'lenient'."""
        trace = cls(np.asarray(counts), tuple(moe_layer_ids), tokens_per_iteration)
        trace.validate_row_sums(mode)
        return trace

    def validate_row_sums(self, mode: str = "strict") -> None:
        if mode not in ("strict", "lenient"):
            raise ValueError(f"mode must be 'strict' or 'lenient', got {mode!r}")
        if self.num_iterations == 0:
            return
        sums = self.counts.sum(axis=2)
        if mode == "strict":
            bad = np.argwhere(sums != self.tokens_per_iteration)
            if bad.size:
                it, li = bad[0]
                raise ValidationError(
                    int(it), self.moe_layer_ids[li],
                    f"row sum {int(sums[it, li])} != tokens_per_iteration "
                    f"{self.tokens_per_iteration}")
        else:
            bad = np.argwhere(sums <= 0)
            if bad.size:
                it, li = bad[0]
                raise ValidationError(int(it), self.moe_layer_ids[li], "row sum is zero")

    @property
    def num_iterations(self) -> int:
        return self.counts.shape[0]

    @property
    def experts_per_layer(self) -> int:
        return self.counts.shape[2]

    def layer_index(self, layer: int) -> int:
        try:
            return self.moe_layer_ids.index(layer)
        except ValueError:
            raise UnknownLayer(layer, self.moe_layer_ids) from None

    def __eq__(self, other):
        if not isinstance(other, LoadTrace):
            return NotImplemented
        return (self.moe_layer_ids == other.moe_layer_ids
                and self.tokens_per_iteration == other.tokens_per_iteration
                and self.counts.shape == other.counts.shape
                and bool(np.array_equal(self.counts, other.counts)))


@dataclass(frozen=True)
class ProportionSeries:
    """Load proportions of one MoE layer, shape [iteration, expert].

    Every row lies on the probability simplex (sums to 1 within 1e-9).
    """

    layer_id: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("*", self.layer_id, "values must be 2-D")
        if values.size:
            if values.min() < 0.0 or values.max() > 1.0:
                raise ValidationError("*", self.layer_id, "proportions outside [0, 1]")
            row_sums = values.sum(axis=1)
            if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
                it = int(np.argmax(np.abs(row_sums - 1.0)))
                raise ValidationError(it, self.layer_id,
                                      f"proportion row sums to {row_sums[it]!r}")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def num_iterations(self) -> int:
        return self.values.shape[0]

    @property
    def num_experts(self) -> int:
        return self.values.shape[1]


def to_proportions(trace: LoadTrace, layer: int) -> ProportionSeries:
    """Normalize one layer's counts by its per-iteration row sums.

    Counts are treated as token assignments, so dividing by the row sum is
    correct whether or not top-k routing counts a token k times.
    """
    li = trace.layer_index(layer)
    counts = trace.counts[:, li, :].astype(np.float64)
    sums = counts.sum(axis=1)
    zero = np.nonzero(sums == 0.0)[0]
    if zero.size:
        raise ZeroRowSum(int(zero[0]))
    return ProportionSeries(layer_id=layer, values=counts / sums[:, None])


def expert_series(props: ProportionSeries, expert: int) -> np.ndarray:
    """One expert's proportion over iterations (read-only 1-D view)."""
    if not 0 <= expert < props.num_experts:
        raise IndexOutOfRange(
            f"expert {expert} out of range for {props.num_experts} experts")
    return props.values[:, expert]


def flatten_all_experts(trace: LoadTrace, iteration_range=None) -> np.ndarray:
    """Proportion rows over all layers, layer-major then expert.

    Row t is the concatenation of every layer's proportion row at iteration t,
    in ``moe_layer_ids`` order: the joint input vector a multivariate
    forecaster consumes. ``iteration_range`` is an inclusive-exclusive
    ``(start, stop)`` pair; None means the full trace.
    """
    n = trace.num_iterations
    if iteration_range is None:
        start, stop = 0, n
    else:
        start, stop = int(iteration_range[0]), int(iteration_range[1])
    if not (0 <= start <= stop <= n):
        raise RangeOutOfBounds(f"range [{start}, {stop}) outside trace of {n} iterations")
    cols = []
    for layer in trace.moe_layer_ids:
        cols.append(to_proportions(trace, layer).values[start:stop])
    if not cols:
        return np.zeros((stop - start, 0))
    return np.hstack(cols)
