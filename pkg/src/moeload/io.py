"""Trace, table, and JSON file formats.

Trace files are CSV with header ``iteration,layer,expert_0,...,expert_{E-1}``,
one row per (iteration, layer), counts as decimal integers, plus a sidecar
metadata file ``<path>.meta.json`` holding format_version, moe_layer_ids,
experts_per_layer and tokens_per_iteration. A JSONL variant (same fields, one
object per line) is accepted on ingest. All outputs are UTF-8 with LF line
endings and '.' decimal separators, written atomically (temp file + rename),
so identical inputs produce byte-identical files on every platform.
"""
from __future__ import annotations

import json
import os

import numpy as np

from .errors import (
    IoError,
    LengthMismatch,
    NonContiguousIterations,
    ParseError,
    ValidationError,
)
from .trace import LoadTrace

FORMAT_VERSION = 1


def meta_path(path: str) -> str:
    """Sidecar metadata path for a trace file."""
    return f"{path}.meta.json"


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_json(obj, path: str) -> None:
    """Deterministic JSON: sorted keys, 2-space indent, trailing newline."""
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_meta(path: str) -> dict:
    mpath = meta_path(path)
    if not os.path.exists(mpath):
        raise IoError(f"metadata sidecar not found: {mpath}")
    try:
        with open(mpath, encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(0, f"bad metadata sidecar {mpath}: {exc}") from exc
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(0, f"unsupported format_version {version!r}")
    for key in ("moe_layer_ids", "experts_per_layer", "tokens_per_iteration"):
        if key not in meta:
            raise ParseError(0, f"metadata missing {key!r}")
    return meta


def _parse_count(token: str, line_no: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(line_no, f"not an integer count: {token!r}") from None
    return value


def _rows_from_csv(path: str, num_experts: int):
    expected_header = "iteration,layer," + ",".join(
        f"expert_{j}" for j in range(num_experts))
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != expected_header:
            raise ParseError(1, f"bad header {header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 + num_experts:
                raise ParseError(line_no, f"expected {2 + num_experts} fields, got {len(parts)}")
            yield line_no, [_parse_count(p, line_no) for p in parts]


def _rows_from_jsonl(path: str, num_experts: int):
    count_keys = [f"expert_{j}" for j in range(num_experts)]
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"bad JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise ParseError(line_no, "each line must be a JSON object")
            try:
                fields = [obj["iteration"], obj["layer"]] + [obj[k] for k in count_keys]
            except KeyError as exc:
                raise ParseError(line_no, f"missing field {exc.args[0]!r}") from None
            for value in fields:
                if not isinstance(value, int) or isinstance(value, bool):
                    raise ParseError(line_no, f"not an integer: {value!r}")
            yield line_no, fields


def read_trace(path: str, mode: str = "strict") -> LoadTrace:
    """Read and validate a trace file (CSV, or JSONL by extension).

    Rejection is total: any parse or validation failure raises before a
    trace object is returned.
    """
    if not os.path.exists(path):
        raise IoError(f"trace file not found: {path}")
    meta = _read_meta(path)
    layer_ids = [int(x) for x in meta["moe_layer_ids"]]
    num_experts = int(meta["experts_per_layer"])
    n_token = int(meta["tokens_per_iteration"])
    layer_pos = {layer: i for i, layer in enumerate(layer_ids)}

    reader = _rows_from_jsonl if path.endswith(".jsonl") else _rows_from_csv
    raw = list(reader(path, num_experts))

    if not raw:
        counts = np.zeros((0, len(layer_ids), num_experts), dtype=np.int64)
        return LoadTrace.from_counts(counts, layer_ids, n_token, mode=mode)

    first_iter = raw[0][1][0]
    last_iter = max(fields[0] for _, fields in raw)
    num_iters = last_iter - first_iter + 1
    counts = np.full((num_iters, len(layer_ids), num_experts), -1, dtype=np.int64)

    prev_iter = first_iter
    for line_no, fields in raw:
        iteration, layer = fields[0], fields[1]
        if iteration < prev_iter:
            raise NonContiguousIterations(
                f"line {line_no}: iteration {iteration} after {prev_iter}")
        prev_iter = iteration
        if layer not in layer_pos:
            raise ValidationError(iteration, layer, "layer not declared in metadata")
        t, li = iteration - first_iter, layer_pos[layer]
        if counts[t, li, 0] != -1:
            raise ValidationError(iteration, layer, "duplicate record")
        row = fields[2:]
        for j, value in enumerate(row):
            if value < 0:
                raise ValidationError(iteration, layer, f"negative count for expert {j}")
        counts[t, li, :] = row

    missing = counts[:, :, 0] == -1
    if missing.any():
        t = int(np.argwhere(missing.any(axis=1))[0][0])
        if missing[t].all():
            raise NonContiguousIterations(f"no records for iteration {first_iter + t}")
        li = int(np.argwhere(missing[t])[0][0])
        raise ValidationError(first_iter + t, layer_ids[li], "layer record missing")

    return LoadTrace.from_counts(counts, layer_ids, n_token, mode=mode)


def write_trace(trace: LoadTrace, path: str) -> None:
    """Write a trace in canonical CSV order; round-trips with read_trace."""
    num_experts = trace.experts_per_layer
    lines = ["iteration,layer," + ",".join(f"expert_{j}" for j in range(num_experts))]
    counts = trace.counts
    for t in range(trace.num_iterations):
        for li, layer in enumerate(trace.moe_layer_ids):
            row = ",".join(str(int(c)) for c in counts[t, li])
            lines.append(f"{t},{layer},{row}")
    _atomic_write_text(path, "\n".join(lines) + "\n")
    write_json(
        {
            "format_version": FORMAT_VERSION,
            "moe_layer_ids": list(trace.moe_layer_ids),
            "experts_per_layer": num_experts,
            "tokens_per_iteration": trace.tokens_per_iteration,
        },
        meta_path(path),
    )


def format_number(value) -> str:
    """Canonical cell formatting: 9 significant digits, no trailing cruft."""
    return f"{float(value):.9g}"


def write_table(rows, columns, path: str) -> None:
    """Generic CSV emitter for statistics, forecasts and error reports."""
    columns = list(columns)
    lines = [",".join(columns)]
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != len(columns):
            raise LengthMismatch(
                f"row {i} has {len(row)} cells, expected {len(columns)}")
        lines.append(",".join(format_number(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_table(path: str):
    """Read a write_table CSV back as (columns, float array)."""
    if not os.path.exists(path):
        raise IoError(f"table file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        if not header:
            raise ParseError(1, "empty table file")
        columns = header.split(",")
        data = []
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise ParseError(line_no, f"expected {len(columns)} fields")
            try:
                data.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(line_no, str(exc)) from None
    array = np.array(data, dtype=np.float64) if data else np.zeros((0, len(columns)))
    return columns, array
