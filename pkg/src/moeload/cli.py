"""Batch command line: synthesize traces, compute windowed statistics,
detect the transient-to-stable transition, forecast, evaluate, and turn
forecasts into integer allocation plans.

Every run writes a manifest JSON next to its primary output
(``<out>.manifest.json``) holding the subcommand, all resolved option
values, input/output paths, the seed in play and the tool version. The
manifest carries no timestamps and every command is deterministic, so
re-running the argv reconstructed by :func:`manifest_to_argv` reproduces
each output byte for byte.

Exit codes: 0 success, 1 runtime or data error, 2 usage error. Errors go
to stderr; data goes only to files. Option precedence: command-line flag,
then ``--config`` JSON file, then the built-in default.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .allocate import allocate, headroom_allocate
from .errors import (
    InfeasibleMinimum,
    InvalidConfig,
    IoError,
    MoeLoadError,
    ParseError,
    ZeroRowSum,
)
from .evaluate import EvalConfig, blocked_eval, sliding_eval
from .forecasters import (
    ArimaOrder,
    ForecastRequest,
    LstmConfig,
    SwAvgConfig,
    forecast,
)
from .io import meta_path, read_table, read_trace, write_json, write_table, write_trace
from .synth import SynthConfig, generate_trace
from .trace import flatten_all_experts, to_proportions
from .windows import WindowConfig, detect_state, layer_window_stats

MANIFEST_VERSION = 1


class UsageError(Exception):
    """Bad flag combination or missing required option (exit code 2)."""


@dataclass(frozen=True)
class _Opt:
    dest: str
    flag: str
    kind: str  # "int" | "float" | "str" | "flag"
    default: object = None
    required: bool = False
    choices: tuple = ()
    help: str = ""
    extra_flags: tuple = ()


_OUT = _Opt("out", "--out", "str", required=True, extra_flags=("-o",),
            help="primary output path; sidecars derive from it")

# shared by forecast and eval; only the selected method reads its flags,
# but all resolved values land in the manifest either way
_METHOD_OPTS = (
    _Opt("window", "--window", "int", 100, help="sw_avg trailing window length"),
    _Opt("p", "--p", "int", 5, help="AR order"),
    _Opt("d", "--d", "int", 1, help="differencing order"),
    _Opt("q", "--q", "int", 5, help="MA order"),
    _Opt("hidden", "--hidden", "int", 64, help="LSTM hidden width"),
    _Opt("truncation", "--truncation", "int", 32, help="BPTT truncation length"),
    _Opt("lr", "--lr", "float", 1e-3, help="Adam learning rate"),
    _Opt("epochs", "--epochs", "int", 200, help="LSTM training epochs"),
    _Opt("batch_size", "--batch-size", "int", 1, help="segments per optimizer step"),
    _Opt("train_seed", "--train-seed", "int", 0, help="LSTM weight-init seed"),
    _Opt("train_trace", "--train-trace", "str", help="trace file the LSTM trains on"),
)

OPTIONS: dict[str, tuple[_Opt, ...]] = {
    "synth": (
        _Opt("layers", "--layers", "int", 1, help="number of MoE layers"),
        _Opt("experts", "--experts", "int", 16, help="experts per layer"),
        _Opt("tokens", "--tokens", "int", 65536, help="tokens routed per iteration"),
        _Opt("iters", "--iters", "int", 1000, help="number of iterations"),
        _Opt("sigma0", "--sigma0", "float", 0.2, help="initial logit step size"),
        _Opt("sigma_inf", "--sigma-inf", "float", 0.005, help="late logit step size"),
        _Opt("decay_t", "--decay-t", "float", 1000.0, help="step-size decay constant"),
        _Opt("temperature", "--temperature", "float", 1.0, help="softmax temperature"),
        _Opt("seed", "--seed", "int", 0, help="PRNG seed"),
        _Opt("hard_transition_at", "--hard-transition-at", "int",
             help="iteration where the step size drops abruptly"),
        _OUT,
    ),
    "stats": (
        _Opt("trace", "--trace", "str", required=True, help="input trace file"),
        _Opt("layer", "--layer", "int",
             help="layer id; may be omitted for single-layer traces"),
        _Opt("window", "--window", "int", 100, help="window length"),
        _Opt("stride", "--stride", "int", 1, help="window start spacing"),
        _Opt("metric", "--metric", "str", "variance",
             choices=("variance", "range"), help="statistic to emit"),
        _OUT,
    ),
    "detect": (
        _Opt("trace", "--trace", "str", required=True, help="input trace file"),
        _Opt("window", "--window", "int", 100, help="block length"),
        _Opt("tau", "--tau", "float", 0.5, help="quiet threshold as a multiple of 1/E"),
        _Opt("consec", "--consec", "int", 5, help="consecutive quiet blocks required"),
        _OUT,
    ),
    "forecast": (
        _Opt("trace", "--trace", "str", required=True, help="history trace file"),
        _Opt("method", "--method", "str", required=True,
             choices=("sw_avg", "arima", "lstm"), help="forecasting method"),
        _Opt("horizon", "--horizon", "int", 1000, help="steps to forecast"),
        *_METHOD_OPTS,
        _OUT,
    ),
    "eval": (
        _Opt("trace", "--trace", "str", required=True, help="test trace file"),
        _Opt("method", "--method", "str", required=True,
             choices=("sw_avg", "arima", "lstm", "oracle"),
             help="forecasting method: sw_avg, arima or lstm"),
        _Opt("horizon", "--horizon", "int", 1000, help="forecast horizon k"),
        _Opt("mode", "--mode", "str", "blocked",
             choices=("sliding", "blocked"), help="evaluation protocol"),
        _Opt("stride", "--stride", "int", 1, help="origin spacing (sliding mode)"),
        _Opt("metric", "--metric", "str", "mean_relative",
             choices=("mean_relative", "total_variation"), help="headline error metric"),
        _Opt("epsilon", "--epsilon", "float", 1e-6,
             help="denominator floor for mean_relative"),
        _Opt("stepwise", "--stepwise", "flag", False,
             help="score each step instead of block means"),
        *_METHOD_OPTS,
        _OUT,
    ),
    "advise": (
        _Opt("forecast", "--forecast", "str", required=True,
             help="forecast table produced by the forecast command"),
        _Opt("ranges", "--ranges", "str",
             help="range stats table for the layer (headroom mode)"),
        _Opt("experts_per_layer", "--experts-per-layer", "int",
             help="series per layer in the forecast table; default: all of them"),
        _Opt("layer", "--layer", "int", 0, help="layer position to plan for"),
        _Opt("total_units", "--total-units", "int", required=True,
             help="integer resource budget to apportion"),
        _Opt("min_units", "--min-units", "int", 0, help="guaranteed units per expert"),
        _Opt("mode", "--mode", "str", "proportional",
             choices=("proportional", "headroom"), help="allocation mode"),
        _OUT,
    ),
}

_KIND_TYPES = {"int": int, "float": float, "str": str}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moeload",
        description="Expert-load trace analysis, forecasting and allocation planning.",
    )
    parser.add_argument("--version", action="version", version=f"moeload {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True, metavar="command")
    for name, opts in OPTIONS.items():
        sub = subs.add_parser(name)
        sub.add_argument("--config", default=None,
                         help="JSON file of option values; flags take precedence")
        for opt in opts:
            flags = [*opt.extra_flags, opt.flag]
            if opt.kind == "flag":
                # default None so "absent" is distinguishable from "false"
                sub.add_argument(*flags, dest=opt.dest, action="store_true",
                                 default=None, help=opt.help)
            else:
                sub.add_argument(*flags, dest=opt.dest, type=_KIND_TYPES[opt.kind],
                                 default=None, choices=opt.choices or None,
                                 help=opt.help)
    return parser


def _coerce(opt: _Opt, value, source: str):
    ok = {
        "flag": lambda v: isinstance(v, bool),
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "str": lambda v: isinstance(v, str),
    }[opt.kind]
    if not ok(value):
        raise UsageError(f"{source}: {opt.dest} must be a {opt.kind}, got {value!r}")
    return float(value) if opt.kind == "float" else value


def _load_config_file(path: str, opts: tuple[_Opt, ...]) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    known = {opt.dest: opt for opt in opts}
    out = {}
    for key, value in raw.items():
        if key not in known:
            raise UsageError(f"config file {path}: unknown option {key!r}")
        if value is not None:
            out[key] = _coerce(known[key], value, path)
    return out


def _resolve(args: argparse.Namespace) -> dict:
    """Apply flag > config file > default precedence for one subcommand."""
    opts = OPTIONS[args.subcommand]
    file_cfg = _load_config_file(args.config, opts) if args.config else {}
    resolved = {}
    for opt in opts:
        value = getattr(args, opt.dest)
        if value is None:
            value = file_cfg.get(opt.dest, opt.default)
        if value is None and opt.required:
            raise UsageError(f"{args.subcommand}: missing required option {opt.flag}")
        if value is not None and opt.choices and value not in opt.choices:
            raise UsageError(
                f"{opt.flag}: invalid choice {value!r} (choose from {', '.join(opt.choices)})")
        resolved[opt.dest] = value
    return resolved


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _layer_slices(trace):
    e = trace.experts_per_layer
    return tuple((i * e, (i + 1) * e) for i in range(len(trace.moe_layer_ids)))


def _cmd_synth(cfg):
    scfg = SynthConfig(
        num_layers=cfg["layers"],
        experts_per_layer=cfg["experts"],
        tokens_per_iteration=cfg["tokens"],
        num_iterations=cfg["iters"],
        sigma0=cfg["sigma0"],
        sigma_inf=cfg["sigma_inf"],
        decay_T=cfg["decay_t"],
        temperature=cfg["temperature"],
        seed=cfg["seed"],
        hard_transition_at=cfg["hard_transition_at"],
    )
    write_trace(generate_trace(scfg), cfg["out"])
    return [], [cfg["out"], meta_path(cfg["out"])], cfg["seed"]


def _cmd_stats(cfg):
    trace = read_trace(cfg["trace"])
    layer = cfg["layer"]
    if layer is None:
        if len(trace.moe_layer_ids) != 1:
            raise UsageError("--layer is required for a multi-layer trace")
        layer = trace.moe_layer_ids[0]
        cfg["layer"] = layer  # echo the late-resolved value into the manifest
    props = to_proportions(trace, layer)
    stats = layer_window_stats(props, WindowConfig(cfg["window"], cfg["stride"]))
    values = stats.variance if cfg["metric"] == "variance" else stats.range
    columns = ["window_start"] + [f"expert_{j}" for j in range(values.shape[1])]
    rows = ([int(s), *row] for s, row in zip(stats.start_iterations, values))
    write_table(rows, columns, cfg["out"])
    return [cfg["trace"]], [cfg["out"]], None


def _cmd_detect(cfg):
    trace = read_trace(cfg["trace"])
    layers = []
    for layer in trace.moe_layer_ids:
        timeline = detect_state(to_proportions(trace, layer),
                                w=cfg["window"], tau_rho=cfg["tau"],
                                consec_C=cfg["consec"])
        layers.append({
            "layer": layer,
            "transition": timeline.transition_iteration,
            "stable_iterations": int(timeline.stable_mask().sum()),
        })
    write_json({
        "format_version": 1,
        "window": cfg["window"],
        "tau_rho": cfg["tau"],
        "consec": cfg["consec"],
        "num_iterations": trace.num_iterations,
        "layers": layers,
    }, cfg["out"])
    return [cfg["trace"]], [cfg["out"]], None


def _method_config(cfg):
    method = cfg["method"]
    if method == "sw_avg":
        return SwAvgConfig(window=cfg["window"])
    if method == "arima":
        return ArimaOrder(cfg["p"], cfg["d"], cfg["q"])
    if method == "lstm":
        return LstmConfig(hidden_dim=cfg["hidden"], truncation=cfg["truncation"],
                          learning_rate=cfg["lr"], epochs=cfg["epochs"],
                          batch_size=cfg["batch_size"], seed=cfg["train_seed"])
    return None  # oracle needs no configuration


def _cmd_forecast(cfg):
    trace = read_trace(cfg["trace"])
    inputs = [cfg["trace"]]
    train_data = None
    if cfg["method"] == "lstm":
        if cfg["train_trace"] is None:
            raise UsageError("--train-trace is required for the lstm method")
        train_data = flatten_all_experts(read_trace(cfg["train_trace"]))
        inputs.append(cfg["train_trace"])
    result = forecast(ForecastRequest(
        history=flatten_all_experts(trace),
        horizon=cfg["horizon"],
        method=cfg["method"],
        config=_method_config(cfg),
        layer_slices=_layer_slices(trace),
        train_data=train_data,
    ))
    # step = absolute iteration index of the forecast row
    n = trace.num_iterations
    columns = ["step"] + [f"series_{j}" for j in range(result.predictions.shape[1])]
    rows = ([n + s, *row] for s, row in enumerate(result.predictions))
    write_table(rows, columns, cfg["out"])
    diag_path = cfg["out"] + ".diag.json"
    write_json({
        "format_version": 1,
        "method": cfg["method"],
        "horizon": cfg["horizon"],
        "diagnostics": _jsonable(result.diagnostics),
    }, diag_path)
    seed = cfg["train_seed"] if cfg["method"] == "lstm" else None
    return inputs, [cfg["out"], diag_path], seed


def _cmd_eval(cfg):
    trace_test = read_trace(cfg["trace"])
    inputs = [cfg["trace"]]
    trace_train = None
    if cfg["train_trace"] is not None:
        trace_train = read_trace(cfg["train_trace"])
        inputs.append(cfg["train_trace"])
    if cfg["method"] == "lstm" and trace_train is None:
        raise UsageError("--train-trace is required for the lstm method")
    ecfg = EvalConfig(horizon=cfg["horizon"], mode=cfg["mode"], stride=cfg["stride"],
                      metric=cfg["metric"], epsilon=cfg["epsilon"],
                      stepwise=bool(cfg["stepwise"]))
    run = sliding_eval if cfg["mode"] == "sliding" else blocked_eval
    report = run(trace_train, trace_test, cfg["method"], ecfg, _method_config(cfg))

    origin_col = "origin_iteration" if cfg["mode"] == "sliding" else "block_start"
    rows = [[int(origin), layer, report.errors[i, li]]
            for i, origin in enumerate(report.origins)
            for li, layer in enumerate(report.layer_ids)]
    write_table(rows, [origin_col, "layer", "error"], cfg["out"])

    summary_path = cfg["out"] + ".summary.json"
    write_json({
        "format_version": 1,
        "mode": report.mode,
        "method": report.method,
        "metric": report.metric,
        "horizon": cfg["horizon"],
        "stride": cfg["stride"],
        "stepwise": bool(cfg["stepwise"]),
        "num_origins": int(report.origins.size),
        "overall_mean": report.overall_mean,
        "per_layer_mean": {str(layer): float(v)
                           for layer, v in zip(report.layer_ids, report.per_layer_mean)},
        "metrics": {report.metric: report.overall_mean,
                    report.alt_metric: report.alt_overall_mean},
    }, summary_path)
    seed = cfg["train_seed"] if cfg["method"] == "lstm" else None
    return inputs, [cfg["out"], summary_path], seed


def _cmd_advise(cfg):
    columns, data = read_table(cfg["forecast"])
    if len(columns) < 2 or columns[0] != "step":
        raise ParseError(1, "forecast table must have columns step, series_0, ...")
    if data.shape[0] == 0:
        raise ParseError(2, "forecast table has no rows")
    preds = data[:, 1:]
    width = preds.shape[1]
    e = cfg["experts_per_layer"] if cfg["experts_per_layer"] is not None else width
    if e < 1 or width % e != 0:
        raise UsageError(
            f"--experts-per-layer {e} does not divide the {width} forecast series")
    cfg["experts_per_layer"] = e
    num_layers = width // e
    layer = cfg["layer"]
    if not 0 <= layer < num_layers:
        raise UsageError(f"--layer {layer} out of range for {num_layers} layer(s)")
    a, b = layer * e, (layer + 1) * e

    mean_pred = np.clip(preds[:, a:b].mean(axis=0), 0.0, None)
    total = float(mean_pred.sum())
    if total <= 0.0:
        raise ZeroRowSum(0)
    p = mean_pred / total

    inputs = [cfg["forecast"]]
    if cfg["mode"] == "headroom":
        if cfg["ranges"] is None:
            raise UsageError("--ranges is required for headroom mode")
        _, rdata = read_table(cfg["ranges"])
        if rdata.shape[0] == 0 or rdata.shape[1] != 1 + e:
            raise ParseError(
                1, f"ranges table must have a start column plus {e} expert columns")
        recent = rdata[-1, 1:]  # most recent window's per-expert ranges
        plan = headroom_allocate(p, recent, cfg["total_units"],
                                 min_units=cfg["min_units"], layer_id=layer)
        inputs.append(cfg["ranges"])
    else:
        plan = allocate(p, cfg["total_units"], min_units=cfg["min_units"],
                        layer_id=layer)
    write_json({
        "format_version": 1,
        "layer": plan.layer_id,
        "mode": plan.mode,
        "total_units": plan.total_units,
        "min_units": cfg["min_units"],
        "units": [int(u) for u in plan.units_per_expert],
    }, cfg["out"])
    return inputs, [cfg["out"]], None


_HANDLERS = {
    "synth": _cmd_synth,
    "stats": _cmd_stats,
    "detect": _cmd_detect,
    "forecast": _cmd_forecast,
    "eval": _cmd_eval,
    "advise": _cmd_advise,
}


def manifest_path(out: str) -> str:
    return f"{out}.manifest.json"


def manifest_to_argv(manifest: dict) -> list[str]:
    """Reconstruct the argv that reproduces a manifest's run.

    Resolved values are emitted as explicit flags, so the rerun needs
    neither the original config file nor the original defaults.
    """
    sub = manifest.get("subcommand")
    if sub not in OPTIONS:
        raise InvalidConfig(f"manifest names unknown subcommand {sub!r}")
    config = manifest.get("config", {})
    argv = [sub]
    for opt in OPTIONS[sub]:
        value = config.get(opt.dest)
        if value is None:
            continue
        if opt.kind == "flag":
            if value:
                argv.append(opt.flag)
        else:
            argv.extend([opt.flag, str(value)])
    return argv


def _write_manifest(subcommand: str, cfg: dict, inputs, outputs, seed) -> None:
    write_json({
        "manifest_version": MANIFEST_VERSION,
        "tool": "moeload",
        "tool_version": __version__,
        "subcommand": subcommand,
        "config": cfg,
        "inputs": list(inputs),
        "outputs": list(outputs),
        "seed": seed,
    }, manifest_path(cfg["out"]))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help and usage errors
        return exc.code if isinstance(exc.code, int) else 2
    try:
        cfg = _resolve(args)
        inputs, outputs, seed = _HANDLERS[args.subcommand](cfg)
        _write_manifest(args.subcommand, cfg, inputs, outputs, seed)
    except (UsageError, InvalidConfig, InfeasibleMinimum) as exc:
        print(f"moeload: error: {exc}", file=sys.stderr)
        return 2
    except (MoeLoadError, OSError) as exc:
        print(f"moeload: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
