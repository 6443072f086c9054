"""Expert-load telemetry toolkit for Mixture-of-Experts training runs.

Load traces record how many tokens each expert of each MoE layer received
per training iteration. This package turns such traces into windowed
dispersion statistics, detects when expert loads settle down, forecasts
future load proportions (sliding-window average, ARIMA, LSTM), scores
forecasts under sliding and blocked protocols, and converts predictions
into integer resource allocation plans.
"""
__version__ = "0.1.0"

from .allocate import AllocationPlan, allocate, headroom_allocate
from .errors import (
    CoverageMismatch,
    DivergedLoss,
    HistoryTooShort,
    IndexOutOfRange,
    InfeasibleMinimum,
    InsufficientData,
    InvalidConfig,
    IoError,
    LengthMismatch,
    MoeLoadError,
    NonContiguousIterations,
    NonFiniteForecast,
    NonStationaryCoefficients,
    ParseError,
    RangeOutOfBounds,
    SeriesTooShort,
    ShapeMismatch,
    TraceTooShort,
    UnknownLayer,
    ValidationError,
    ZeroRowSum,
)
from .evaluate import (
    EvalConfig,
    EvalReport,
    StateSummary,
    blocked_eval,
    error_rate,
    sampling_error_floor,
    sliding_eval,
    state_conditioned_summary,
)
from .forecasters import (
    ArimaModel,
    ArimaOrder,
    ForecastRequest,
    ForecastResult,
    LstmConfig,
    LstmForecaster,
    SwAvgConfig,
    anchored_mean,
    arima_forecast,
    difference,
    fit_arima,
    forecast,
    integrate,
    loss_and_gradients,
    lstm_forecast,
    lstm_forward,
    lstm_train,
    select_d,
    simplex_project,
    sw_avg_forecast,
)
from .io import (
    FORMAT_VERSION,
    format_number,
    meta_path,
    read_table,
    read_trace,
    write_json,
    write_table,
    write_trace,
)
from .synth import ArmaSynthConfig, SynthConfig, generate_arma, generate_trace
from .trace import (
    LoadTrace,
    ProportionSeries,
    expert_series,
    flatten_all_experts,
    to_proportions,
)
from .windows import (
    StateTimeline,
    WindowConfig,
    WindowStats,
    detect_state,
    layer_window_stats,
    window_range,
    window_variance,
)

__all__ = [
    "__version__",
    "AllocationPlan",
    "allocate",
    "headroom_allocate",
    "CoverageMismatch",
    "DivergedLoss",
    "HistoryTooShort",
    "IndexOutOfRange",
    "InfeasibleMinimum",
    "InsufficientData",
    "InvalidConfig",
    "IoError",
    "LengthMismatch",
    "MoeLoadError",
    "NonContiguousIterations",
    "NonFiniteForecast",
    "NonStationaryCoefficients",
    "ParseError",
    "RangeOutOfBounds",
    "SeriesTooShort",
    "ShapeMismatch",
    "TraceTooShort",
    "UnknownLayer",
    "ValidationError",
    "ZeroRowSum",
    "EvalConfig",
    "EvalReport",
    "StateSummary",
    "blocked_eval",
    "error_rate",
    "sampling_error_floor",
    "sliding_eval",
    "state_conditioned_summary",
    "ArimaModel",
    "ArimaOrder",
    "ForecastRequest",
    "ForecastResult",
    "LstmConfig",
    "LstmForecaster",
    "SwAvgConfig",
    "anchored_mean",
    "arima_forecast",
    "difference",
    "fit_arima",
    "forecast",
    "integrate",
    "loss_and_gradients",
    "lstm_forecast",
    "lstm_forward",
    "lstm_train",
    "select_d",
    "simplex_project",
    "sw_avg_forecast",
    "FORMAT_VERSION",
    "format_number",
    "meta_path",
    "read_table",
    "read_trace",
    "write_json",
    "write_table",
    "write_trace",
    "ArmaSynthConfig",
    "SynthConfig",
    "generate_arma",
    "generate_trace",
    "LoadTrace",
    "ProportionSeries",
    "expert_series",
    "flatten_all_experts",
    "to_proportions",
    "StateTimeline",
    "WindowConfig",
    "WindowStats",
    "detect_state",
    "layer_window_stats",
    "window_range",
    "window_variance",
]
