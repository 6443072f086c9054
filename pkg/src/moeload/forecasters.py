"""Load-proportion forecasting: sliding-window average, ARIMA, and LSTM.

Three algorithms behind one dispatcher. The sliding-window average and
ARIMA treat each expert's proportion series independently; the LSTM models
the flattened all-layers vector jointly, one row per iteration. Raw model
outputs are renormalized onto the per-layer probability simplex before they
leave this module; a non-finite output is an error, never clamped.

Window and intercept means are computed as x[0] + mean(x - x[0]) so that a
constant window returns the constant bit-for-bit; predictions that feed
back into their own window then admit an exact fixed point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import (
    DivergedLoss,
    HistoryTooShort,
    InsufficientData,
    InvalidConfig,
    LengthMismatch,
    NonFiniteForecast,
    SeriesTooShort,
    ShapeMismatch,
)
from .trace import _freeze

METHODS = ("sw_avg", "arima", "lstm")

CSS_MAX_ITER = 500
CSS_FTOL = 1e-10

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def anchored_mean(x: np.ndarray) -> float:
    """Mean computed as x[0] + mean(x - x[0]); exact on constant input."""
    return float(x[0] + np.mean(x - x[0]))


# ---------------------------------------------------------------------------
# sliding-window average


def sw_avg_forecast(history, w: int, k: int) -> np.ndarray:
    """Mean of the trailing w values, rolled forward k steps.

    Step 1 averages the last w actuals; every later step averages the last
    w entries of actuals extended by the predictions made so far.
    """
    x = np.asarray(history, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidConfig("history must be a 1-D series")
    if w < 1:
        raise InvalidConfig("window must be >= 1")
    if k < 0:
        raise InvalidConfig("horizon must be >= 0")
    if x.size < w:
        raise HistoryTooShort(f"history length {x.size} < window {w}")
    buf = np.empty(w + k, dtype=np.float64)
    buf[:w] = x[x.size - w :]
    for s in range(k):
        buf[w + s] = anchored_mean(buf[s : s + w])
    return buf[w:].copy()


# ---------------------------------------------------------------------------
# differencing


def difference(series, d: int) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise InvalidConfig("d must be non-negative")
    if x.size <= d:
        raise SeriesTooShort(f"length {x.size} <= d = {d}")
    return x.copy() if d == 0 else np.diff(x, n=d)


def integrate(diffed, d: int, anchors) -> np.ndarray:
    """Invert d-fold differencing given the first d values of the original."""
    y = np.asarray(diffed, dtype=np.float64).copy()
    a = np.asarray(anchors, dtype=np.float64)
    if d < 0:
        raise InvalidConfig("d must be non-negative")
    if a.size != d:
        raise LengthMismatch(f"need exactly {d} anchor values, got {a.size}")
    for level in range(d - 1, -1, -1):
        head = np.diff(a[: level + 1], n=level)[0]
        y = np.cumsum(np.concatenate(([head], y)))
    return y


def select_d(series, d_max: int) -> int:
    """Smallest d whose differenced series does not get calmer when
    differenced once more (variance test), capped at d_max."""
    x = np.asarray(series, dtype=np.float64)
    if d_max < 0:
        raise InvalidConfig("d_max must be non-negative")
    if x.size <= d_max + 10:
        raise SeriesTooShort(f"length {x.size} <= d_max + 10 = {d_max + 10}")
    for d in range(d_max):
        if np.var(difference(x, d)) <= np.var(difference(x, d + 1)):
            return d
    return d_max


# ---------------------------------------------------------------------------
# ARIMA


@dataclass(frozen=True)
class ArimaOrder:
    p: int = 5
    d: int = 1
    q: int = 5

    def __post_init__(self):
        if self.p < 0 or self.d < 0 or self.q < 0:
            raise InvalidConfig("p, d, q must be non-negative")


@dataclass(frozen=True)
class ArimaModel:
    p: int
    d: int
    q: int
    phi: tuple[float, ...]
    theta: tuple[float, ...]
    intercept: float
    sigma2: float
    converged: bool = True
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if len(self.phi) != self.p or len(self.theta) != self.q:
            raise InvalidConfig("coefficient counts must match p and q")
        coeffs = self.phi + self.theta + (self.intercept,)
        if not all(np.isfinite(coeffs)):
            raise InvalidConfig("coefficients must be finite")
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise InvalidConfig("sigma2 must be finite and non-negative")


def _conditional_residuals(w: np.ndarray, phi, theta, c: float) -> np.ndarray:
    """One-step residuals conditioning on the first p values; residuals
    before the sample start are zero. Returns e_t for t = p .. n-1."""
    n = w.size
    p = len(phi)
    u = w[p:] - c
    for i, ph in enumerate(phi, start=1):
        u = u - ph * w[p - i : n - i]
    if len(theta):
        return lfilter([1.0], np.concatenate(([1.0], theta)), u)
    return u


def _css(w: np.ndarray, p: int, q: int, params: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        e = _conditional_residuals(w, params[:p], params[p : p + q], params[p + q])
        val = float(e @ e)
    return val if np.isfinite(val) else 1e300


def fit_arima(series, p: int, d: int, q: int) -> ArimaModel:
    """Two-stage fit: a long autoregression supplies residual proxies for a
    least-squares start (Hannan-Rissanen), then the conditional sum of
    squared one-step errors is refined with L-BFGS-B (at most 500
    iterations, relative objective tolerance 1e-10).

    If the refinement fails or does not improve, the stage-one estimates are
    returned with a diagnostic flag instead of raising.
    """
    if p < 0 or d < 0 or q < 0:
        raise InvalidConfig("p, d, q must be non-negative")
    x = np.asarray(series, dtype=np.float64)
    w = difference(x, d)
    n = w.size
    if n < 10 * (p + q + 1):
        raise SeriesTooShort(f"{n} values after differencing < 10*(p+q+1) = {10 * (p + q + 1)}")
    mu = anchored_mean(w)
    if p == 0 and q == 0:
        return ArimaModel(p, d, q, (), (), intercept=mu, sigma2=float(np.var(w)))

    flags: list[str] = []
    y = w - mu
    # stage 1: long AR of order max(20, 2(p+q)), capped so the later lag
    # design keeps at least p+q+1 rows
    h = max(20, 2 * (p + q))
    h = max(min(h, n - max(p, q) - (p + q) - 1), max(p, q, 1))
    lag_cols = [y[h - i : n - i] for i in range(1, h + 1)]
    beta, _, rank_l, _ = np.linalg.lstsq(np.column_stack(lag_cols), y[h:], rcond=None)
    if rank_l < h:
        flags.append("singular_long_ar")
    e = np.zeros(n)
    e[h:] = y[h:] - np.column_stack(lag_cols) @ beta

    start = max(h + q, p)
    design = [y[start - i : n - i] for i in range(1, p + 1)]
    design += [e[start - j : n - j] for j in range(1, q + 1)]
    coef, _, rank, _ = np.linalg.lstsq(np.column_stack(design), y[start:], rcond=None)
    if rank < p + q:
        flags.append("singular_stage1")
    c0 = mu * (1.0 - coef[:p].sum())
    x0 = np.concatenate([coef, [c0]])

    # stage 2: conditional-sum-of-squares refinement
    n_eff = n - p
    converged = True
    best = x0
    best_val = _css(w, p, q, x0)
    res = minimize(
        lambda v: _css(w, p, q, v),
        x0,
        method="L-BFGS-B",
        options={"maxiter": CSS_MAX_ITER, "ftol": CSS_FTOL},
    )
    if res.fun < best_val:
        best, best_val = res.x, float(res.fun)
    else:
        flags.append("refinement_no_improvement")
    if not res.success:
        converged = False
        flags.append("refinement_not_converged")
    return ArimaModel(
        p, d, q,
        phi=tuple(best[:p]),
        theta=tuple(best[p : p + q]),
        intercept=float(best[p + q]),
        sigma2=best_val / n_eff,
        converged=converged,
        flags=tuple(flags),
    )


def arima_forecast(model: ArimaModel, series, k: int) -> np.ndarray:
    """Iterate the fitted recursion k steps with future shocks set to zero,
    then integrate back through the last d actual values."""
    if k < 0:
        raise InvalidConfig("horizon must be >= 0")
    x = np.asarray(series, dtype=np.float64)
    w = difference(x, model.d)
    p, q = model.p, model.q
    if w.size < p + q:
        raise SeriesTooShort(f"need >= p+q = {p + q} values after differencing, got {w.size}")
    e = _conditional_residuals(w, model.phi, model.theta, model.intercept)
    wl = w.tolist()
    el = [0.0] * p + e.tolist()
    fut = []
    for _ in range(k):
        t = len(wl)
        val = model.intercept
        for i, ph in enumerate(model.phi, start=1):
            val += ph * wl[t - i]
        for j, th in enumerate(model.theta, start=1):
            val += th * el[t - j]
        wl.append(val)
        el.append(0.0)
        fut.append(val)

    tails = [difference(x, lvl)[-1] for lvl in range(model.d)]
    out = np.empty(k, dtype=np.float64)
    for s, val in enumerate(fut):
        cur = val
        for lvl in range(model.d - 1, -1, -1):
            cur = tails[lvl] + cur
            tails[lvl] = cur
        out[s] = cur
    return out


# ---------------------------------------------------------------------------
# LSTM


@dataclass(frozen=True)
class LstmConfig:
    hidden_dim: int = 64
    truncation: int = 32
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1 or self.truncation < 1 or self.batch_size < 1:
            raise InvalidConfig("hidden_dim, truncation, batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidConfig("learning_rate must be positive")
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")


@dataclass(frozen=True)
class LstmForecaster:
    """Single-layer LSTM with an affine output head.

    Gate pre-activations are packed in column blocks ordered input, forget,
    candidate, output: W maps inputs to the 4H block, U maps the previous
    hidden state, b is the packed bias. V and c form the output head.
    """

    input_dim: int
    hidden_dim: int
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    V: np.ndarray
    c: np.ndarray
    config: LstmConfig = field(default_factory=LstmConfig)
    final_loss: float | None = None
    initial_loss: float | None = None

    def __post_init__(self):
        d, h = self.input_dim, self.hidden_dim
        shapes = {"W": (d, 4 * h), "U": (h, 4 * h), "b": (4 * h,), "V": (h, d), "c": (d,)}
        for name, want in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != want:
                raise InvalidConfig(f"parameter {name} has shape {arr.shape}, expected {want}")
            if not np.isfinite(arr).all():
                raise InvalidConfig(f"parameter {name} contains non-finite values")
            object.__setattr__(self, name, _freeze(arr))

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "U": self.U, "b": self.b, "V": self.V, "c": self.c}


def _init_params(input_dim: int, cfg: LstmConfig) -> dict[str, np.ndarray]:
    h = cfg.hidden_dim
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / np.sqrt(h)
    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0  # forget-gate bias keeps early memory open
    return {
        "W": rng.uniform(-scale, scale, (input_dim, 4 * h)),
        "U": rng.uniform(-scale, scale, (h, 4 * h)),
        "b": b,
        "V": rng.uniform(-scale, scale, (h, input_dim)),
        "c": np.zeros(input_dim),
    }


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def _forward(params, X: np.ndarray, h0=None, c0=None, keep_cache=False):
    W, U, b, V, ch = params["W"], params["U"], params["b"], params["V"], params["c"]
    hdim = U.shape[0]
    h = np.zeros(hdim) if h0 is None else h0
    cst = np.zeros(hdim) if c0 is None else c0
    Y = np.empty((X.shape[0], V.shape[1]))
    cache = []
    for t in range(X.shape[0]):
        a = X[t] @ W + h @ U + b
        gi = _sigmoid(a[:hdim])
        gf = _sigmoid(a[hdim : 2 * hdim])
        gg = np.tanh(a[2 * hdim : 3 * hdim])
        go = _sigmoid(a[3 * hdim :])
        hprev, cprev = h, cst
        cst = gf * cst + gi * gg
        tc = np.tanh(cst)
        h = go * tc
        Y[t] = h @ V + ch
        if keep_cache:
            cache.append((X[t], hprev, cprev, gi, gf, gg, go, tc, h))
    return Y, h, cst, cache


def lstm_forward(forecaster: LstmForecaster, input_sequence) -> np.ndarray:
    """Run the recurrence over a [steps, input_dim] sequence; deterministic."""
    X = np.asarray(input_sequence, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forecaster.input_dim:
        raise ShapeMismatch(f"expected [steps, {forecaster.input_dim}] input, got {X.shape}")
    Y, _, _, _ = _forward(forecaster.params(), X)
    return Y


def _loss_grads(params, X, Z, h0=None, c0=None):
    """Mean squared one-step error and its gradients over one segment.

    Returns (loss, grads, h_end, c_end); the end states let the caller carry
    context across truncation boundaries without backpropagating through
    them.
    """
    Y, h_end, c_end, cache = _forward(params, X, h0, c0, keep_cache=True)
    T, D = Y.shape
    err = Y - Z
    loss = float(err.ravel() @ err.ravel()) / (T * D)
    dY = 2.0 * err / (T * D)

    W, U, V = params["W"], params["U"], params["V"]
    hdim = U.shape[0]
    g = {k: np.zeros_like(v) for k, v in params.items()}
    dh_next = np.zeros(hdim)
    dc_next = np.zeros(hdim)
    for t in range(T - 1, -1, -1):
        x_t, hprev, cprev, gi, gf, gg, go, tc, h_t = cache[t]
        dy = dY[t]
        g["V"] += np.outer(h_t, dy)
        g["c"] += dy
        dh = V @ dy + dh_next
        do = dh * tc
        dcst = dh * go * (1.0 - tc * tc) + dc_next
        di = dcst * gg
        df = dcst * cprev
        dg = dcst * gi
        da = np.concatenate([
            di * gi * (1.0 - gi),
            df * gf * (1.0 - gf),
            dg * (1.0 - gg * gg),
            do * go * (1.0 - go),
        ])
        g["W"] += np.outer(x_t, da)
        g["U"] += np.outer(hprev, da)
        g["b"] += da
        dh_next = U @ da
        dc_next = dcst * gf
    return loss, g, h_end, c_end


def loss_and_gradients(forecaster: LstmForecaster, inputs, targets, h0=None, c0=None):
    """One-step-ahead MSE and analytic parameter gradients (for checking
    against finite differences as much as for training)."""
    X = np.asarray(inputs, dtype=np.float64)
    Z = np.asarray(targets, dtype=np.float64)
    if X.shape != Z.shape or X.ndim != 2 or X.shape[1] != forecaster.input_dim:
        raise ShapeMismatch(f"inputs {X.shape} and targets {Z.shape} must both be [steps, {forecaster.input_dim}]")
    loss, g, _, _ = _loss_grads(forecaster.params(), X, Z, h0, c0)
    return loss, g


def _full_loss(params, inputs, targets) -> float:
    Y, _, _, _ = _forward(params, inputs)
    err = Y - targets
    return float(err.ravel() @ err.ravel()) / err.size


def lstm_train(data, config: LstmConfig | None = None) -> LstmForecaster:
    """Train by truncated backpropagation through time with Adam.

    The row sequence is split into truncation-length segments; hidden state
    flows across segment boundaries, gradients do not. One optimizer step is
    taken per batch_size segments. Deterministic given config.seed.
    """
    cfg = config if config is not None else LstmConfig()
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch("training data must be [rows, input_dim]")
    if X.shape[0] < cfg.truncation + 1:
        raise InsufficientData(f"{X.shape[0]} rows < truncation + 1 = {cfg.truncation + 1}")
    inp, tgt = X[:-1], X[1:]
    d = X.shape[1]
    params = _init_params(d, cfg)
    initial_loss = _full_loss(params, inp, tgt)

    bounds = list(range(0, inp.shape[0], cfg.truncation))
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(vv) for k, vv in params.items()}
    step = 0
    acc: dict[str, np.ndarray] | None = None
    acc_n = 0

    def apply_update():
        nonlocal step, acc, acc_n
        step += 1
        for key in params:
            gk = acc[key] / acc_n
            m[key] = ADAM_BETA1 * m[key] + (1 - ADAM_BETA1) * gk
            v[key] = ADAM_BETA2 * v[key] + (1 - ADAM_BETA2) * gk * gk
            mhat = m[key] / (1 - ADAM_BETA1**step)
            vhat = v[key] / (1 - ADAM_BETA2**step)
            params[key] = params[key] - cfg.learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)
        acc, acc_n = None, 0

    for _ in range(cfg.epochs):
        h = c0 = None
        for s in bounds:
            seg_in = inp[s : s + cfg.truncation]
            seg_tgt = tgt[s : s + cfg.truncation]
            loss, grads, h, c0 = _loss_grads(params, seg_in, seg_tgt, h, c0)
            if not np.isfinite(loss):
                raise DivergedLoss(f"training loss became {loss}")
            if acc is None:
                acc = grads
            else:
                for key in acc:
                    acc[key] += grads[key]
            acc_n += 1
            if acc_n == cfg.batch_size:
                apply_update()
        if acc_n:
            apply_update()

    final_loss = _full_loss(params, inp, tgt)
    if not np.isfinite(final_loss):
        raise DivergedLoss("final loss is not finite")
    return LstmForecaster(
        input_dim=d,
        hidden_dim=cfg.hidden_dim,
        **params,
        config=cfg,
        final_loss=final_loss,
        initial_loss=initial_loss,
    )


def simplex_project(row, layer_slices=None) -> np.ndarray:
    """Clamp negatives and renormalize each layer slice to sum 1; an
    all-zero slice falls back to the uniform distribution."""
    r = np.array(row, dtype=np.float64)
    if r.ndim != 1:
        raise InvalidConfig("expected a 1-D row")
    slices = _check_slices(layer_slices, r.size)
    for a, b in slices:
        seg = np.clip(r[a:b], 0.0, None)
        total = seg.sum()
        r[a:b] = seg / total if total > 0 else 1.0 / (b - a)
    return r


def _check_slices(layer_slices, width: int) -> tuple[tuple[int, int], ...]:
    if layer_slices is None:
        return ((0, width),)
    slices = tuple((int(a), int(b)) for a, b in layer_slices)
    pos = 0
    for a, b in slices:
        if a != pos or b <= a:
            raise InvalidConfig("layer slices must partition the row in order")
        pos = b
    if pos != width:
        raise InvalidConfig(f"layer slices cover {pos} of {width} columns")
    return slices


def lstm_forecast(forecaster: LstmForecaster, history, k: int, layer_slices=None) -> np.ndarray:
    """Closed-loop rollout: warm up on history, then feed each projected
    prediction back as the next input, k times."""
    X = np.asarray(history, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forecaster.input_dim or X.shape[0] < 1:
        raise ShapeMismatch(f"history must be [>=1, {forecaster.input_dim}], got {X.shape}")
    if k < 0:
        raise InvalidConfig("horizon must be >= 0")
    slices = _check_slices(layer_slices, forecaster.input_dim)
    params = forecaster.params()
    Y, h, cst, _ = _forward(params, X)
    out = np.empty((k, forecaster.input_dim))
    cur = Y[-1]
    for s in range(k):
        if not np.isfinite(cur).all():
            raise NonFiniteForecast(f"non-finite LSTM output at step {s + 1}")
        cur = simplex_project(cur, slices)
        out[s] = cur
        if s + 1 < k:
            y1, h, cst, _ = _forward(params, cur[None, :], h, cst)
            cur = y1[0]
    return out


# ---------------------------------------------------------------------------
# dispatcher


@dataclass(frozen=True)
class SwAvgConfig:
    window: int = 100

    def __post_init__(self):
        if self.window < 1:
            raise InvalidConfig("window must be >= 1")


@dataclass(frozen=True)
class ForecastRequest:
    """history is [iteration][series]; layer_slices mark where each layer's
    experts sit in the columns (one slice covering everything by default).
    config carries the per-method settings; for the LSTM it may instead be
    an already-trained LstmForecaster, otherwise train_data must supply the
    rows to train on."""

    history: np.ndarray
    horizon: int
    method: str
    config: object | None = None
    layer_slices: tuple[tuple[int, int], ...] | None = None
    train_data: np.ndarray | None = None

    def __post_init__(self):
        hist = np.asarray(self.history, dtype=np.float64)
        if hist.ndim != 2 or hist.size == 0:
            raise InvalidConfig("history must be a non-empty [iteration][series] array")
        if self.horizon < 1:
            raise InvalidConfig("horizon must be >= 1")
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}; expected one of {METHODS}")
        object.__setattr__(self, "history", _freeze(hist))
        object.__setattr__(self, "layer_slices", _check_slices(self.layer_slices, hist.shape[1]))
        if self.train_data is not None:
            object.__setattr__(self, "train_data",
                               _freeze(np.asarray(self.train_data, dtype=np.float64)))


@dataclass(frozen=True)
class ForecastResult:
    predictions: np.ndarray
    method: str
    config: object | None
    layer_slices: tuple[tuple[int, int], ...]
    diagnostics: dict

    def __post_init__(self):
        pred = np.asarray(self.predictions, dtype=np.float64)
        if not np.isfinite(pred).all():
            raise NonFiniteForecast("predictions contain non-finite values")
        if (pred < 0).any() or (pred > 1).any():
            raise NonFiniteForecast("predictions fall outside [0, 1]")
        for a, b in self.layer_slices:
            sums = pred[:, a:b].sum(axis=1)
            if pred.shape[0] and np.abs(sums - 1.0).max() > 1e-9:
                raise NonFiniteForecast(f"slice [{a}:{b}] does not sum to 1")
        object.__setattr__(self, "predictions", _freeze(pred))


def _project_rows(raw: np.ndarray, slices) -> np.ndarray:
    if not np.isfinite(raw).all():
        raise NonFiniteForecast("raw forecast contains non-finite values")
    return np.vstack([simplex_project(row, slices) for row in raw]) if raw.shape[0] else raw


def forecast(request: ForecastRequest) -> ForecastResult:
    """Dispatch to the requested method and renormalize per layer."""
    hist = request.history
    k = request.horizon
    slices = request.layer_slices
    diagnostics: dict = {}

    if request.method == "sw_avg":
        cfg = request.config if request.config is not None else SwAvgConfig()
        if not isinstance(cfg, SwAvgConfig):
            raise InvalidConfig("sw_avg expects a SwAvgConfig")
        raw = np.column_stack([sw_avg_forecast(hist[:, j], cfg.window, k)
                               for j in range(hist.shape[1])])
    elif request.method == "arima":
        cfg = request.config if request.config is not None else ArimaOrder()
        if not isinstance(cfg, ArimaOrder):
            raise InvalidConfig("arima expects an ArimaOrder")
        cols = []
        fits = []
        for j in range(hist.shape[1]):
            model = fit_arima(hist[:, j], cfg.p, cfg.d, cfg.q)
            fits.append({
                "phi": model.phi, "theta": model.theta,
                "intercept": model.intercept, "sigma2": model.sigma2,
                "converged": model.converged, "flags": model.flags,
            })
            cols.append(arima_forecast(model, hist[:, j], k))
        raw = np.column_stack(cols)
        diagnostics["models"] = fits
    else:  # lstm
        cfg = request.config
        if isinstance(cfg, LstmForecaster):
            fc = cfg
        else:
            if cfg is not None and not isinstance(cfg, LstmConfig):
                raise InvalidConfig("lstm expects an LstmConfig or a trained LstmForecaster")
            if request.train_data is None:
                raise InvalidConfig("lstm needs train_data or a trained LstmForecaster")
            fc = lstm_train(request.train_data, cfg)
        diagnostics["final_loss"] = fc.final_loss
        diagnostics["initial_loss"] = fc.initial_loss
        proj = lstm_forecast(fc, hist, k, slices)
        return ForecastResult(proj, request.method, request.config, slices, diagnostics)

    return ForecastResult(_project_rows(raw, slices), request.method,
                          request.config, slices, diagnostics)
