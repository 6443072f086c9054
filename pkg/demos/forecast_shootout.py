"""Backtest the forecasters on one settling trace.

Blocked protocol: the trace is cut into horizon-sized blocks, each method
predicts a whole block from everything before it, and a block's error is
the mean-relative gap between predicted and realized block means. The
sampling floor at the bottom is the error a perfect forecaster would still
pay because token counts are finite.

The table is deliberately not a beauty contest. It shows two classic
long-horizon footguns next to the method that avoids them.
"""
import time

from moeload import (
    ArimaOrder,
    EvalConfig,
    LstmConfig,
    SwAvgConfig,
    SynthConfig,
    blocked_eval,
    detect_state,
    generate_trace,
    lstm_train,
    sampling_error_floor,
    state_conditioned_summary,
    to_proportions,
)

HORIZON = 750
SW_WINDOW = 200


def main():
    cfg = SynthConfig(
        num_layers=1,
        experts_per_layer=8,
        tokens_per_iteration=65_536,
        num_iterations=3_000,
        sigma0=0.12,
        sigma_inf=0.001,
        decay_T=300.0,
        temperature=2.0,
        seed=11,
    )
    trace = generate_trace(cfg)
    props = to_proportions(trace, 0)
    timeline = detect_state(props, w=100, tau_rho=0.5, consec_C=5)
    print(f"trace: {trace.num_iterations} iterations, {trace.experts_per_layer} experts; "
          f"stable from iteration {timeline.transition_iteration}")

    # train the LSTM only on rows before the first scored block, so nothing
    # it is graded on ever leaked into training
    lstm = lstm_train(props.values[:HORIZON],
                      LstmConfig(hidden_dim=32, truncation=32, learning_rate=1e-3,
                                 epochs=200, seed=0))
    print(f"lstm pre-training on [0, {HORIZON}): "
          f"loss {lstm.initial_loss:.2e} -> {lstm.final_loss:.2e}")

    ecfg = EvalConfig(horizon=HORIZON, mode="blocked")
    contenders = [
        ("sw_avg w=200", "sw_avg", SwAvgConfig(window=SW_WINDOW)),
        ("arima (2,0,2)", "arima", ArimaOrder(p=2, d=0, q=2)),
        ("arima (2,1,2)", "arima", ArimaOrder(p=2, d=1, q=2)),
        ("lstm h=32", "lstm", lstm),
    ]

    print(f"\nblocked backtest, horizon {HORIZON}:")
    print(f"{'method':<14} {'mean rel':>9} {'total var':>10} {'stable-only':>12} {'time':>6}")
    for label, method, method_cfg in contenders:
        t0 = time.perf_counter()
        report = blocked_eval(trace, trace, method, ecfg, method_cfg)
        took = time.perf_counter() - t0
        summary = state_conditioned_summary(report, timeline)
        stable = "-" if summary.stable_mean is None else f"{summary.stable_mean:.5f}"
        print(f"{label:<14} {report.overall_mean:>9.5f} {report.alt_overall_mean:>10.5f} "
              f"{stable:>12} {took:>5.1f}s")

    floor = sampling_error_floor(1.0 / trace.experts_per_layer,
                                 cfg.tokens_per_iteration, HORIZON, SW_WINDOW)
    print(f"\nsampling floor at this horizon/window: {floor:.5f}")
    print("what to read off this table:")
    print(" - trailing-window averages are hard to beat once loads settle")
    print(" - d=1 learns the average historical drift, then extrapolates it across")
    print("   the regime change; bounded shares want d=0 here")
    print(" - the lstm only ever saw the transient opening, and a 750-step")
    print("   closed-loop rollout compounds whatever it got wrong")


if __name__ == "__main__":
    main()
