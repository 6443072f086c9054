"""Watch a routing run settle.

Generates a multi-layer expert-load trace whose walk noise decays over
training, runs the transient/stable detector on every layer, then prints a
short trail of windowed dispersion around the first detected transition so
you can see what the detector saw.
"""
import numpy as np

from moeload import (
    SynthConfig,
    WindowConfig,
    detect_state,
    generate_trace,
    layer_window_stats,
    to_proportions,
)

W = 100          # detector block size, also the reporting window
TAU_RHO = 0.5    # quiet means every expert's range < TAU_RHO / num_experts
CONSEC = 5


def main():
    cfg = SynthConfig(
        num_layers=4,
        experts_per_layer=16,
        tokens_per_iteration=65_536,
        num_iterations=3_000,
        sigma0=0.15,
        sigma_inf=0.002,
        decay_T=400.0,
        temperature=2.0,
        seed=7,
    )
    trace = generate_trace(cfg)
    print(f"trace: {len(trace.moe_layer_ids)} layers x {trace.num_iterations} iterations, "
          f"{trace.experts_per_layer} experts, {cfg.tokens_per_iteration} tokens/iteration")
    print(f"detector: w={W}, tau_rho={TAU_RHO}, consec={CONSEC}\n")

    timelines = {}
    for layer in trace.moe_layer_ids:
        props = to_proportions(trace, layer)
        timelines[layer] = detect_state(props, w=W, tau_rho=TAU_RHO, consec_C=CONSEC)

    for layer, tl in timelines.items():
        t_star = tl.transition_iteration
        if t_star is None:
            print(f"layer {layer}: never settles within the trace")
        else:
            stable_share = tl.stable_mask().mean()
            print(f"layer {layer}: stable from iteration {t_star} "
                  f"({stable_share:.0%} of the trace)")

    # zoom in on one layer: per-window worst-expert range vs the quiet bar
    layer = trace.moe_layer_ids[0]
    t_star = timelines[layer].transition_iteration
    if t_star is None:
        return
    props = to_proportions(trace, layer)
    stats = layer_window_stats(props, WindowConfig(window_size=W, stride=W))
    bar = TAU_RHO / trace.experts_per_layer

    print(f"\nlayer {layer} around the transition (quiet bar {bar:.6f}):")
    print(f"{'window start':>12}  {'worst range':>11}  {'worst variance':>14}  state")
    # the quiet run ends at t_star, so back up past its start to catch the flip
    run_start = t_star // W - CONSEC
    lo = max(0, run_start - 3)
    for i in range(lo, min(stats.num_windows, run_start + CONSEC + 2)):
        start = int(stats.start_iterations[i])
        worst_r = stats.range[i].max()
        worst_v = stats.variance[i].max()
        label = "quiet" if worst_r < bar else "loud"
        print(f"{start:>12}  {worst_r:>11.6f}  {worst_v:>14.3e}  {label}")


if __name__ == "__main__":
    main()
