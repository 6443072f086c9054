"""Turn a load forecast into integer capacity units for one layer."""
import numpy as np

from moeload import (
    SwAvgConfig,
    SynthConfig,
    WindowConfig,
    allocate,
    generate_trace,
    headroom_allocate,
    layer_window_stats,
    sw_avg_forecast,
    to_proportions,
)

TOTAL_UNITS = 64
LOOKAHEAD = 500
WINDOW = 200


def main():
    trace = generate_trace(SynthConfig(
        num_layers=1, experts_per_layer=16, tokens_per_iteration=65_536,
        num_iterations=2_000, sigma0=0.12, sigma_inf=0.004, decay_T=350.0,
        temperature=2.0, seed=23))
    props = to_proportions(trace, 0)

    # predict each expert's share over the next LOOKAHEAD iterations
    predicted = np.array([
        sw_avg_forecast(props.values[:, j], WINDOW, LOOKAHEAD).mean()
        for j in range(trace.experts_per_layer)
    ])
    predicted = np.clip(predicted, 0.0, None)
    predicted /= predicted.sum()

    # recent per-expert range, the volatility the headroom mode pads for
    stats = layer_window_stats(props, WindowConfig(window_size=WINDOW))
    recent_range = stats.range[-1]

    flat = allocate(predicted, TOTAL_UNITS, min_units=1)
    padded = headroom_allocate(predicted, recent_range, TOTAL_UNITS, min_units=1)

    print(f"{TOTAL_UNITS} units over {trace.experts_per_layer} experts, "
          f"next {LOOKAHEAD} iterations\n")
    print(f"{'expert':>6} {'predicted':>10} {'range':>8} {'plain':>6} {'padded':>7}")
    for j in range(trace.experts_per_layer):
        mark = " <-" if padded.units_per_expert[j] != flat.units_per_expert[j] else ""
        print(f"{j:>6} {predicted[j]:>10.4f} {recent_range[j]:>8.4f} "
              f"{flat.units_per_expert[j]:>6d} {padded.units_per_expert[j]:>7d}{mark}")
    print(f"\nsums: plain {flat.units_per_expert.sum()}, "
          f"padded {padded.units_per_expert.sum()}")


if __name__ == "__main__":
    main()
