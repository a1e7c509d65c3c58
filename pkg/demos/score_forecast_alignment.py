"""
Scoring a lagged forecast: skill, quantile error, temporal distortion
=====================================================================

"""

# a synthetic irradiance day: smooth ramp with two cloud dips
import numpy as np

t = np.arange(300)
truth = 600 + 250 * np.sin(t / 90) - 180 * np.exp(-((t - 120) / 12.0) ** 2) \
    - 120 * np.exp(-((t - 210) / 20.0) ** 2)

# the "forecast" is the same curve delayed by four samples plus noise,
# the classic failure mode a pointwise RMSE cannot distinguish from
# amplitude error
rng = np.random.default_rng(0)
pred = np.roll(truth, 4)
pred[:4] = truth[0]
pred = pred + rng.normal(0, 8, size=t.size)

from skycast.metrics import dtw_align, forecast_skill, quantile_abs_error, \
    rmse, tdi

print("rmse            ", round(rmse(pred, truth), 2), "W/m^2")
print("q95 |error|     ", round(quantile_abs_error(pred, truth, 0.95), 2))

# persistence (yesterday's value, here: a flat curve) as the reference
reference = np.full_like(truth, truth.mean())
print("skill vs flat   ", round(forecast_skill(rmse(pred, truth),
                                               rmse(reference, truth)), 1), "%")

# the alignment-based index splits the timing error into advance and lag
res = tdi(pred[:100], truth[:100])
print("tdi             ", round(res.tdi, 3), "%")
print("  advance       ", round(res.adv, 3), "%")
print("  lag           ", round(res.late, 3), "%")

# the warp path itself is available for inspection; a delayed series
# aligns below the diagonal
path = dtw_align(pred[:20], truth[:20])
offsets = [i - j for i, j in path.vertices]
print("path offsets    ", offsets)
