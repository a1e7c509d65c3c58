"""
A clear-sky day, smart persistence, and the evaluation report
=============================================================

"""

import pathlib
from datetime import datetime, timedelta, timezone

import numpy as np

from skycast.baseline import AnalyticClearSky, smart_persistence_table
from skycast.series import IrradianceSeries

# site: a rooftop camera near Paris
src = AnalyticClearSky(48.713, 2.208, 157.0)

# measured GHI for one summer day at 2 min cadence: the clear-sky curve
# scaled by a drifting clearness factor
t0 = datetime(2019, 6, 21, 5, 0, tzinfo=timezone.utc)
stamps = [t0 + timedelta(minutes=2 * k) for k in range(480)]
rng = np.random.default_rng(3)
kc = np.clip(0.85 + np.cumsum(rng.normal(0, 0.01, len(stamps))), 0.2, 1.0)
ghi = np.array([max(src.ghi(t), 0.0) for t in stamps]) * kc
series = IrradianceSeries(stamps, ghi)

# smart persistence holds the clearness index, not the wattage, so it
# tracks the diurnal ramp for free
table = smart_persistence_table(series, horizons_min=(2, 10, 30), src=src)
print("forecast rows", len(table))

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
table.save(out / "persistence.csv")

# score it against itself: the skill must vanish, the timing index not
from skycast.metrics import EvalProtocol, evaluate_run

report = evaluate_run(table, table, EvalProtocol(count=50, length=60))
for row in report["horizons"]:
    print(f"h={row['horizon_min']:g}min  n={row['n']}  "
          f"rmse={row['rmse']:.2f}  fs={row['fs_percent']:.2f}%  "
          f"tdi={row['tdi']:.3f}")

# draw the day at the half-hour horizon
from skycast.plotting import day_curves_svg

svg = day_curves_svg(table, 30.0, datetime(2019, 6, 21).date())
(out / "day_curves.svg").write_text(svg)
print("wrote", out / "day_curves.svg")
