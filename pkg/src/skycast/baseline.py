"""Clear-sky irradiance and the smart-persistence reference forecast.

Smart persistence holds the clear-sky index k_c = y / y_clr constant:
the forecast for t+h is k_c(t) * y_clr(t+h), so the trivial diurnal
ramp is followed and only cloud changes count as forecast misses. When
the clear-sky value at issue time is tiny (dawn/dusk) the index blows
up, so the forecast falls back to plain persistence.

The clear-sky source is pluggable: an external measured/modeled series,
or an analytic cos-zenith model, K cos(z) exp(-b / cos(z)) with
K = 1098 W/m2 and b = 0.057, which is accurate enough for fixtures and
self-contained tests.
"""

import math
from dataclasses import dataclass

from .errors import DomainError
from .tables import ForecastTable
from .timeutil import as_utc, day_of_year

LOW_CLEARSKY_FLOOR_WM2 = 10.0
_HAURWITZ_K = 1098.0
_HAURWITZ_B = 0.057


def solar_zenith(timestamp, lat_deg, lon_deg):
    """Solar zenith angle in degrees, low-precision (about half a degree).

    Day-angle harmonic expansions for declination and the equation of
    time; hour angle from true solar time with east longitude positive.
    """
    ts = as_utc(timestamp)
    frac_year = 2 * math.pi / 365.0 * (day_of_year(ts) + (ts.hour - 12) / 24.0)
    g = frac_year
    decl = (0.006918 - 0.399912 * math.cos(g) + 0.070257 * math.sin(g)
            - 0.006758 * math.cos(2 * g) + 0.000907 * math.sin(2 * g)
            - 0.002697 * math.cos(3 * g) + 0.00148 * math.sin(3 * g))
    eot_min = 229.18 * (0.000075 + 0.001868 * math.cos(g)
                        - 0.032077 * math.sin(g) - 0.014615 * math.cos(2 * g)
                        - 0.040849 * math.sin(2 * g))
    minutes = ts.hour * 60 + ts.minute + ts.second / 60.0
    tst = (minutes + eot_min + 4.0 * lon_deg) % 1440.0
    hour_angle = math.radians(tst / 4.0 - 180.0)
    lat = math.radians(lat_deg)
    cos_z = (math.sin(lat) * math.sin(decl)
             + math.cos(lat) * math.cos(decl) * math.cos(hour_angle))
    return math.degrees(math.acos(max(-1.0, min(1.0, cos_z))))


def solar_elevation(timestamp, lat_deg, lon_deg):
    return 90.0 - solar_zenith(timestamp, lat_deg, lon_deg)


def haurwitz_ghi(zenith_deg):
    """Analytic clear-sky GHI from the zenith angle; 0 at or below horizon."""
    if zenith_deg >= 90.0:
        return 0.0
    cos_z = math.cos(math.radians(zenith_deg))
    return _HAURWITZ_K * cos_z * math.exp(-_HAURWITZ_B / cos_z)


@dataclass(frozen=True)
class AnalyticClearSky:
    """Site-parameterized analytic source. Altitude is carried for
    bookkeeping only; the model does not use it."""

    lat_deg: float
    lon_deg: float
    altitude_m: float = 0.0

    def ghi(self, timestamp):
        return haurwitz_ghi(solar_zenith(timestamp, self.lat_deg,
                                         self.lon_deg))


class SeriesClearSky:
    """External clear-sky series; raises CoverageError on gaps."""

    def __init__(self, series, tolerance_s=0.0):
        self.series = series
        self.tolerance_s = tolerance_s

    def ghi(self, timestamp):
        return self.series.value_at(timestamp, self.tolerance_s)


def clear_sky_ghi(timestamp, src):
    return src.ghi(timestamp)


def smart_persistence(y_t, yclr_t, yclr_future,
                      floor=LOW_CLEARSKY_FLOOR_WM2):
    """Clear-sky-index-preserving persistence forecast."""
    if y_t < 0 or yclr_t < 0 or yclr_future < 0:
        raise DomainError("irradiance inputs must be non-negative")
    if yclr_t < floor:
        return float(y_t)
    return float(y_t / yclr_t * yclr_future)


def smart_persistence_table(series, horizons_min, src,
                            floor=LOW_CLEARSKY_FLOOR_WM2,
                            match_tolerance_s=1.0):
    """Forecast table of smart-persistence predictions over a series.

    One row per (issue time, horizon) whose target timestamp exists in
    the series; rows with no measured target are skipped, not errors.
    """
    from datetime import timedelta

    issue, horizon, y_true, y_pred = [], [], [], []
    for i, t in enumerate(series.timestamps):
        y_t = float(series.values[i])
        yclr_t = src.ghi(t)
        for h in horizons_min:
            future = t + timedelta(minutes=float(h))
            hit = series.nearest(future, match_tolerance_s)
            if hit is None:
                continue
            issue.append(t)
            horizon.append(float(h))
            y_true.append(hit[1])
            y_pred.append(smart_persistence(y_t, yclr_t, src.ghi(hit[0]),
                                            floor=floor))
    return ForecastTable(issue, horizon, y_true, y_pred)
