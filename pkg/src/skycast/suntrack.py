"""Sun position in image coordinates, tracked without an ephemeris.

When the sun is visible it saturates the short-exposure image; the
largest 4-connected blob of saturated blue pixels gives its position.
Those detections, gathered over weeks, pin down where the sun sits at
each minute of the day as a slowly varying function of the date: each
coordinate is regressed per minute-of-day on a periodic basis with
year and half-year harmonics, using an L1 loss so that false detections
(reflections, hot clouds) do not drag the fit. A ridge-regularized
polynomial over the minutes of one day then yields a smooth
minute-by-minute trajectory, usable when the sun is hidden.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import CoverageError
from .images import atomic_write_text
from .timeutil import day_number, format_iso, minute_of_day, parse_iso

PERIOD_DAYS = 365.25
N_BASIS = 5
IRLS_ITERATIONS = 20
IRLS_EPS = 1e-6

_FOUR_CONNECTED = np.array([[0, 1, 0],
                            [1, 1, 1],
                            [0, 1, 0]], dtype=int)


@dataclass(frozen=True)
class SunObservation:
    timestamp: object
    position: object    # (x, y) px or None
    visible: bool

    def __post_init__(self):
        if self.visible != (self.position is not None):
            raise ValueError("visible must match presence of position")


def detect_sun(short_exposure, saturation_level=250, area_min=10,
               timestamp=None):
    """Locate the sun as the largest saturated 4-connected component.

    Accepts an RGB raster (blue channel is tested) or a single-channel
    raster. Absence of a large enough component is a valid result, not
    an error.
    """
    img = np.asarray(short_exposure)
    blue = img[..., 2] if img.ndim == 3 else img
    mask = blue >= saturation_level
    if not mask.any():
        return SunObservation(timestamp, None, False)
    labels, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
    areas = np.bincount(labels.ravel())
    areas[0] = 0
    best = int(np.argmax(areas))
    if areas[best] < area_min:
        return SunObservation(timestamp, None, False)
    ys, xs = np.nonzero(labels == best)
    return SunObservation(timestamp, (float(xs.mean()), float(ys.mean())), True)


def periodic_design(days):
    """Rows of {1, cos(2pi d/P), sin(2pi d/P), cos(4pi d/P), sin(4pi d/P)}."""
    days = np.asarray(days, dtype=float)
    w = 2 * math.pi * days / PERIOD_DAYS
    return np.stack([np.ones_like(days), np.cos(w), np.sin(w),
                     np.cos(2 * w), np.sin(2 * w)], axis=-1)


def _irls_l1(design, target):
    """L1 regression by iteratively reweighted least squares."""
    beta = np.linalg.lstsq(design, target, rcond=None)[0]
    for _ in range(IRLS_ITERATIONS):
        r = target - design @ beta
        w = 1.0 / np.maximum(np.abs(r), IRLS_EPS)
        sw = np.sqrt(w)
        beta = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)[0]
    return beta


@dataclass
class SunTrajectoryModel:
    """Per-minute periodic coefficients plus daily smoothing settings."""

    minutes: dict = field(default_factory=dict)   # minute -> (beta_x, beta_y)
    poly_degree: int = 4
    ridge: float = 1e-3
    image_width: float = 0.0

    def fitted_minutes(self):
        return sorted(self.minutes)

    def minute_estimate(self, minute, day):
        """Raw periodic prediction for one fitted minute-of-day."""
        bx, by = self.minutes[minute]
        phi = periodic_design(float(day))
        return float(phi @ bx), float(phi @ by)

    def to_json(self):
        return json.dumps({
            "period_days": PERIOD_DAYS,
            "poly_degree": self.poly_degree,
            "ridge": self.ridge,
            "image_width": self.image_width,
            "minutes": {str(m): {"x": list(map(float, bx)),
                                 "y": list(map(float, by))}
                        for m, (bx, by) in sorted(self.minutes.items())},
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        minutes = {int(m): (np.array(v["x"], dtype=float),
                            np.array(v["y"], dtype=float))
                   for m, v in raw["minutes"].items()}
        return cls(minutes=minutes, poly_degree=int(raw["poly_degree"]),
                   ridge=float(raw["ridge"]),
                   image_width=float(raw["image_width"]))

    def save(self, path):
        atomic_write_text(path, self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def fit_trajectory(obs, min_obs_per_minute=5, min_days=30, poly_degree=4,
                   ridge=1e-3, image_width=0.0):
    """Fit the per-minute periodic model from sun detections.

    Only visible observations contribute. Minutes of day with fewer
    than `min_obs_per_minute` detections stay unfitted; the whole fit
    fails with CoverageError when fewer than `min_days` distinct days
    are covered or when no minute can be fitted at all.
    """
    visible = sorted((o for o in obs if o.visible),
                     key=lambda o: o.timestamp)
    days_covered = {int(day_number(o.timestamp)) for o in visible}
    if len(days_covered) < min_days:
        raise CoverageError(f"observations span {len(days_covered)} days, "
                            f"need {min_days}")
    groups = {}
    for o in visible:
        groups.setdefault(minute_of_day(o.timestamp), []).append(o)
    minutes = {}
    unfitted = []
    for minute, group in sorted(groups.items()):
        if len(group) < min_obs_per_minute:
            unfitted.append(minute)
            continue
        days = np.array([day_number(o.timestamp) for o in group])
        xs = np.array([o.position[0] for o in group])
        ys = np.array([o.position[1] for o in group])
        design = periodic_design(days)
        minutes[minute] = (_irls_l1(design, xs), _irls_l1(design, ys))
    if not minutes:
        raise CoverageError(f"no minute of day has {min_obs_per_minute} "
                            f"observations; unfitted minutes: {unfitted[:20]}")
    return SunTrajectoryModel(minutes=minutes, poly_degree=poly_degree,
                              ridge=ridge, image_width=image_width)


def _day_polynomial(model, date):
    """Ridge-fit polynomial coefficients for one date, per coordinate."""
    fitted = model.fitted_minutes()
    if len(fitted) < model.poly_degree + 1:
        raise CoverageError(f"{len(fitted)} fitted minutes, need "
                            f"{model.poly_degree + 1}")
    base_day = day_number(date.replace(hour=0, minute=0, second=0,
                                       microsecond=0))
    est = np.array([model.minute_estimate(m, base_day + m / 1440.0)
                    for m in fitted])
    t = (np.array(fitted, dtype=float) - 720.0) / 720.0
    v = np.vander(t, model.poly_degree + 1, increasing=True)
    lhs = v.T @ v + model.ridge * np.eye(model.poly_degree + 1)
    coef = np.linalg.solve(lhs, v.T @ est)    # (degree+1, 2)
    return coef, min(fitted), max(fitted)


def smooth_day(model, date, minutes=None):
    """Minute-by-minute positions for one date.

    `minutes` defaults to the full day (0..1439). Returns an (n, 2)
    array of pixel positions.
    """
    coef, _, _ = _day_polynomial(model, date)
    if minutes is None:
        minutes = np.arange(1440)
    t = (np.asarray(minutes, dtype=float) - 720.0) / 720.0
    v = np.vander(t, model.poly_degree + 1, increasing=True)
    return v @ coef


def sun_position(model, timestamp):
    """Smoothed position at one timestamp; minute must be inside the
    fitted range of its day."""
    coef, lo, hi = _day_polynomial(model, timestamp)
    minute = minute_of_day(timestamp)
    if not lo <= minute <= hi:
        raise CoverageError(f"minute {minute} outside fitted range "
                            f"[{lo}, {hi}]")
    t = (minute - 720.0) / 720.0
    v = np.vander(np.array([t]), model.poly_degree + 1, increasing=True)
    out = v @ coef
    return float(out[0, 0]), float(out[0, 1])


def fit_mae(model, obs):
    """Mean |periodic prediction - detection| in px over fitted minutes.

    Unlike holdout_mae this skips the daily smoothing polynomial, so it
    measures the per-minute regression alone.
    """
    errs = []
    for o in obs:
        if not o.visible:
            continue
        minute = minute_of_day(o.timestamp)
        if minute not in model.minutes:
            continue
        x, y = model.minute_estimate(minute, day_number(o.timestamp))
        errs.append(math.hypot(x - o.position[0], y - o.position[1]))
    if not errs:
        raise CoverageError("no visible observations on fitted minutes")
    return float(np.mean(errs))


def holdout_mae(model, obs):
    """Mean |prediction - detection| over visible observations, as a
    fraction of image width (0 when width unknown)."""
    errs = []
    for o in obs:
        if not o.visible:
            continue
        try:
            x, y = sun_position(model, o.timestamp)
        except CoverageError:
            continue
        errs.append(math.hypot(x - o.position[0], y - o.position[1]))
    if not errs:
        raise CoverageError("no visible observations inside the fitted range")
    mean = float(np.mean(errs))
    return mean / model.image_width if model.image_width else mean


def observations_to_csv(obs):
    lines = ["timestamp_iso,visible,x_px,y_px"]
    for o in obs:
        if o.visible:
            lines.append(f"{format_iso(o.timestamp)},1,"
                         f"{o.position[0]:.6f},{o.position[1]:.6f}")
        else:
            lines.append(f"{format_iso(o.timestamp)},0,,")
    return "\n".join(lines) + "\n"


def observations_from_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    out = []
    for ln in lines[1:]:
        ts, vis, x, y = ln.split(",")
        if vis == "1":
            out.append(SunObservation(parse_iso(ts), (float(x), float(y)), True))
        else:
            out.append(SunObservation(parse_iso(ts), None, False))
    return out


def save_observations(path, obs):
    atomic_write_text(path, observations_to_csv(obs))


def load_observations(path):
    with open(path, "r", encoding="utf-8") as fh:
        return observations_from_csv(fh.read())
