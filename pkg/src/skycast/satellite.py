"""Cloud index from a stack of geostationary greyscale frames.

CI = (rho - rho_min) / (rho_max(t) - rho_min), where rho_min is the
per-pixel minimum radiance at the same time of day over the last N
days (the clear-ground estimate: the darkest a pixel gets is when no
cloud brightens it) and rho_max(t) is the global maximum of the frame
at t (the brightest cloud visible right now). The ratio is clamped to
[0, 1]; a denominator too small to be meaningful yields 0.
"""

import json
import os
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from . import images
from .errors import CoverageError, ShapeError
from .timeutil import as_utc, format_compact, format_iso, parse_compact

DEFAULT_N_DAYS = 10
DEFAULT_MIN_DENOMINATOR = 1.0


class RadianceStack:
    """Time-ordered greyscale frames at a nominal cadence."""

    def __init__(self, timestamps, frames, cadence_minutes=5.0):
        order = sorted(range(len(timestamps)), key=lambda i: timestamps[i])
        self.timestamps = [as_utc(timestamps[i]) for i in order]
        self.frames = [np.asarray(frames[i], dtype=float) for i in order]
        self.cadence_minutes = float(cadence_minutes)
        if self.frames:
            shape = self.frames[0].shape
            for f in self.frames:
                if f.ndim != 2:
                    raise ShapeError("frames must be 2-d greyscale rasters")
                if f.shape != shape:
                    raise ShapeError(f"frame shapes differ: {f.shape} vs {shape}")

    def __len__(self):
        return len(self.frames)

    def frame_at(self, t, tolerance_s=None):
        """Frame nearest to t within tolerance (default cadence/2)."""
        t = as_utc(t)
        if tolerance_s is None:
            tolerance_s = self.cadence_minutes * 30.0
        best = None
        for ts, frame in zip(self.timestamps, self.frames):
            dt = abs((ts - t).total_seconds())
            if dt <= tolerance_s and (best is None or dt < best[0]):
                best = (dt, frame, ts)
        if best is None:
            raise CoverageError(f"no frame within {tolerance_s:.0f} s of "
                                f"{format_iso(t)}")
        return best[1], best[2]

    @classmethod
    def from_dir(cls, path, cadence_minutes=5.0):
        timestamps, frames = [], []
        for name in sorted(os.listdir(path)):
            if not name.endswith(".png"):
                continue
            stem = name[:-4]
            if not (stem.isdigit() and len(stem) in (12, 14)):
                continue
            timestamps.append(parse_compact(stem))
            frames.append(images.load_gray(os.path.join(path, name)))
        return cls(timestamps, frames, cadence_minutes)

    def save_dir(self, path):
        os.makedirs(path, exist_ok=True)
        for ts, frame in zip(self.timestamps, self.frames):
            images.save_gray8(os.path.join(path, format_compact(ts) + ".png"),
                              frame)


@dataclass
class CloudIndexMap:
    values: np.ndarray
    timestamp: object
    n_days: int = DEFAULT_N_DAYS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cloud index must be finite")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise ValueError("cloud index must lie in [0, 1]")

    def save(self, png_path):
        images.save_gray16(png_path, np.rint(self.values * 65535).astype(np.uint16))
        sidecar = os.fspath(png_path) + ".json"
        images.atomic_write_json(sidecar, {
            "timestamp": format_iso(as_utc(self.timestamp)),
            "n_days": self.n_days,
        })

    @classmethod
    def load(cls, png_path):
        raw = images.load_gray(png_path).astype(float) / 65535.0
        with open(os.fspath(png_path) + ".json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
        from .timeutil import parse_iso
        return cls(raw, parse_iso(sidecar["timestamp"]),
                   int(sidecar["n_days"]))


def _time_of_day_distance_minutes(a, b):
    """Circular distance between two times of day, in minutes."""
    ma = a.hour * 60 + a.minute + a.second / 60.0
    mb = b.hour * 60 + b.minute + b.second / 60.0
    d = abs(ma - mb)
    return min(d, 1440.0 - d)


def matching_frames(stack, t, n_days=DEFAULT_N_DAYS):
    """Frames at the same time of day within the last n_days of t.

    The window is (t - n_days, t]; the frame at t itself counts. The
    time-of-day match tolerance is half the cadence.
    """
    t = as_utc(t)
    tol_min = stack.cadence_minutes / 2.0
    lo = t - timedelta(days=n_days)
    out = []
    for ts, frame in zip(stack.timestamps, stack.frames):
        if lo < ts <= t and _time_of_day_distance_minutes(ts, t) <= tol_min:
            out.append((ts, frame))
    return out


def rolling_min(stack, t, n_days=DEFAULT_N_DAYS, pixel=None):
    """Per-pixel minimum over same-time-of-day frames of the last n_days.

    Returns the full raster, or a scalar when `pixel` = (x, y) is given.
    """
    matches = matching_frames(stack, t, n_days)
    if not matches:
        raise CoverageError(f"no frame matches time of day of "
                            f"{format_iso(as_utc(t))} in the last "
                            f"{n_days} days")
    stackmin = np.minimum.reduce([f for _, f in matches])
    if pixel is None:
        return stackmin
    x, y = pixel
    return float(stackmin[int(y), int(x)])


def cloud_index(stack, t, n_days=DEFAULT_N_DAYS,
                min_denominator=DEFAULT_MIN_DENOMINATOR):
    """Cloud-index map for the frame at t."""
    frame, ts = stack.frame_at(t)
    rho_min = rolling_min(stack, ts, n_days)
    rho_max = float(frame.max())
    denom = rho_max - rho_min
    with np.errstate(invalid="ignore", divide="ignore"):
        ci = np.where(denom < min_denominator, 0.0,
                      (frame - rho_min) / np.where(denom == 0, 1.0, denom))
    ci = np.clip(ci, 0.0, 1.0)
    return CloudIndexMap(ci, ts, n_days)
