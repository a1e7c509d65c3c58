"""Sample indexing, splitting, and window assembly over an image archive.

Archives hold paired exposures named `YYYYMMDDhhmmss_long.png` and
`YYYYMMDDhhmmss_short.png` plus a one-minute irradiance CSV. The index
joins the two, drops low-sun samples, and hands out context/horizon
windows for training and evaluation.
"""

import math
import os
import re
from bisect import bisect_left
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from . import geometry, images
from .baseline import solar_elevation
from .binio import read_hnst, write_hnst
from .errors import CoverageError, DomainError, GapError, SchemaError
from .segmentation import FRAME, segment
from .series import IrradianceSeries
from .timeutil import as_utc, format_iso, parse_compact, parse_iso

GHI_SCALE_WM2 = 1300.0
JOIN_TOLERANCE_S = 60.0
FRAME_TOLERANCE_S = 15.0
MIN_ELEVATION_DEG = 10.0

INPUT_MODES = ("RGB", "RGBI")
TARGET_MODES = ("absolute", "change")
GEOMETRY_MODES = ("distorted", "undistorted")

_NAME_RE = re.compile(r"^(\d{12}|\d{14})_(long|short)\.png$")


@dataclass(frozen=True)
class Site:
    latitude_deg: float = 48.713
    longitude_deg: float = 2.208
    altitude_m: float = 157.0

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg["site.latitude_deg"], cfg["site.longitude_deg"],
                   cfg["site.altitude_m"])


@dataclass(frozen=True)
class IndexEntry:
    timestamp: datetime
    long_path: str
    short_path: str
    ghi_wm2: float
    zenith_deg: float


class SampleIndex:
    """Time-ordered entries, one per usable image pair."""

    def __init__(self, entries, cadence_minutes=2.0):
        entries = sorted(entries, key=lambda e: e.timestamp)
        for a, b in zip(entries, entries[1:]):
            if b.timestamp <= a.timestamp:
                raise DomainError(f"duplicate index timestamp "
                                  f"{format_iso(b.timestamp)}")
        self.entries = entries
        self.cadence_minutes = float(cadence_minutes)
        self._times = [e.timestamp for e in entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def timestamps(self):
        return list(self._times)

    def entry_near(self, t, tolerance_s=FRAME_TOLERANCE_S):
        """Entry whose timestamp is within tolerance_s of t."""
        t = as_utc(t)
        if not self._times:
            raise GapError(f"missing frame at {format_iso(t)}")
        i = bisect_left(self._times, t)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(self._times):
                gap = abs((self._times[j] - t).total_seconds())
                if best is None or gap < best[0]:
                    best = (gap, self.entries[j])
        if best[0] > tolerance_s:
            raise GapError(f"missing frame at {format_iso(t)}")
        return best[1]

    def stats(self):
        """Per-month, zenith, and irradiance histograms of the entries."""
        per_month = {m: 0 for m in range(1, 13)}
        zenith = {lo: 0 for lo in range(0, 90, 10)}
        ghi = {lo: 0 for lo in range(0, 1400, 100)}
        for e in self.entries:
            per_month[e.timestamp.month] += 1
            zenith[min(int(e.zenith_deg // 10) * 10, 80)] += 1
            ghi[min(int(max(e.ghi_wm2, 0.0) // 100) * 100, 1300)] += 1
        return {"per_month": per_month, "zenith_deg": zenith,
                "ghi_wm2": ghi}

    def to_csv(self):
        lines = ["timestamp_iso,long_path,short_path,ghi_wm2,zenith_deg"]
        for e in self.entries:
            lines.append(f"{format_iso(e.timestamp)},{e.long_path},"
                         f"{e.short_path},{e.ghi_wm2!r},{e.zenith_deg!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, cadence_minutes=2.0):
        lines = text.strip().splitlines()
        if not lines or lines[0].split(",") != [
                "timestamp_iso", "long_path", "short_path", "ghi_wm2",
                "zenith_deg"]:
            raise SchemaError("bad index header", line=1)
        entries = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            if len(parts) != 5:
                raise SchemaError(f"expected 5 fields, got {len(parts)}",
                                  line=lineno)
            try:
                entries.append(IndexEntry(parse_iso(parts[0]), parts[1],
                                          parts[2], float(parts[3]),
                                          float(parts[4])))
            except ValueError as exc:
                raise SchemaError(str(exc), line=lineno) from exc
        return cls(entries, cadence_minutes)

    def save(self, path):
        images.atomic_write_text(path, self.to_csv())

    @classmethod
    def load(cls, path, cadence_minutes=2.0):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_csv(fh.read(), cadence_minutes)


def scan_image_pairs(image_dir):
    """Map timestamp -> {"long": path, "short": path} from file names."""
    pairs = {}
    for name in sorted(os.listdir(image_dir)):
        m = _NAME_RE.match(name)
        if not m:
            continue
        ts = parse_compact(m.group(1))
        pairs.setdefault(ts, {})[m.group(2)] = os.path.join(image_dir, name)
    return pairs


def build_index(image_dir, irradiance, site=None,
                min_elevation_deg=MIN_ELEVATION_DEG, cadence_minutes=2.0):
    """Join image pairs to per-minute GHI and filter low-sun samples.

    `irradiance` is an IrradianceSeries or a path to its CSV. Returns
    (index, rejects); rejects holds (timestamp, reason) rows for pairs
    that could not be used, with reasons "no_pair" and "no_ghi". Samples
    below the elevation threshold are silently dropped per the filter
    rule rather than reported.
    """
    if site is None:
        site = Site()
    if not isinstance(irradiance, IrradianceSeries):
        irradiance = IrradianceSeries.load(irradiance)
    entries, rejects = [], []
    for ts, paths in sorted(scan_image_pairs(image_dir).items()):
        if "long" not in paths or "short" not in paths:
            rejects.append((format_iso(ts), "no_pair"))
            continue
        try:
            ghi = irradiance.value_at(ts, tolerance_s=JOIN_TOLERANCE_S)
        except CoverageError:
            rejects.append((format_iso(ts), "no_ghi"))
            continue
        elevation = solar_elevation(ts, site.latitude_deg,
                                    site.longitude_deg)
        if elevation < min_elevation_deg:
            continue
        entries.append(IndexEntry(ts, paths["long"], paths["short"],
                                  float(ghi), 90.0 - elevation))
    return SampleIndex(entries, cadence_minutes), rejects


def rejects_to_csv(rejects):
    lines = ["timestamp,reason"]
    lines.extend(f"{ts},{reason}" for ts, reason in rejects)
    return "\n".join(lines) + "\n"


def split(index, train_years=(2017, 2018), eval_year=2019):
    """Partition into train / val / test by year and day of month.

    Evaluation-year entries on even days of the month validate; odd
    days test. Entries from any other year are a hard error so the
    three parts always reassemble the input exactly.
    """
    parts = {"train": [], "val": [], "test": []}
    for e in index:
        year = e.timestamp.year
        if year in train_years:
            parts["train"].append(e)
        elif year == eval_year:
            key = "val" if e.timestamp.day % 2 == 0 else "test"
            parts[key].append(e)
        else:
            raise DomainError(f"entry year {year} is outside the split "
                              f"configuration")
    return {name: SampleIndex(rows, index.cadence_minutes)
            for name, rows in parts.items()}


@dataclass(frozen=True)
class WindowSpec:
    context_frames: int = 5
    horizon_frames: int = 5
    step_minutes: float = 2.0
    input_mode: str = "RGB"
    target_mode: str = "absolute"
    geometry_mode: str = "distorted"

    def __post_init__(self):
        if self.context_frames < 1 or self.horizon_frames < 1:
            raise DomainError("window frame counts must be >= 1")
        if self.step_minutes <= 0:
            raise DomainError("window step must be positive")
        if self.input_mode not in INPUT_MODES:
            raise DomainError(f"input_mode must be one of {INPUT_MODES}")
        if self.target_mode not in TARGET_MODES:
            raise DomainError(f"target_mode must be one of {TARGET_MODES}")
        if self.geometry_mode not in GEOMETRY_MODES:
            raise DomainError(f"geometry_mode must be one of "
                              f"{GEOMETRY_MODES}")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg["window.context_frames"],
                   cfg["window.horizon_frames"],
                   cfg["window.step_minutes"], cfg["window.input_mode"],
                   cfg["window.target_mode"], cfg["window.geometry_mode"])


@dataclass(frozen=True)
class Window:
    issue_time: datetime
    inputs: np.ndarray        # (context, H, W, C) floats in [0, 1]
    target_ghi: np.ndarray    # (horizon,) absolute W/m² or change vs anchor
    anchor_ghi: float
    seg_labels: tuple         # horizon label rasters, uint8


def _window_times(t, spec):
    t = as_utc(t)
    step = timedelta(minutes=spec.step_minutes)
    context = [t - step * i for i in range(spec.context_frames - 1, -1, -1)]
    horizon = [t + step * i for i in range(1, spec.horizon_frames + 1)]
    return context, horizon


def _load_input(entry, spec, cam, out_size, exposure):
    path = entry.long_path if exposure == "long" else entry.short_path
    img = images.load_rgb(path)
    if spec.geometry_mode == "undistorted":
        img = geometry.undistort_image(img, cam, out_size=out_size)
    plane = img.astype(float) / 255.0
    if spec.input_mode == "RGBI":
        ghi_plane = np.full(plane.shape[:2] + (1,),
                            entry.ghi_wm2 / GHI_SCALE_WM2)
        plane = np.concatenate([plane, ghi_plane], axis=2)
    return plane


def _seg_target(entry, spec, cam, out_size):
    seg = segment(images.load_rgb(entry.long_path),
                  images.load_rgb(entry.short_path))
    labels = seg.labels
    if spec.geometry_mode == "undistorted":
        labels = geometry.undistort_labels(labels, cam, out_size=out_size,
                                           fill=FRAME)
    return labels


def assemble_window(index, t, spec, cam=None, out_size=128,
                    exposure="long", tolerance_s=FRAME_TOLERANCE_S):
    """Context images plus horizon targets anchored at t.

    Context covers t - (context_frames-1)*step .. t, horizons run from
    t + step. Every frame must exist within tolerance_s and the whole
    window must sit inside one calendar day; otherwise GapError.
    """
    if spec.geometry_mode == "undistorted" and cam is None:
        raise DomainError("undistorted windows need a camera model")
    context_times, horizon_times = _window_times(t, spec)
    entries = [index.entry_near(ts, tolerance_s)
               for ts in context_times + horizon_times]
    day = as_utc(t).date()
    for e in entries:
        if e.timestamp.date() != day:
            raise GapError(f"window crosses a day boundary at "
                           f"{format_iso(e.timestamp)}")

    n_ctx = spec.context_frames
    inputs = np.stack([_load_input(e, spec, cam, out_size, exposure)
                       for e in entries[:n_ctx]])
    anchor = entries[n_ctx - 1].ghi_wm2
    ghi = np.array([e.ghi_wm2 for e in entries[n_ctx:]])
    if spec.target_mode == "change":
        ghi = ghi - anchor
    seg_labels = tuple(_seg_target(e, spec, cam, out_size)
                       for e in entries[n_ctx:])
    return Window(entries[n_ctx - 1].timestamp, inputs, ghi, anchor,
                  seg_labels)


def save_window_inputs(path, inputs):
    """Write a (frames, H, W, C) tensor in the flat binary layout.

    Rows are frames, columns the H*W*C raster, and the header's extra
    field records C so square frames can be rebuilt on read.
    """
    arr = np.asarray(inputs)
    if arr.ndim != 4:
        raise SchemaError(f"expected (frames, H, W, C), got {arr.shape}")
    frames, h, w, c = arr.shape
    if h != w:
        raise SchemaError("only square frames can be serialized")
    write_hnst(path, arr.reshape(frames, h * w * c), extra=c)


def load_window_inputs(path):
    flat, channels = read_hnst(path)
    if channels < 1:
        raise SchemaError(f"{path}: channel field must be >= 1")
    frames, cols = flat.shape
    if cols % channels:
        raise SchemaError(f"{path}: {cols} columns not divisible by "
                          f"{channels} channels")
    side = math.isqrt(cols // channels)
    if side * side * channels != cols:
        raise SchemaError(f"{path}: columns do not form square frames")
    return flat.reshape(frames, side, side, channels)
