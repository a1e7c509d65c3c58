"""A small synthetic sky: one bright spot, one drifting occluder.

The spot ("sun") stays put; a gray disk ("cloud") drifts across the
frame at constant velocity. Irradiance is a fixed affine function of
how much of the spot is visible, so the ground truth dips exactly when
the disk covers it. Sequences are written in the window exchange
format, which keeps the trainer blind to how its data was made.
"""
import os
from datetime import datetime, timedelta, timezone

import numpy as np

from .windows import CLOUD, SKY, SUN, WindowRecord, save_window

SKY_COLOR = (0.30, 0.52, 0.85)
SUN_COLOR = (1.00, 0.95, 0.55)
CLOUD_COLOR = (0.55, 0.55, 0.58)

GHI_FLOOR_WM2 = 100.0
GHI_SPAN_WM2 = 900.0


def sun_geometry(size):
    """Center and radius of the bright spot for a given frame size."""
    return (0.5 * size, 0.4 * size), max(2, size // 8)


def cloud_radius(size):
    return max(3, size // 5)


def render_frame(size, disk_center):
    """Draw one frame; returns (rgb, labels, visible_fraction)."""
    (sx, sy), sr = sun_geometry(size)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    sun = (xx - sx) ** 2 + (yy - sy) ** 2 <= sr ** 2
    cr = cloud_radius(size)
    disk = (xx - disk_center[0]) ** 2 + (yy - disk_center[1]) ** 2 <= cr ** 2

    rgb = np.empty((size, size, 3), dtype=np.float32)
    rgb[:] = SKY_COLOR
    rgb[sun] = SUN_COLOR
    rgb[disk] = CLOUD_COLOR              # the disk passes in front

    labels = np.full((size, size), SKY, dtype=np.uint8)
    labels[sun] = SUN
    labels[disk] = CLOUD

    visible = float((sun & ~disk).sum()) / float(sun.sum())
    return rgb, labels, visible


def ghi_from_visibility(frac):
    return GHI_FLOOR_WM2 + GHI_SPAN_WM2 * float(frac)


def make_record(rng, issue_time, size=32, context=5, horizon=5,
                target_mode="absolute"):
    """One sequence: the disk drifts left to right through the scene.

    Three quarters of the sequences aim the disk at the spot's row so
    an occlusion is likely somewhere in the clip; the rest drift far
    above or below and stay clear.
    """
    (sx, sy), sr = sun_geometry(size)
    speed = float(rng.choice([1.0, 1.5, 2.0, 2.5]))
    total = context + horizon
    x0 = float(rng.uniform(-0.8 * size, 0.9 * size - speed * total))
    if rng.uniform() < 0.75:
        dy = float(rng.uniform(-0.8 * sr, 0.8 * sr))
    else:
        dy = float(rng.choice([-1.0, 1.0])) * float(rng.uniform(2.5, 4.0)) * sr

    frames, labels, ghi = [], [], []
    for j in range(total):
        rgb, lab, frac = render_frame(size, (x0 + speed * j, sy + dy))
        frames.append(rgb)
        labels.append(lab)
        ghi.append(ghi_from_visibility(frac))

    inputs = np.stack(frames[:context])
    anchor = ghi[context - 1]
    target = np.asarray(ghi[context:])
    if target_mode == "change":
        target = target - anchor
    seg = np.stack(labels[context:])
    return WindowRecord(issue_time, inputs, target, anchor, target_mode, seg)


def issue_grid(count, per_day=8, start=None, slot_minutes=30.0):
    """Regular issue times: per_day slots each day, slot_minutes apart."""
    start = start or datetime(2019, 7, 1, 8, 0, tzinfo=timezone.utc)
    times = []
    for k in range(count):
        day, slot = divmod(k, per_day)
        times.append(start + timedelta(days=day,
                                       minutes=slot * slot_minutes))
    return times


def build_dataset(directory, count, seed=0, size=32, context=5, horizon=5,
                  target_mode="absolute", per_day=8):
    """Write `count` windows under a directory; returns their prefixes."""
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed)
    prefixes = []
    for k, t in enumerate(issue_grid(count, per_day)):
        rec = make_record(rng, t, size=size, context=context,
                          horizon=horizon, target_mode=target_mode)
        prefix = os.path.join(directory, f"w{k:04d}")
        save_window(prefix, rec)
        prefixes.append(prefix)
    return prefixes
