"""Window exchange format: flat binary frames, palette masks, JSON targets.

This is the contract with the measurement package that produces the
windows; nothing here imports it. A window on disk is three artifacts
sharing a prefix:

    <prefix>_inputs.hnst     context frames, float32
    <prefix>_seg<i>.png      target segmentation per horizon step, i >= 1
    <prefix>_targets.json    issue time, anchor, target mode, GHI list

The binary layout is a 16-byte header (magic "HNST", u32 rows, u32
cols, u32 extra) followed by little-endian float32 values row-major.
For window tensors rows are frames, cols the flattened H*W*C raster,
and extra records C.
"""
import json
import math
import os
import struct
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from PIL import Image

from .errors import SchemaError, ShapeError

MAGIC = b"HNST"
_HEADER = struct.Struct("<4sIII")

# class ids and display colors are fixed by the exchange format
SEG_PALETTE = {
    0: (135, 206, 235),     # sky
    1: (128, 128, 128),     # cloud
    2: (255, 215, 0),       # sun
    3: (255, 255, 255),     # saturation
    4: (0, 0, 0),           # frame
}
SKY, CLOUD, SUN, SATURATION, FRAME = range(5)


def write_hnst(path, values, extra=0):
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ShapeError(f"need a 2-d matrix, got shape {arr.shape}")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, arr.shape[0], arr.shape[1], int(extra)))
        fh.write(arr.tobytes())
    os.replace(tmp, path)


def read_hnst(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise SchemaError(f"{path}: truncated header")
        magic, rows, cols, extra = _HEADER.unpack(head)
        if magic != MAGIC:
            raise SchemaError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    expected = rows * cols * 4
    if len(payload) != expected:
        raise SchemaError(f"{path}: payload is {len(payload)} bytes, "
                          f"expected {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return arr.astype(np.float32), extra


def save_window_inputs(path, inputs):
    arr = np.asarray(inputs, dtype=np.float32)
    if arr.ndim != 4:
        raise ShapeError(f"expected (frames, H, W, C), got {arr.shape}")
    frames, h, w, c = arr.shape
    if h != w:
        raise ShapeError("only square frames are supported")
    write_hnst(path, arr.reshape(frames, h * w * c), extra=c)


def load_window_inputs(path):
    flat, channels = read_hnst(path)
    if channels < 1:
        raise SchemaError(f"{path}: channel count field must be >= 1")
    frames, cols = flat.shape
    if cols % channels:
        raise SchemaError(f"{path}: {cols} columns not divisible by "
                          f"{channels} channels")
    side = math.isqrt(cols // channels)
    if side * side * channels != cols:
        raise SchemaError(f"{path}: columns do not form square frames")
    return flat.reshape(frames, side, side, channels)


def save_seg_png(path, labels):
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.min() < 0 or labels.max() >= len(SEG_PALETTE):
        raise ShapeError("labels must be a 2-d raster of known class ids")
    im = Image.fromarray(labels.astype(np.uint8), mode="P")
    flat = []
    for cid in sorted(SEG_PALETTE):
        flat.extend(SEG_PALETTE[cid])
    im.putpalette(flat)
    im.save(path)


def load_seg_png(path):
    """Class-id raster from a palette mask; colors are the contract."""
    rgb = np.asarray(Image.open(path).convert("RGB"))
    out = np.full(rgb.shape[:2], 255, dtype=np.uint8)
    for cid, color in SEG_PALETTE.items():
        out[np.all(rgb == np.array(color, dtype=np.uint8), axis=-1)] = cid
    if (out == 255).any():
        ys, xs = np.nonzero(out == 255)
        raise SchemaError(f"{path}: pixel ({xs[0]}, {ys[0]}) has a color "
                          f"outside the palette")
    return out


def _parse_time(text):
    t = text[:-1] if text.endswith("Z") else text
    try:
        ts = datetime.fromisoformat(t)
    except ValueError as exc:
        raise SchemaError(f"bad timestamp {text!r}: {exc}") from None
    return ts.replace(tzinfo=ts.tzinfo or timezone.utc)


def _format_time(ts):
    return ts.strftime("%Y-%m-%dT%H:%M:%S")


@dataclass(frozen=True)
class WindowRecord:
    """One training sample: context frames plus horizon targets."""

    issue_time: datetime
    inputs: np.ndarray          # (t, H, W, C) float32 in [0, 1]
    target_ghi: np.ndarray      # (horizon,) W/m2, or change vs anchor
    anchor_ghi: float
    target_mode: str            # "absolute" | "change"
    segmentation: np.ndarray    # (horizon, H, W) uint8 class ids

    def __post_init__(self):
        if self.inputs.ndim != 4:
            raise ShapeError("inputs must be (frames, H, W, C)")
        if self.segmentation.shape[0] != self.target_ghi.shape[0]:
            raise ShapeError("one segmentation per horizon step required")
        if self.target_mode not in ("absolute", "change"):
            raise SchemaError(f"unknown target mode {self.target_mode!r}")

    def absolute_ghi(self):
        """Horizon GHI in W/m2 regardless of how targets were stored."""
        if self.target_mode == "change":
            return self.target_ghi + self.anchor_ghi
        return self.target_ghi.copy()


def save_window(prefix, record):
    save_window_inputs(f"{prefix}_inputs.hnst", record.inputs)
    seg_files = []
    for i, labels in enumerate(record.segmentation, start=1):
        name = f"{prefix}_seg{i}.png"
        save_seg_png(name, labels)
        seg_files.append(os.path.basename(name))
    doc = {
        "issue_time": _format_time(record.issue_time),
        "anchor_ghi_wm2": float(record.anchor_ghi),
        "target_mode": record.target_mode,
        "target_ghi": [float(v) for v in record.target_ghi],
        "seg_files": seg_files,
    }
    with open(f"{prefix}_targets.json", "w") as fh:
        json.dump(doc, fh, indent=1)


def load_window(prefix):
    path = f"{prefix}_targets.json"
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    try:
        issue = _parse_time(doc["issue_time"])
        anchor = float(doc["anchor_ghi_wm2"])
        mode = doc["target_mode"]
        ghi = np.asarray([float(v) for v in doc["target_ghi"]])
        seg_files = doc["seg_files"]
    except KeyError as exc:
        raise SchemaError(f"{path}: missing field {exc}") from None
    base = os.path.dirname(prefix)
    seg = np.stack([load_seg_png(os.path.join(base, f)) for f in seg_files])
    inputs = load_window_inputs(f"{prefix}_inputs.hnst")
    return WindowRecord(issue, inputs, ghi, anchor, mode, seg)


def load_dataset(directory):
    """Every window under a directory, ordered by issue time."""
    prefixes = sorted(
        os.path.join(directory, name[:-len("_targets.json")])
        for name in os.listdir(directory) if name.endswith("_targets.json"))
    records = [load_window(p) for p in prefixes]
    records.sort(key=lambda r: r.issue_time)
    if not records:
        raise SchemaError(f"no windows found under {directory}")
    return records
