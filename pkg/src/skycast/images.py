"""PNG raster I/O.

RGB images are handled as uint8 arrays of shape (H, W, 3), greyscale as
(H, W). Pixel (0, 0) is the top-left corner; x grows to the right
(columns), y grows downward (rows).
"""

import json
import os

import numpy as np
from PIL import Image

# Normative class palette for segmentation rasters.
SEG_PALETTE = {
    0: (135, 206, 235),  # sky
    1: (128, 128, 128),  # cloud
    2: (255, 215, 0),    # sun
    3: (255, 255, 255),  # saturation
    4: (0, 0, 0),        # frame
}
SEG_CLASS_NAMES = ("sky", "cloud", "sun", "saturation", "frame")


def load_rgb(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_rgb(path, img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got {img.shape}")
    atomic_save(Image.fromarray(img.astype(np.uint8), mode="RGB"), path)


def load_gray(path):
    """Load a greyscale PNG as float64 (16-bit files keep their range)."""
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B"):
            return np.asarray(im, dtype=np.float64)
        return np.asarray(im.convert("L"), dtype=np.float64)


def save_gray8(path, values):
    """Save an (H, W) array as an 8-bit greyscale PNG."""
    arr = np.asarray(values)
    arr = np.clip(np.rint(arr.astype(float)), 0, 255).astype(np.uint8)
    atomic_save(Image.fromarray(arr, mode="L"), path)


def save_gray16(path, values):
    """Save an (H, W) array of uint16 values as a 16-bit greyscale PNG."""
    arr = np.asarray(values, dtype=np.uint16)
    atomic_save(Image.fromarray(arr), path)


def save_segmap(path, labels):
    """Write class labels as an indexed PNG carrying the normative palette."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 4:
        raise ValueError("segmentation labels must be in 0..4")
    im = Image.fromarray(labels.astype(np.uint8), mode="P")
    palette = []
    for cid in range(5):
        palette.extend(SEG_PALETTE[cid])
    im.putpalette(palette)
    atomic_save(im, path)


def load_segmap(path):
    with Image.open(path) as im:
        if im.mode != "P":
            raise ValueError(f"{path}: not an indexed PNG")
        return np.asarray(im, dtype=np.uint8)


def atomic_save(im, path):
    """Write a PIL image via temp file + rename so readers never see a torso."""
    tmp = f"{path}.tmp{os.getpid()}"
    im.save(tmp, format="PNG")
    os.replace(tmp, path)


def atomic_write_text(path, text):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def atomic_write_json(path, obj, indent=2):
    atomic_write_text(path, json.dumps(obj, indent=indent) + "\n")
