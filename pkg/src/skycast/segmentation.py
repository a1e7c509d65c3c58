"""Five-class sky segmentation from an exposure pair and a sun position.

Classes: 0 sky, 1 cloud, 2 sun, 3 saturation, 4 frame. Cloud against
sky is decided on the long exposure by thresholding the normalized
blue-to-red ratio (B - R)/(B + R): gray clouds score near 0, blue sky
near 1, so values below the threshold become cloud. The threshold comes
from a between-class-variance scan of the ratio histogram, falling back
to a fixed value when the distribution is unimodal (nearly constant
ratio gives the scan nothing to split). Near the sun the threshold is
relaxed downward, since forward-scattered light drags the ratio down
even under clear sky.

The sun and saturation classes read the short exposure, where only the
sun and strong diffusion still register: the blue channel is weighted
by a Gaussian window centered on the sun position (std = half the image
width) and pixels reaching 90% of the weighted maximum are sun; of the
rest, blue above 98% of the dtype maximum is saturation. Pixels black
in both exposures are frame. Precedence: frame > sun > saturation >
cloud/sky.
"""

from dataclasses import dataclass, field

import numpy as np

from . import images
from .errors import ShapeError

SKY, CLOUD, SUN, SATURATION, FRAME = range(5)


@dataclass(frozen=True)
class HytaConfig:
    circumsolar_disk_diameter: float = 0.12    # fraction of image width
    circumsolar_relaxation: float = 0.10
    unimodality_std_threshold: float = 0.03
    fixed_threshold: float = 0.25
    sun_threshold_frac: float = 0.90
    saturation_frac: float = 0.98

    def __post_init__(self):
        if not 0 < self.circumsolar_relaxation < 1:
            raise ValueError("circumsolar_relaxation must be in (0, 1)")
        if not 0 < self.circumsolar_disk_diameter < 1:
            raise ValueError("circumsolar_disk_diameter must be in (0, 1)")

    @classmethod
    def from_config(cls, cfg):
        return cls(
            circumsolar_disk_diameter=cfg["segmentation.circumsolar_diameter_frac"],
            circumsolar_relaxation=cfg["segmentation.circumsolar_relaxation"],
            unimodality_std_threshold=cfg["segmentation.unimodal_std_threshold"],
            fixed_threshold=cfg["segmentation.fixed_threshold"],
            sun_threshold_frac=cfg["segmentation.sun_threshold_frac"],
            saturation_frac=cfg["segmentation.saturation_frac"],
        )


@dataclass
class SegMap:
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ShapeError("labels must be a 2-d raster")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 4):
            raise ValueError("class ids must be in 0..4")
        self.labels = self.labels.astype(np.uint8)

    @property
    def size(self):
        h, w = self.labels.shape
        return (w, h)

    def class_counts(self):
        counts = np.bincount(self.labels.ravel(), minlength=5)
        return {name: int(c) for name, c in zip(images.SEG_CLASS_NAMES, counts)}

    def save(self, path):
        images.save_segmap(path, self.labels)

    @classmethod
    def load(cls, path):
        return cls(images.load_segmap(path))


def normalized_brb(img):
    """(B - R)/(B + R) per pixel; 0 where the denominator vanishes."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"need an (H, W, 3) image, got {img.shape}")
    r = img[..., 0].astype(float)
    b = img[..., 2].astype(float)
    denom = b + r
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom == 0.0, 0.0, (b - r) / np.where(denom == 0, 1, denom))
    return out


def hyta_threshold(nbrb, cfg=None):
    """Cloud/sky split point for a set of ratio values.

    Unimodal distributions (std below the configured floor) get the
    fixed threshold; otherwise the 256-bin histogram split maximizing
    the between-class variance is returned. Bin centers are affine in
    the bin index, so the variance ranking is evaluated in exact integer
    arithmetic; ties (plateaus across empty gap bins) go to the first
    split, making the result deterministic.
    """
    cfg = cfg or HytaConfig()
    vals = np.asarray(nbrb, dtype=float).ravel()
    if vals.size == 0 or float(vals.std()) < cfg.unimodality_std_threshold:
        return float(cfg.fixed_threshold)
    vmin, vmax = float(vals.min()), float(vals.max())
    if vmax <= vmin:
        return float(cfg.fixed_threshold)
    hist, edges = np.histogram(vals, bins=256, range=(vmin, vmax))
    n_total = int(hist.sum())
    m_total = int((hist * np.arange(256)).sum())
    # between-class variance is proportional to
    # (m0*n_total - m_total*n0)^2 / (n0*(n_total - n0))
    n0 = 0
    m0 = 0
    best_k = best_a = best_b = None
    for k in range(255):
        n0 += int(hist[k])
        m0 += int(hist[k]) * k
        if n0 == 0 or n0 == n_total:
            continue
        a = (m0 * n_total - m_total * n0) ** 2
        b = n0 * (n_total - n0)
        if best_k is None or a * best_b > best_a * b:
            best_k, best_a, best_b = k, a, b
    if best_k is None:
        return float(cfg.fixed_threshold)
    return float(edges[best_k + 1])


def _dtype_max(img):
    if np.issubdtype(img.dtype, np.integer):
        return float(np.iinfo(img.dtype).max)
    return 1.0


def _sun_mask(short_blue, sun, width, frac):
    sx, sy = float(sun[0]), float(sun[1])
    h, w = short_blue.shape
    sigma = width / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    window = np.exp(-(((xx - sx) ** 2) + ((yy - sy) ** 2)) / (2.0 * sigma * sigma))
    score = short_blue.astype(float) * window
    top = float(score.max())
    if top <= 0.0:
        return np.zeros_like(short_blue, dtype=bool)
    return score >= frac * top


def segment(long_exp, short_exp, sun=None, cfg=None):
    """Label every pixel of an exposure pair.

    `sun` is an (x, y) pixel position or None when no estimate exists;
    without it the sun class and the circumsolar relaxation are skipped.
    """
    cfg = cfg or HytaConfig()
    long_exp = np.asarray(long_exp)
    short_exp = np.asarray(short_exp)
    if long_exp.shape != short_exp.shape:
        raise ShapeError(f"exposure sizes differ: {long_exp.shape} vs "
                         f"{short_exp.shape}")
    if long_exp.ndim != 3 or long_exp.shape[2] != 3:
        raise ShapeError(f"need (H, W, 3) images, got {long_exp.shape}")
    h, w = long_exp.shape[:2]
    frame = np.all(long_exp == 0, axis=-1) & np.all(short_exp == 0, axis=-1)

    nbrb = normalized_brb(long_exp)
    thr = hyta_threshold(nbrb[~frame], cfg)
    thr_map = np.full((h, w), thr)
    sun_mask = np.zeros((h, w), dtype=bool)
    if sun is not None:
        yy, xx = np.mgrid[0:h, 0:w]
        radius = cfg.circumsolar_disk_diameter * w / 2.0
        disk = (xx - sun[0]) ** 2 + (yy - sun[1]) ** 2 <= radius ** 2
        # relax downward regardless of the threshold's sign
        thr_map[disk] = thr - cfg.circumsolar_relaxation * abs(thr)
        sun_mask = _sun_mask(short_exp[..., 2], sun, w, cfg.sun_threshold_frac)

    labels = np.where(nbrb < thr_map, CLOUD, SKY).astype(np.uint8)
    saturation = short_exp[..., 2].astype(float) > (cfg.saturation_frac
                                                    * _dtype_max(short_exp))
    labels[saturation] = SATURATION
    labels[sun_mask] = SUN
    labels[frame] = FRAME
    meta = {"threshold": thr, "sun": None if sun is None else
            (float(sun[0]), float(sun[1]))}
    return SegMap(labels, meta=meta)
