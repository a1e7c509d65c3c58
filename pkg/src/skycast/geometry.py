"""Equidistant-fisheye camera geometry.

Maps between three representations of a sky direction:

  raw pixel (x, y)   fisheye image, x right, y down, origin top-left,
                     pixel centers at integer coordinates
  sky angles         zenith z in [0, pi/2) from the vertical, azimuth a
                     in [0, 2pi) with a=0 north (-y in the image) and
                     a=pi/2 east (+x), before camera-roll correction
  plane (u, v)       the sky re-projected onto a plane parallel to the
                     ground, normalized so the clip angle `max_zenith`
                     lands on the unit circle; u east, v south (so the
                     raster orientation matches the fisheye image)

The lens model is azimuthal equidistant: the radial pixel distance from
the dome center is proportional to the zenith angle,
r = radius_per_radian * z. The plane projection is gnomonic in the
radial direction, rho = tan(z) / tan(max_zenith), which maps straight
horizontal trajectories over the camera to straight lines.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import OutOfDome, OutOfPlane, ShapeError

FRAME_COLOR = (0, 0, 0)


@dataclass(frozen=True)
class CameraModel:
    """Calibration of one all-sky camera."""

    center: tuple          # (cx, cy) px
    radius_per_radian: float
    image_size: tuple      # (width, height) px
    max_zenith: float = math.radians(70.0)
    azimuth_offset: float = 0.0

    def __post_init__(self):
        cx, cy = self.center
        w, h = self.image_size
        if self.radius_per_radian <= 0:
            raise ValueError("radius_per_radian must be > 0")
        if not 0 < self.max_zenith < math.pi / 2:
            raise ValueError("max_zenith must be in (0, pi/2)")
        if not (0 <= cx < w and 0 <= cy < h):
            raise ValueError("center must lie inside the image bounds")

    @property
    def dome_radius(self):
        """Pixel radius of the horizon (zenith = pi/2)."""
        return self.radius_per_radian * (math.pi / 2)

    @classmethod
    def from_config(cls, cfg, image_size):
        return cls(
            center=(cfg["camera.center_x"], cfg["camera.center_y"]),
            radius_per_radian=cfg["camera.radius_per_radian"],
            image_size=tuple(image_size),
            max_zenith=math.radians(cfg["camera.max_zenith_deg"]),
            azimuth_offset=math.radians(cfg["camera.azimuth_offset_deg"]),
        )


@dataclass(frozen=True)
class SkyAngles:
    """Direction in the sky; fields may be scalars or equally shaped arrays."""

    zenith: object
    azimuth: object


def pixel_to_angles(p, cam):
    """Convert pixel coordinates to sky angles.

    `p` is an (x, y) pair or an (..., 2) array. Raises OutOfDome if any
    point lies beyond the horizon circle. The dome center itself has an
    undefined azimuth and returns 0 by convention.
    """
    p = np.asarray(p, dtype=float)
    dx = p[..., 0] - cam.center[0]
    dy = p[..., 1] - cam.center[1]
    r = np.hypot(dx, dy)
    if np.any(r > cam.dome_radius * (1 + 1e-12)):
        raise OutOfDome(f"radial distance {float(np.max(r)):.3f} px exceeds "
                        f"dome radius {cam.dome_radius:.3f} px")
    zenith = r / cam.radius_per_radian
    azimuth = np.where(r == 0.0, 0.0,
                       np.mod(np.arctan2(dx, -dy) - cam.azimuth_offset, 2 * math.pi))
    if p.ndim == 1:
        return SkyAngles(float(zenith), float(azimuth))
    return SkyAngles(zenith, azimuth)


def angles_to_pixel(a, cam):
    """Inverse of pixel_to_angles; returns (x, y) or an (..., 2) array."""
    zenith = np.asarray(a.zenith, dtype=float)
    azimuth = np.asarray(a.azimuth, dtype=float)
    r = zenith * cam.radius_per_radian
    ang = azimuth + cam.azimuth_offset
    x = cam.center[0] + r * np.sin(ang)
    y = cam.center[1] - r * np.cos(ang)
    out = np.stack([x, y], axis=-1)
    if zenith.ndim == 0:
        return float(out[0]), float(out[1])
    return out


def angles_to_plane(a, cam):
    """Project sky angles onto the ground-parallel plane.

    Returns (u, v) normalized to the plane half-width: the clip angle
    `cam.max_zenith` maps to the unit circle. Raises OutOfPlane when a
    zenith angle reaches the clip angle.
    """
    zenith = np.asarray(a.zenith, dtype=float)
    azimuth = np.asarray(a.azimuth, dtype=float)
    if np.any(zenith >= cam.max_zenith):
        raise OutOfPlane(f"zenith {float(np.max(zenith)):.4f} rad >= "
                         f"max_zenith {cam.max_zenith:.4f} rad")
    rho = np.tan(zenith) / math.tan(cam.max_zenith)
    u = rho * np.sin(azimuth)
    v = -rho * np.cos(azimuth)
    out = np.stack([u, v], axis=-1)
    if zenith.ndim == 0:
        return float(out[0]), float(out[1])
    return out


def plane_to_angles(uv, cam):
    """Inverse of angles_to_plane."""
    uv = np.asarray(uv, dtype=float)
    u = uv[..., 0]
    v = uv[..., 1]
    rho = np.hypot(u, v)
    zenith = np.arctan(rho * math.tan(cam.max_zenith))
    azimuth = np.where(rho == 0.0, 0.0, np.mod(np.arctan2(u, -v), 2 * math.pi))
    if uv.ndim == 1:
        return SkyAngles(float(zenith), float(azimuth))
    return SkyAngles(zenith, azimuth)


def _plane_grid(out_size):
    """Pixel-center (u, v) coordinates of an out_size x out_size plane raster."""
    step = 2.0 / out_size
    coords = -1.0 + step * (np.arange(out_size) + 0.5)
    u = np.broadcast_to(coords[None, :], (out_size, out_size))
    v = np.broadcast_to(coords[:, None], (out_size, out_size))
    return u, v


def _sample(img, x, y, order, cval=0.0):
    """Sample img (H, W[, C]) at continuous pixel coords, channels last."""
    img = np.asarray(img, dtype=float)
    coords = np.stack([y, x])
    if img.ndim == 2:
        return map_coordinates(img, coords, order=order, mode="constant", cval=cval)
    planes = [map_coordinates(img[..., c], coords, order=order, mode="constant",
                              cval=cval) for c in range(img.shape[2])]
    return np.stack(planes, axis=-1)


def undistort_image(img, cam, out_size=128, order=1):
    """Resample a fisheye image onto the ground-parallel plane.

    Inverse mapping: every output pixel is projected back through
    plane -> angles -> pixel and the source is sampled bilinearly
    (order=1) or with nearest neighbor (order=0, for label rasters).
    Output pixels outside the projected dome are the frame color.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if (w, h) != tuple(cam.image_size):
        raise ShapeError(f"image size {(w, h)} does not match camera {cam.image_size}")
    u, v = _plane_grid(out_size)
    rho = np.hypot(u, v)
    inside = rho < 1.0
    zenith = np.arctan(rho * math.tan(cam.max_zenith))
    azimuth = np.where(rho == 0.0, 0.0, np.arctan2(u, -v))
    ang = azimuth + cam.azimuth_offset
    r = zenith * cam.radius_per_radian
    x = cam.center[0] + r * np.sin(ang)
    y = cam.center[1] - r * np.cos(ang)
    out = _sample(img, x, y, order=order)
    if img.ndim == 3:
        out[~inside] = FRAME_COLOR
    else:
        out[~inside] = 0
    if np.issubdtype(img.dtype, np.integer):
        out = np.clip(np.rint(out), 0, 255).astype(img.dtype)
    return out


def undistort_labels(labels, cam, out_size=128, fill=4):
    """Nearest-neighbor variant for class-id rasters (never interpolated)."""
    labels = np.asarray(labels)
    out = undistort_image(labels.astype(np.int32), cam, out_size=out_size, order=0)
    u, v = _plane_grid(out_size)
    out[np.hypot(u, v) >= 1.0] = fill
    return out.astype(labels.dtype)


def distort_image(plane_img, cam, order=1):
    """Resample a plane raster back onto the fisheye grid.

    Fisheye pixels whose zenith angle reaches the clip angle fall outside
    the plane raster and come back as the frame color.
    """
    plane_img = np.asarray(plane_img)
    size = plane_img.shape[0]
    if plane_img.shape[1] != size:
        raise ShapeError("plane raster must be square")
    w, h = cam.image_size
    xs = np.broadcast_to(np.arange(w, dtype=float)[None, :], (h, w))
    ys = np.broadcast_to(np.arange(h, dtype=float)[:, None], (h, w))
    dx = xs - cam.center[0]
    dy = ys - cam.center[1]
    r = np.hypot(dx, dy)
    zenith = r / cam.radius_per_radian
    inside = zenith < cam.max_zenith
    azimuth = np.where(r == 0.0, 0.0, np.arctan2(dx, -dy) - cam.azimuth_offset)
    rho = np.where(inside, np.tan(np.where(inside, zenith, 0.0)), 0.0)
    rho = rho / math.tan(cam.max_zenith)
    u = rho * np.sin(azimuth)
    v = -rho * np.cos(azimuth)
    # plane raster pixel centers: u = -1 + (i + 0.5) * 2 / size
    px = (u + 1.0) * size / 2.0 - 0.5
    py = (v + 1.0) * size / 2.0 - 0.5
    out = _sample(plane_img, px, py, order=order)
    if plane_img.ndim == 3:
        out[~inside] = FRAME_COLOR
    else:
        out[~inside] = 0
    if np.issubdtype(plane_img.dtype, np.integer):
        out = np.clip(np.rint(out), 0, 255).astype(plane_img.dtype)
    return out
