"""
Fisheye to plane and back
=========================

"""

# build a fake all-sky frame: a checkerboard seen through an
# equidistant fisheye, sun drawn near the top
import pathlib

import numpy as np

size = 256
yy, xx = np.mgrid[0:size, 0:size]
board = (((xx // 64) + (yy // 64)) % 2 * 200 + 30).astype(np.uint8)
frame = np.stack([board // 3, board // 2, board], axis=-1)
sun = (xx - 128) ** 2 + (yy - 60) ** 2 <= 8 ** 2
frame[sun] = 255

from skycast.geometry import CameraModel, distort_image, undistort_image
from skycast.images import save_rgb

cam = CameraModel(center=(128.0, 128.0), radius_per_radian=80.0,
                  image_size=(size, size))

# resample onto the ground-parallel plane; pixels past the clip angle
# come back as the frame color. The plane raster oversamples the source
# so the return trip stays cheap
plane = undistort_image(frame, cam, out_size=512)

# and back again, to see what the resampling costs
back = distort_image(plane, cam)

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
save_rgb(out / "fisheye.png", frame)
save_rgb(out / "plane.png", plane)
save_rgb(out / "fisheye_again.png", back)

# compare inside the clip angle only: sky past max_zenith never reaches
# the plane and comes back as frame color by design
r = np.hypot(xx - 128.0, yy - 128.0)
interior = r < 0.9 * cam.radius_per_radian * cam.max_zenith
err = np.abs(back[interior].astype(float) - frame[interior].astype(float))
print("wrote", out / "plane.png")
print("interior roundtrip MAE", round(err.mean(), 3), "of 255")
