"""
Cloud segmentation and a cloud-index map
========================================

"""

import pathlib
from datetime import datetime, timedelta, timezone

import numpy as np

# a long/short exposure pair: blue sky, one gray cloud bank, sun disk
size = 128
long_exp = np.zeros((size, size, 3), dtype=np.uint8)
long_exp[..., 2] = 230
yy, xx = np.mgrid[0:size, 0:size]
cloud = ((xx - 90) ** 2 / 2 + (yy - 80) ** 2) <= 24 ** 2
long_exp[cloud] = 170                       # gray: low blue-red contrast
disk = (xx - 40) ** 2 + (yy - 36) ** 2 <= 6 ** 2
long_exp[disk] = 255

short_exp = np.zeros_like(long_exp)
short_exp[disk] = 255                       # only the sun survives

from skycast.segmentation import segment
from skycast.suntrack import detect_sun

obs = detect_sun(short_exp)
print("sun found at", tuple(round(c, 1) for c in obs.position))

seg = segment(long_exp, short_exp, sun=obs.position)
print("class counts ", seg.class_counts())

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
seg.save(out / "segmentation.png")          # palette png, one color per class
print("wrote", out / "segmentation.png")

# cloud index from a stack of daily radiance frames: ten clear days set
# the per-pixel background, the current frame carries a bright anomaly
from skycast.satellite import RadianceStack, cloud_index

t0 = datetime(2019, 5, 1, 12, 0, tzinfo=timezone.utc)
stamps = [t0 + timedelta(days=k) for k in range(10)]
frames = [np.full((64, 64), 20.0) for _ in stamps]
now = t0 + timedelta(days=10)
frame = np.full((64, 64), 20.0)
frame[20:40, 20:40] = 150.0                 # the "cloud"
frame[30, 30] = 240.0
stamps.append(now)
frames.append(frame)

ci = cloud_index(RadianceStack(stamps, frames), now)
print("cloud index range", float(ci.values.min()), "to",
      float(ci.values.max()))
ci.save(out / "cloud_index")                # 16-bit png + json sidecar
print("wrote", out / "cloud_index.png")
