"""Windows written by the imaging pipeline's CLI feed this package.

The two packages share no Python imports; the only contract is the
artifact layout on disk. This test drives the other side through its
command-line entry point and checks that what lands here is usable.
"""
import shutil
import subprocess
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
import torch
from PIL import Image

from skyrnn import ModelConfig, SkyForecaster, load_window
from skyrnn.train import records_to_batch

pytestmark = pytest.mark.skipif(shutil.which("skycast") is None,
                                reason="imaging pipeline CLI not installed")


def utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


def write_archive(root):
    img_dir = root / "img"
    img_dir.mkdir()
    start = utc(2019, 6, 21, 11, 0)
    times = [start + timedelta(minutes=2 * k) for k in range(12)]
    frame = np.zeros((32, 32, 3), np.uint8)
    frame[:] = (60, 80, 200)
    for ts in times:
        stamp = ts.strftime("%Y%m%d%H%M%S")
        Image.fromarray(frame).save(img_dir / f"{stamp}_long.png")
        Image.fromarray(frame // 4).save(img_dir / f"{stamp}_short.png")
    lines = ["timestamp_iso,ghi_wm2"]
    t = start - timedelta(minutes=5)
    while t <= times[-1] + timedelta(minutes=15):
        lines.append(f"{t.strftime('%Y-%m-%dT%H:%M:%S')},{600 + t.minute}")
        t += timedelta(minutes=1)
    ghi_csv = root / "ghi.csv"
    ghi_csv.write_text("\n".join(lines) + "\n")
    return img_dir, ghi_csv


def run_cli(*argv):
    proc = subprocess.run(["skycast", *map(str, argv)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def test_cli_window_is_consumable(tmp_path):
    img_dir, ghi_csv = write_archive(tmp_path)
    index_csv = tmp_path / "index.csv"
    run_cli("dataset", "index", img_dir, ghi_csv, index_csv)
    prefix = tmp_path / "win"
    run_cli("dataset", "window", index_csv, "2019-06-21T11:08:00Z", prefix)

    rec = load_window(prefix)
    assert rec.issue_time == utc(2019, 6, 21, 11, 8)
    assert rec.inputs.shape == (5, 32, 32, 3)
    assert rec.inputs.dtype == np.float32
    assert 0.0 <= rec.inputs.min() and rec.inputs.max() <= 1.0
    assert rec.target_ghi.shape == (5,)
    assert rec.segmentation.shape == (5, 32, 32)
    assert rec.target_mode in ("absolute", "change")

    # and the record must batch straight into the network
    cfg = ModelConfig()
    x, targets = records_to_batch([rec], cfg)
    assert x.shape == (1, 5, 3, 32, 32)
    torch.manual_seed(0)
    model = SkyForecaster(cfg)
    model.eval()
    with torch.no_grad():
        out = model(x)
    assert out["irradiance"].shape == (1, 5)
    assert targets["segmentation"].shape == (1, 5, 32, 32)
