import json
import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from skycast import cli
from skycast.baseline import haurwitz_ghi, solar_zenith
from skycast.config import CONFIG_KEYS
from skycast.dataset import SampleIndex, IndexEntry
from skycast.images import load_gray, load_rgb, load_segmap, save_rgb
from skycast.latent import StateMatrix
from skycast.satellite import RadianceStack
from skycast.series import IrradianceSeries
from skycast.suntrack import SunObservation, save_observations
from skycast.tables import ForecastTable
from skycast.timeutil import format_compact


def utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def dome_image(size=64, seed=0):
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 255, size=(size, size, 3)).astype(np.uint8)
    return img


class TestHelp:
    def test_help_lists_every_config_key(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for key in CONFIG_KEYS:
            assert key.name in out
            default = key.default
            if isinstance(default, tuple):
                default = ",".join(str(v) for v in default)
            assert str(default) in out

    def test_no_command_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2

    def test_unknown_set_key(self, capsys, tmp_path):
        code, _, err = run(capsys, "--set", "nope.key=1", "undistort",
                           str(tmp_path), str(tmp_path))
        assert code == 2
        assert "nope.key" in err


class TestUndistort:
    def cam_args(self, size=64):
        half = (size - 1) / 2
        return ["--set", f"camera.center_x={half}",
                "--set", f"camera.center_y={half}",
                "--set", f"camera.radius_per_radian={size / 3.2}",
                "--set", "undistort.out_size=32"]

    def test_empty_dir(self, capsys, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        out = tmp_path / "out"
        code, _, _ = run(capsys, "undistort", str(src), str(out))
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["written"] == [] and manifest["errors"] == []

    def test_batch_and_idempotence(self, capsys, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        out = tmp_path / "out"
        for k in range(2):
            save_rgb(src / f"img{k}.png", dome_image(seed=k))
        code, _, _ = run(capsys, *self.cam_args(), "undistort",
                         str(src), str(out))
        assert code == 0
        first = (out / "img0.png").read_bytes()
        assert load_rgb(out / "img0.png").shape == (32, 32, 3)
        code, _, _ = run(capsys, *self.cam_args(), "undistort",
                         str(src), str(out))
        assert code == 0
        assert (out / "img0.png").read_bytes() == first

    def test_corrupt_file_listed(self, capsys, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        out = tmp_path / "out"
        save_rgb(src / "good.png", dome_image())
        (src / "bad.png").write_bytes(b"not a png at all")
        code, _, _ = run(capsys, *self.cam_args(), "undistort",
                         str(src), str(out))
        assert code == 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["written"] == ["good.png"]
        assert manifest["errors"][0]["file"] == "bad.png"

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        out = tmp_path / "out"
        save_rgb(src / "img.png", dome_image())
        cfg = tmp_path / "run.cfg"
        cfg.write_text("camera.center_x = 31.5\n"
                       "camera.center_y = 31.5\n"
                       "camera.radius_per_radian = 20\n"
                       "undistort.out_size = 24\n")
        code, _, _ = run(capsys, "--config", str(cfg),
                         "--set", "undistort.out_size=16",
                         "undistort", str(src), str(out))
        assert code == 0
        assert load_rgb(out / "img.png").shape == (16, 16, 3)


def write_pair(d, ts, sun_at=None, missing=None):
    long_img = np.zeros((32, 32, 3), np.uint8)
    long_img[:] = (60, 80, 200)
    short_img = np.zeros((32, 32, 3), np.uint8)
    if sun_at is not None:
        x, y = sun_at
        long_img[y - 2:y + 3, x - 2:x + 3] = 255
        short_img[y - 2:y + 3, x - 2:x + 3] = 255
    stamp = format_compact(ts, seconds=True)
    if missing != "long":
        save_rgb(d / f"{stamp}_long.png", long_img)
    if missing != "short":
        save_rgb(d / f"{stamp}_short.png", short_img)


class TestSegment:
    def test_batch_with_skip(self, capsys, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        out = tmp_path / "out"
        t0 = utc(2019, 6, 21, 11, 0)
        write_pair(src, t0, sun_at=(16, 10))
        write_pair(src, t0 + timedelta(minutes=2), sun_at=(16, 10))
        write_pair(src, t0 + timedelta(minutes=4), missing="short")
        code, _, _ = run(capsys, "segment", str(src), str(out))
        assert code == 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["written"]) == 2
        assert manifest["skipped"][0]["reason"] == "no_short"
        rows = (out / "classes.csv").read_text().strip().splitlines()
        assert rows[0] == "timestamp_iso,sky,cloud,sun,saturation,frame"
        assert len(rows) == 3
        # clear-sky fixture: sky dominates each histogram row
        for row in rows[1:]:
            counts = [int(v) for v in row.split(",")[1:]]
            assert counts[0] > sum(counts[1:])

    def test_written_rasters_are_class_maps(self, capsys, tmp_path):
        src = tmp_path / "in"
        src.mkdir()
        out = tmp_path / "out"
        write_pair(src, utc(2019, 6, 21, 11, 0), sun_at=(16, 10))
        code, _, _ = run(capsys, "segment", str(src), str(out))
        assert code == 0
        name = json.loads((out / "manifest.json").read_text())["written"][0]
        labels = load_segmap(out / name)
        assert labels.shape == (32, 32)
        assert set(np.unique(labels)) <= {0, 1, 2, 3, 4}


def forecast_csv(path, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    t0 = utc(2019, 6, 3, 8, 0)
    issue, horizon, y_true, y_pred = [], [], [], []
    for i in range(240):
        for h in (2.0, 6.0, 10.0):
            issue.append(t0 + timedelta(minutes=2 * i))
            horizon.append(h)
            truth = 400.0 + 200.0 * math.sin(i / 40.0)
            issue_noise = noise * rng.standard_normal()
            y_true.append(truth)
            y_pred.append(truth + issue_noise)
    table = ForecastTable(issue, horizon, y_true, y_pred)
    table.save(path)
    return table


class TestEvaluate:
    def test_reports_and_plot(self, capsys, tmp_path):
        pred = tmp_path / "pred.csv"
        ref = tmp_path / "ref.csv"
        forecast_csv(pred, noise=20.0, seed=1)
        forecast_csv(ref, noise=40.0, seed=2)
        report = tmp_path / "report.json"
        csv_out = tmp_path / "report.csv"
        svg = tmp_path / "day.svg"
        code, out, _ = run(capsys, "--set", "metrics.window_count=5",
                           "--set", "metrics.window_length=50",
                           "evaluate", str(pred), str(ref),
                           "--report", str(report), "--csv", str(csv_out),
                           "--plot", str(svg))
        assert code == 0
        assert out.count("h=") == 3
        body = json.loads(report.read_text())
        assert [r["horizon_min"] for r in body["horizons"]] == \
            [2.0, 6.0, 10.0]
        assert csv_out.read_text().startswith("horizon_min,")
        assert svg.read_text().startswith("<svg ")

    def test_self_reference_fs_zero(self, capsys, tmp_path):
        pred = tmp_path / "pred.csv"
        forecast_csv(pred, noise=25.0, seed=3)
        report = tmp_path / "report.json"
        code, _, _ = run(capsys, "--set", "metrics.window_count=3",
                         "--set", "metrics.window_length=40",
                         "evaluate", str(pred), str(pred),
                         "--report", str(report))
        assert code == 0
        for row in json.loads(report.read_text())["horizons"]:
            assert abs(row["fs_percent"]) < 1e-9

    def test_schema_error_exits_2_with_line(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("issue_time_iso,horizon_min,y_true_wm2,y_pred_wm2\n"
                       "2019-06-03T08:00:00Z,2,400\n")
        good = tmp_path / "good.csv"
        forecast_csv(good)
        code, _, err = run(capsys, "evaluate", str(bad), str(good))
        assert code == 2
        assert "line 2" in err

    def test_seeded_windows_reproducible(self, capsys, tmp_path):
        pred = tmp_path / "pred.csv"
        ref = tmp_path / "ref.csv"
        forecast_csv(pred, noise=20.0, seed=4)
        forecast_csv(ref, noise=40.0, seed=5)
        reports = []
        for k in range(2):
            path = tmp_path / f"rep{k}.json"
            code, _, _ = run(capsys, "--set", "metrics.window_count=7",
                             "--set", "metrics.window_length=30",
                             "evaluate", str(pred), str(ref),
                             "--report", str(path))
            assert code == 0
            reports.append(path.read_bytes())
        assert reports[0] == reports[1]


class TestCloudIndex:
    def test_batch(self, capsys, tmp_path):
        rng = np.random.default_rng(6)
        src = tmp_path / "sat"
        times = [utc(2019, 6, 1 + k, 12, 0) for k in range(4)]
        frames = [rng.integers(10, 200, size=(8, 8)).astype(float)
                  for _ in times]
        RadianceStack(times, frames).save_dir(src)
        out = tmp_path / "ci"
        code, _, _ = run(capsys, "cloudindex", str(src), str(out))
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["written"]) == 4
        first = out / manifest["written"][0]
        values = load_gray(first) / 65535.0
        assert values.min() >= 0.0 and values.max() <= 1.0

    def test_single_time(self, capsys, tmp_path):
        src = tmp_path / "sat"
        times = [utc(2019, 6, 1 + k, 12, 0) for k in range(3)]
        RadianceStack(times, [np.full((4, 4), 50.0)] * 3).save_dir(src)
        out = tmp_path / "ci"
        code, _, _ = run(capsys, "cloudindex", str(src), str(out),
                         "--time", "2019-06-03T12:00:00Z")
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["written"] == ["ci_20190603120000.png"]


class TestSuntrack:
    def synthetic_obs(self, path):
        obs = []
        base = utc(2019, 1, 5, 0, 0)
        for day in range(0, 80, 2):
            for minute in range(540, 901, 5):
                ts = base + timedelta(days=day, minutes=minute)
                pos = (0.1 * minute, 200.0 - 0.05 * minute)
                obs.append(SunObservation(ts, pos, True))
        save_observations(path, obs)

    def test_fit_and_predict(self, capsys, tmp_path):
        obs_csv = tmp_path / "obs.csv"
        self.synthetic_obs(obs_csv)
        model_json = tmp_path / "model.json"
        code, out, _ = run(capsys, "suntrack", "fit", str(obs_csv),
                           str(model_json))
        assert code == 0
        mae = float(out.strip().split("=")[1])
        assert mae < 1e-6
        # predict runs through the ridge-smoothed daily polynomial, so
        # allow the small shrinkage bias
        code, out, _ = run(capsys, "suntrack", "predict",
                           str(model_json), "2019-02-20T11:50:00Z")
        assert code == 0
        x, y = (float(v) for v in out.strip().split(","))
        assert abs(x - 0.1 * 710) < 0.05
        assert abs(y - (200.0 - 0.05 * 710)) < 0.05

    def test_detect_writes_observations(self, capsys, tmp_path):
        src = tmp_path / "img"
        src.mkdir()
        for k in range(3):
            ts = utc(2019, 6, 21, 11, 2 * k)
            img = np.zeros((24, 24, 3), np.uint8)
            img[6 + k:12 + k, 8:14] = 255
            save_rgb(src / f"{format_compact(ts, seconds=True)}_short.png",
                     img)
        out_csv = tmp_path / "obs.csv"
        code, out, _ = run(capsys, "suntrack", "detect", str(src),
                           str(out_csv))
        assert code == 0
        assert "detections=3 of 3" in out
        text = out_csv.read_text()
        assert text.startswith("timestamp_iso,visible,x_px,y_px")
        assert text.count("\n") == 4


class TestPca:
    def test_rank2_ratios_and_clusters(self, capsys, tmp_path):
        rng = np.random.default_rng(7)
        # two separated blobs on a 2-D plane inside 10-D
        factors = np.vstack([rng.normal(size=(40, 2)),
                             rng.normal(size=(40, 2)) + [12.0, 0.0]])
        X = factors @ rng.normal(size=(2, 10))
        states = tmp_path / "states.hnst"
        StateMatrix(X).save(states)
        prefix = tmp_path / "out"
        code, out, _ = run(capsys, "pca", str(states), str(prefix),
                           "-k", "4", "--gmm", "2")
        assert code == 0
        line = out.splitlines()[0]
        assert line.startswith("explained_variance_ratio=")
        total = float(line.split("sum=")[1])
        assert abs(total - 1.0) < 1e-4
        assert (tmp_path / "out_pca.json").exists()
        scores = (tmp_path / "out_scores.csv").read_text()
        assert scores.splitlines()[0] == "pc1,pc2,pc3,pc4"
        clusters = (tmp_path / "out_clusters.csv").read_text()
        assert clusters.splitlines()[0] == "row,cluster"
        labels = [int(r.split(",")[1])
                  for r in clusters.strip().splitlines()[1:]]
        assert len(set(labels[:40])) == 1
        assert len(set(labels[40:])) == 1
        assert labels[0] != labels[-1]


def ghi_value(ts):
    return 600.0 + ts.minute


def make_archive(tmp_path, frame_times):
    img_dir = tmp_path / "img"
    img_dir.mkdir(exist_ok=True)
    for ts in frame_times:
        write_pair(img_dir, ts)
    lo = min(frame_times) - timedelta(minutes=5)
    hi = max(frame_times) + timedelta(minutes=15)
    minutes = []
    t = lo.replace(second=0)
    while t <= hi:
        minutes.append(t)
        t += timedelta(minutes=1)
    series = IrradianceSeries(minutes, [ghi_value(m) for m in minutes])
    csv_path = tmp_path / "ghi.csv"
    series.save(csv_path)
    return img_dir, csv_path


class TestDataset:
    def test_index_split_window(self, capsys, tmp_path):
        frames = [utc(2019, 6, 21, 11, 0) + timedelta(minutes=2 * k)
                  for k in range(12)]
        img_dir, ghi_csv = make_archive(tmp_path, frames)
        index_csv = tmp_path / "index.csv"
        code, out, _ = run(capsys, "dataset", "index", str(img_dir),
                           str(ghi_csv), str(index_csv))
        assert code == 0
        assert "indexed=12 rejected=0" in out
        rejects = (tmp_path / "index.csv.rejects.csv").read_text()
        assert rejects == "timestamp,reason\n"

        split_dir = tmp_path / "splits"
        code, out, _ = run(capsys, "dataset", "split", str(index_csv),
                           str(split_dir))
        assert code == 0
        # 2019-06-21 is an odd day: everything tests
        assert "test=12" in out and "val=0" in out
        assert (split_dir / "val.csv").exists()

        prefix = tmp_path / "win"
        code, out, _ = run(capsys, "dataset", "window", str(index_csv),
                           "2019-06-21T11:08:00Z", str(prefix))
        assert code == 0
        from skycast.dataset import load_window_inputs
        inputs = load_window_inputs(tmp_path / "win_inputs.hnst")
        assert inputs.shape == (5, 32, 32, 3)
        targets = json.loads((tmp_path / "win_targets.json").read_text())
        assert targets["issue_time"] == "2019-06-21T11:08:00"
        assert len(targets["target_ghi"]) == 5
        assert len(targets["seg_files"]) == 5
        assert (tmp_path / "win_seg1.png").exists()

    def test_split_even_days_validate(self, capsys, tmp_path):
        entries = [IndexEntry(utc(2019, 3, 4, 12, 0), "a", "b", 500.0,
                              40.0),
                   IndexEntry(utc(2019, 3, 5, 12, 0), "a", "b", 500.0,
                              40.0),
                   IndexEntry(utc(2018, 7, 3, 12, 0), "a", "b", 500.0,
                              40.0)]
        index_csv = tmp_path / "index.csv"
        SampleIndex(entries).save(index_csv)
        out_dir = tmp_path / "splits"
        code, out, _ = run(capsys, "dataset", "split", str(index_csv),
                           str(out_dir))
        assert code == 0
        assert "2019-03-04" in (out_dir / "val.csv").read_text()
        assert "2019-03-05" in (out_dir / "test.csv").read_text()
        assert "2018-07-03" in (out_dir / "train.csv").read_text()

    def test_window_gap_is_partial(self, capsys, tmp_path):
        frames = [utc(2019, 6, 21, 11, 0) + timedelta(minutes=2 * k)
                  for k in range(6)]
        img_dir, ghi_csv = make_archive(tmp_path, frames)
        index_csv = tmp_path / "index.csv"
        run(capsys, "dataset", "index", str(img_dir), str(ghi_csv),
            str(index_csv))
        code, _, err = run(capsys, "dataset", "window", str(index_csv),
                           "2019-06-21T11:10:00Z", str(tmp_path / "w"))
        assert code == 1
        assert "missing frame" in err

    def test_wrong_arg_count_is_usage(self, capsys, tmp_path):
        code, _, err = run(capsys, "dataset", "split", str(tmp_path))
        assert code == 2
        assert "positional" in err

    def test_index_with_rejects_is_partial(self, capsys, tmp_path):
        frames = [utc(2019, 6, 21, 11, 0), utc(2019, 6, 21, 11, 2)]
        img_dir, ghi_csv = make_archive(tmp_path, frames)
        write_pair(img_dir, utc(2019, 6, 21, 11, 4), missing="short")
        index_csv = tmp_path / "index.csv"
        code, out, _ = run(capsys, "dataset", "index", str(img_dir),
                           str(ghi_csv), str(index_csv),
                           "--rejects", str(tmp_path / "rej.csv"))
        assert code == 1
        assert "rejected=1" in out
        assert "no_pair" in (tmp_path / "rej.csv").read_text()


class TestBaseline:
    def test_table_then_self_evaluation(self, capsys, tmp_path):
        t0 = utc(2019, 6, 21, 8, 0)
        minutes = [t0 + timedelta(minutes=2 * k) for k in range(120)]
        values = [haurwitz_ghi(solar_zenith(t, 48.713, 2.208)) * 0.8
                  for t in minutes]
        ghi_csv = tmp_path / "ghi.csv"
        IrradianceSeries(minutes, values).save(ghi_csv)
        out_csv = tmp_path / "sp.csv"
        code, out, _ = run(capsys, "baseline", str(ghi_csv), str(out_csv))
        assert code == 0
        assert "horizons=3" in out
        report = tmp_path / "rep.json"
        code, _, _ = run(capsys, "--set", "metrics.window_count=3",
                         "--set", "metrics.window_length=20",
                         "evaluate", str(out_csv), str(out_csv),
                         "--report", str(report))
        assert code == 0
        for row in json.loads(report.read_text())["horizons"]:
            assert abs(row["fs_percent"]) < 1e-9
