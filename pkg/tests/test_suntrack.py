import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from skycast.errors import CoverageError
from skycast.suntrack import (SunObservation, SunTrajectoryModel, detect_sun,
                              fit_trajectory, holdout_mae, load_observations,
                              observations_from_csv, observations_to_csv,
                              periodic_design, save_observations, smooth_day,
                              sun_position)


def disk_image(cx, cy, radius=6, size=(120, 160), level=255):
    img = np.zeros(size + (3,), dtype=np.uint8)
    yy, xx = np.mgrid[0:size[0], 0:size[1]]
    img[(xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2, 2] = level
    return img


class TestDetectSun:
    def test_black_image_not_visible(self):
        obs = detect_sun(np.zeros((64, 64, 3), dtype=np.uint8))
        assert not obs.visible and obs.position is None

    def test_disk_centroid(self):
        obs = detect_sun(disk_image(80, 40))
        assert obs.visible
        assert obs.position[0] == pytest.approx(80, abs=0.5)
        assert obs.position[1] == pytest.approx(40, abs=0.5)

    def test_largest_component_wins(self):
        img = np.zeros((100, 100, 3), dtype=np.uint8)
        img[10:30, 10:25, 2] = 255      # area 300
        img[70:74, 70:75, 2] = 255      # area 20
        obs = detect_sun(img)
        assert obs.position[0] == pytest.approx(17.0, abs=0.01)
        assert obs.position[1] == pytest.approx(19.5, abs=0.01)

    def test_small_blob_ignored(self):
        img = np.zeros((64, 64, 3), dtype=np.uint8)
        img[5:8, 5:8, 2] = 255          # area 9 < default area_min 10
        assert not detect_sun(img).visible

    def test_four_connectivity(self):
        # a diagonal touch must not merge components
        img = np.zeros((40, 40, 3), dtype=np.uint8)
        img[10:13, 10:13, 2] = 255      # 3x3 = 9
        img[13:17, 13:17, 2] = 255      # 4x4 = 16, corner-adjacent only
        obs = detect_sun(img, area_min=5)
        assert obs.position == (pytest.approx(14.5), pytest.approx(14.5))

    def test_translation_equivariance(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            cx, cy = rng.integers(20, 60, 2)
            a = detect_sun(disk_image(int(cx), int(cy), size=(100, 100)))
            b = detect_sun(disk_image(int(cx) + 15, int(cy) + 7, size=(100, 100)))
            assert b.position[0] - a.position[0] == pytest.approx(15, abs=1e-9)
            assert b.position[1] - a.position[1] == pytest.approx(7, abs=1e-9)

    def test_saturation_level_respected(self):
        img = disk_image(30, 30, level=200)
        assert not detect_sun(img, saturation_level=250).visible
        assert detect_sun(img, saturation_level=180).visible


def synthetic_observations(minutes, n_days=45, seed=0, noise=0.0,
                           outlier_frac=0.0, year=2018):
    """Detections generated from the periodic basis itself."""
    rng = np.random.default_rng(seed)
    true = {}
    for m in minutes:
        bx = np.array([400 + 0.05 * m, 30.0, -12.0, 4.0, 2.5])
        by = np.array([300 - 0.03 * m, -18.0, 9.0, -3.0, 1.5])
        true[m] = (bx, by)
    obs = []
    t0 = datetime(year, 1, 5, tzinfo=timezone.utc)
    for k in range(n_days):
        day = t0 + timedelta(days=int(k * 360 / n_days) % 360)
        for m in minutes:
            ts = day.replace(hour=m // 60, minute=m % 60)
            from skycast.timeutil import day_number
            phi = periodic_design(day_number(ts))
            x = float(phi @ true[m][0]) + rng.normal(0, noise)
            y = float(phi @ true[m][1]) + rng.normal(0, noise)
            if outlier_frac and rng.uniform() < outlier_frac:
                x, y = rng.uniform(0, 800), rng.uniform(0, 600)
            obs.append(SunObservation(ts, (x, y), True))
    return obs, true


class TestFitTrajectory:
    def test_exact_recovery_from_basis(self):
        minutes = list(range(480, 1020, 60))
        obs, true = synthetic_observations(minutes)
        model = fit_trajectory(obs, image_width=800.0)
        from skycast.timeutil import day_number
        worst = 0.0
        for o in obs:
            m = o.timestamp.hour * 60 + o.timestamp.minute
            x, y = model.minute_estimate(m, day_number(o.timestamp))
            worst = max(worst, abs(x - o.position[0]), abs(y - o.position[1]))
        assert worst < 1e-6

    def test_outlier_robustness_and_l1_beats_l2(self):
        minutes = [600, 660, 720]
        obs, true = synthetic_observations(minutes, n_days=60, seed=3,
                                           outlier_frac=0.2)
        model = fit_trajectory(obs)
        from skycast.timeutil import day_number
        l1_err, l2_err = [], []
        by_minute = {m: [] for m in minutes}
        for o in obs:
            by_minute[o.timestamp.hour * 60 + o.timestamp.minute].append(o)
        for m in minutes:
            group = by_minute[m]
            days = np.array([day_number(o.timestamp) for o in group])
            phi = periodic_design(days)
            xs = np.array([o.position[0] for o in group])
            beta_l2 = np.linalg.lstsq(phi, xs, rcond=None)[0]
            clean_x = phi @ true[m][0]
            l1_err.extend(np.abs(phi @ model.minutes[m][0] - clean_x))
            l2_err.extend(np.abs(phi @ beta_l2 - clean_x))
        assert np.median(l1_err) < 1.0
        assert np.median(l1_err) <= np.median(l2_err)

    def test_constant_positions(self):
        t0 = datetime(2017, 2, 1, 12, 30, tzinfo=timezone.utc)
        obs = [SunObservation(t0 + timedelta(days=3 * k), (250.0, 180.0), True)
               for k in range(40)]
        model = fit_trajectory(obs)
        bx, by = model.minutes[750]
        assert bx[0] == pytest.approx(250.0, abs=1e-8)
        assert by[0] == pytest.approx(180.0, abs=1e-8)
        assert np.max(np.abs(bx[1:])) < 1e-8
        assert np.max(np.abs(by[1:])) < 1e-8

    def test_too_few_days_rejected(self):
        minutes = [720]
        obs, _ = synthetic_observations(minutes, n_days=10)
        with pytest.raises(CoverageError):
            fit_trajectory(obs, min_days=30)

    def test_sparse_minutes_left_unfitted(self):
        minutes = list(range(500, 560, 10))
        obs, _ = synthetic_observations(minutes, n_days=40)
        extra_ts = obs[0].timestamp.replace(hour=23, minute=50)
        sparse = obs + [SunObservation(extra_ts, (10.0, 10.0), True)]
        model = fit_trajectory(sparse)
        assert 1430 not in model.minutes
        assert set(minutes) == set(model.minutes)

    def test_invisible_only_rejected(self):
        t0 = datetime(2018, 3, 1, tzinfo=timezone.utc)
        obs = [SunObservation(t0 + timedelta(days=k), None, False)
               for k in range(60)]
        with pytest.raises(CoverageError):
            fit_trajectory(obs)


def polynomial_model(coeffs_x, coeffs_y, minutes, ridge=0.0):
    """Model whose per-minute estimates follow an exact polynomial."""
    m = {}
    for minute in minutes:
        t = (minute - 720.0) / 720.0
        x = sum(c * t ** k for k, c in enumerate(coeffs_x))
        y = sum(c * t ** k for k, c in enumerate(coeffs_y))
        m[minute] = (np.array([x, 0, 0, 0, 0], dtype=float),
                     np.array([y, 0, 0, 0, 0], dtype=float))
    return SunTrajectoryModel(minutes=m, ridge=ridge, image_width=800.0)


class TestSmoothDay:
    DATE = datetime(2019, 6, 21, tzinfo=timezone.utc)

    def test_reproduces_exact_polynomial(self):
        cx = [400.0, 120.0, -60.0, 8.0, 3.0]
        cy = [300.0, -80.0, 40.0, -5.0, 1.0]
        minutes = list(range(400, 1100, 7))
        model = polynomial_model(cx, cy, minutes, ridge=0.0)
        out = smooth_day(model, self.DATE, minutes)
        t = (np.array(minutes) - 720.0) / 720.0
        expect_x = sum(c * t ** k for k, c in enumerate(cx))
        expect_y = sum(c * t ** k for k, c in enumerate(cy))
        assert np.max(np.abs(out[:, 0] - expect_x)) < 1e-8
        assert np.max(np.abs(out[:, 1] - expect_y)) < 1e-8

    def test_spike_is_damped(self):
        cx = [400.0, 100.0, -40.0, 0.0, 0.0]
        minutes = list(range(400, 1100, 2))
        model = polynomial_model(cx, [300.0], minutes, ridge=1e-3)
        spike_minute = 750
        bx, by = model.minutes[spike_minute]
        model.minutes[spike_minute] = (bx + np.array([50, 0, 0, 0, 0.0]), by)
        out = smooth_day(model, self.DATE, [spike_minute])[0]
        t = (spike_minute - 720.0) / 720.0
        clean = sum(c * t ** k for k, c in enumerate(cx))
        assert abs(out[0] - clean) < 0.2 * 50

    def test_monotone_arc_keeps_direction(self):
        cx = [400.0, 150.0, 0.0, 0.0, 0.0]     # strictly increasing in t
        minutes = list(range(300, 1200, 5))
        model = polynomial_model(cx, [300.0], minutes, ridge=1e-3)
        out = smooth_day(model, self.DATE, list(range(320, 1180)))
        assert np.all(np.diff(out[:, 0]) > 0)

    def test_underdetermined_rejected(self):
        model = polynomial_model([1.0], [1.0], [700, 710, 720])
        with pytest.raises(CoverageError):
            smooth_day(model, self.DATE)


class TestSunPosition:
    def test_matches_noiseless_observations(self):
        minutes = list(range(420, 1080, 5))
        obs, _ = synthetic_observations(minutes, n_days=40, seed=2)
        # per-minute positions that are polynomial in minute: rebuild a
        # simple quadratic arc so the daily polynomial is exact
        model = polynomial_model([420.0, 130.0, -75.0], [310.0, -60.0, 35.0],
                                 minutes, ridge=0.0)
        ts = datetime(2019, 6, 21, 10, 35, tzinfo=timezone.utc)
        x, y = sun_position(model, ts)
        t = (635 - 720.0) / 720.0
        assert x == pytest.approx(420 + 130 * t - 75 * t * t, abs=1e-6)
        assert y == pytest.approx(310 - 60 * t + 35 * t * t, abs=1e-6)

    def test_outside_fitted_range_rejected(self):
        model = polynomial_model([1.0], [1.0], list(range(600, 800, 10)))
        with pytest.raises(CoverageError):
            sun_position(model, datetime(2019, 6, 21, 5, 0,
                                         tzinfo=timezone.utc))

    def test_consecutive_minutes_move_little(self):
        minutes = list(range(300, 1200, 5))
        model = polynomial_model([400.0, 180.0, -90.0, 10.0, 2.0],
                                 [300.0, -120.0, 55.0, -6.0, 1.0], minutes)
        date = datetime(2019, 6, 21, tzinfo=timezone.utc)
        out = smooth_day(model, date, list(range(310, 1190)))
        step = np.hypot(np.diff(out[:, 0]), np.diff(out[:, 1]))
        assert np.max(step) < 0.01 * model.image_width

    def test_reorder_invariance(self):
        minutes = list(range(500, 900, 20))
        obs, _ = synthetic_observations(minutes, n_days=40, seed=5, noise=0.5)
        m1 = fit_trajectory(obs)
        rng = np.random.default_rng(0)
        shuffled = list(obs)
        rng.shuffle(shuffled)
        m2 = fit_trajectory(shuffled)
        date = datetime(2018, 7, 1, tzinfo=timezone.utc)
        a = smooth_day(m1, date, minutes)
        b = smooth_day(m2, date, minutes)
        assert np.array_equal(a, b)

    def test_holdout_mae_near_zero_on_clean_data(self):
        minutes = list(range(420, 1080, 5))
        model = polynomial_model([420.0, 130.0, -75.0], [310.0, -60.0, 35.0],
                                 minutes, ridge=0.0)
        from skycast.timeutil import day_number
        date = datetime(2019, 6, 21, tzinfo=timezone.utc)
        obs = []
        for m in minutes[::7]:
            ts = date.replace(hour=m // 60, minute=m % 60)
            pos = smooth_day(model, date, [m])[0]
            obs.append(SunObservation(ts, (float(pos[0]), float(pos[1])), True))
        assert holdout_mae(model, obs) < 1e-9 / 800.0 + 1e-12


class TestObservationIO:
    def test_csv_roundtrip(self, tmp_path):
        t0 = datetime(2018, 4, 2, 9, 0, tzinfo=timezone.utc)
        obs = [SunObservation(t0, (12.5, 77.25), True),
               SunObservation(t0 + timedelta(minutes=1), None, False)]
        path = tmp_path / "obs.csv"
        save_observations(path, obs)
        back = load_observations(path)
        assert back[0].timestamp == obs[0].timestamp
        assert back[0].position == obs[0].position
        assert back[1].visible is False and back[1].position is None

    def test_model_json_roundtrip(self, tmp_path):
        minutes = list(range(600, 700, 10))
        obs, _ = synthetic_observations(minutes, n_days=35, seed=8)
        model = fit_trajectory(obs, image_width=800.0)
        path = tmp_path / "model.json"
        model.save(path)
        back = SunTrajectoryModel.load(path)
        assert back.poly_degree == model.poly_degree
        assert back.ridge == model.ridge
        assert back.image_width == 800.0
        for m in model.minutes:
            np.testing.assert_array_equal(back.minutes[m][0],
                                          model.minutes[m][0])

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            SunObservation(None, (1.0, 2.0), False)
