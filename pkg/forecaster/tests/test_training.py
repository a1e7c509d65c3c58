import csv
import json

import numpy as np
import pytest
import torch

from skyrnn import (GHI_SCALE_WM2, ModelConfig, load_checkpoint,
                    load_dataset, save_checkpoint, train)
from skyrnn.errors import DomainError, SchemaError
from skyrnn.train import export_predictions, predict_records, records_to_batch
from skyrnn.world import build_dataset

CFG = ModelConfig(image_size=16)


@pytest.fixture(scope="module")
def records(tmp_path_factory):
    d = tmp_path_factory.mktemp("world")
    build_dataset(d, 8, seed=0, size=16)
    return load_dataset(d)


@pytest.fixture(scope="module")
def trained(records):
    model, log = train(records, CFG, steps=4, seed=0, log_every=2)
    return model, log


class TestBatching:
    def test_shapes_and_scaling(self, records):
        x, targets = records_to_batch(records[:3], CFG)
        assert x.shape == (3, 5, 3, 16, 16)
        assert x.dtype == torch.float32
        assert targets["segmentation"].dtype == torch.int64
        np.testing.assert_allclose(
            targets["irradiance"][0].numpy() * GHI_SCALE_WM2,
            records[0].target_ghi, rtol=1e-6)

    def test_bin_indices_only_with_distribution(self, records):
        _, plain = records_to_batch(records[:2], CFG)
        assert "bin_indices" not in plain
        cfg = ModelConfig(image_size=16, use_distribution=True)
        _, with_bins = records_to_batch(records[:2], cfg)
        assert with_bins["bin_indices"].shape == (2, 5)
        assert int(with_bins["bin_indices"].max()) <= 99


class TestTrainLoop:
    def test_log_structure(self, trained):
        _, log = trained
        assert [e["step"] for e in log] == [1, 2, 4]
        for entry in log:
            assert np.isfinite(entry["total"])
            assert "irradiance" in entry and "segmentation" in entry

    def test_model_left_in_eval_mode(self, trained):
        model, _ = trained
        assert not model.training

    def test_log_file(self, records, tmp_path):
        log_path = tmp_path / "log.json"
        train(records, CFG, steps=2, seed=0, log_path=log_path)
        doc = json.loads(log_path.read_text())
        assert [e["step"] for e in doc] == [1, 2]

    def test_empty_records_rejected(self):
        with pytest.raises(DomainError):
            train([], CFG, steps=1)

    def test_channel_mismatch_rejected(self, records):
        cfg = ModelConfig(image_size=16, input_channels=4)
        with pytest.raises(DomainError):
            train(records, cfg, steps=1)

    def test_seed_reproducibility(self, records):
        _, log_a = train(records, CFG, steps=3, seed=5)
        _, log_b = train(records, CFG, steps=3, seed=5)
        assert log_a == log_b


class TestCheckpoint:
    def test_roundtrip(self, trained, records, tmp_path):
        model, log = trained
        path = tmp_path / "ckpt.pt"
        save_checkpoint(path, model, log)
        loaded, loaded_log = load_checkpoint(path)
        assert loaded.cfg == model.cfg
        assert loaded_log == log
        want = predict_records(model, records[:2])
        got = predict_records(loaded, records[:2])
        np.testing.assert_array_equal(got[0][1], want[0][1])


class TestExport:
    def test_absolute_mode_schema(self, trained, records, tmp_path):
        model, _ = trained
        path = tmp_path / "fc.csv"
        n = export_predictions(model, records, path)
        assert n == len(records) * 5
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["issue_time_iso", "horizon_min",
                                 "y_true_wm2", "y_pred_wm2"]
        assert len(rows) == n
        assert [r["horizon_min"] for r in rows[:5]] == \
            ["2", "4", "6", "8", "10"]
        first = records[0]
        assert rows[0]["issue_time_iso"] == \
            first.issue_time.strftime("%Y-%m-%dT%H:%M:%S")
        assert float(rows[0]["y_true_wm2"]) == \
            pytest.approx(first.target_ghi[0])
        times = [r["issue_time_iso"] for r in rows]
        assert times == sorted(times)

    def test_change_mode_reconstruction(self, tmp_path):
        d = tmp_path / "w"
        build_dataset(d, 4, seed=2, size=16, target_mode="change")
        recs = load_dataset(d)
        cfg = ModelConfig(image_size=16, use_distribution=True)
        model, _ = train(recs, cfg, steps=2, seed=0)
        path = tmp_path / "fc.csv"
        export_predictions(model, recs, path)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert "aux_irradiance_wm2" in rows[0]
        assert "p000" in rows[0] and "p099" in rows[0]
        # prediction = anchor + raw model output on the shared scale
        x, _ = records_to_batch(recs[:1], cfg)
        with torch.no_grad():
            raw = model(x)["irradiance"][0, 0]
        want = recs[0].anchor_ghi + float(raw) * GHI_SCALE_WM2
        row = next(r for r in rows
                   if r["issue_time_iso"] ==
                   recs[0].issue_time.strftime("%Y-%m-%dT%H:%M:%S")
                   and r["horizon_min"] == "2")
        assert float(row["y_pred_wm2"]) == pytest.approx(want, abs=1e-4)
        assert float(row["aux_irradiance_wm2"]) == \
            pytest.approx(recs[0].anchor_ghi)
        probs = [float(row[f"p{i:03d}"]) for i in range(100)]
        assert sum(probs) == pytest.approx(1.0, abs=1e-6)

    def test_duplicate_keys_refused(self, trained, records, tmp_path):
        model, _ = trained
        path = tmp_path / "dup.csv"
        with pytest.raises(SchemaError):
            export_predictions(model, [records[0], records[0]], path)
        assert not path.exists()
