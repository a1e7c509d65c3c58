"""Training loop, checkpoints, and forecast export.

Irradiance runs through the model in units of the shared 1300 W/m2
scale (the same normalization the window format uses for its
irradiance plane), so the distribution bins line up with [0, 1300]
W/m2 exactly. Export converts back to watts.
"""
import json
import os

import numpy as np
import torch

from .config import GHI_SCALE_WM2, ModelConfig
from .errors import DomainError, SchemaError
from .losses import bin_index, compute_loss_parts, fold_loss
from .network import SkyForecaster


def records_to_batch(records, cfg):
    """Stack window records into model inputs and training targets."""
    inputs = np.stack([r.inputs for r in records])
    x = torch.from_numpy(inputs).permute(0, 1, 4, 2, 3).contiguous()
    stored = np.stack([r.target_ghi for r in records])
    absolute = np.stack([r.absolute_ghi() for r in records])
    targets = {
        "irradiance": torch.from_numpy(stored / GHI_SCALE_WM2).float(),
        "segmentation": torch.from_numpy(
            np.stack([r.segmentation for r in records]).astype(np.int64)),
    }
    if cfg.use_distribution:
        targets["bin_indices"] = bin_index(
            torch.from_numpy(absolute), cfg.bins, span=cfg.bin_span_wm2)
    return x, targets


def train(records, cfg=None, steps=2000, seed=0, log_every=50,
          log_path=None, checkpoint_path=None):
    """Adam over shuffled batches; returns (model, training log).

    The log holds one entry per logged step with the loss components;
    it is also what lands in the JSON file when log_path is given.
    """
    cfg = cfg or ModelConfig()
    if not records:
        raise DomainError("no training records")
    if records[0].inputs.shape[-1] != cfg.input_channels:
        raise DomainError(
            f"windows carry {records[0].inputs.shape[-1]} channels, "
            f"config wants {cfg.input_channels}")
    torch.manual_seed(seed)
    model = SkyForecaster(cfg)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(seed)

    order, pos = rng.permutation(len(records)), 0
    log = []
    for step in range(1, steps + 1):
        chosen = []
        while len(chosen) < cfg.batch:
            if pos == len(order):
                order, pos = rng.permutation(len(records)), 0
            chosen.append(records[int(order[pos])])
            pos += 1
        x, targets = records_to_batch(chosen, cfg)
        parts = compute_loss_parts(model(x), targets, cfg)
        total = fold_loss(parts, cfg)
        opt.zero_grad()
        total.backward()
        opt.step()
        if step == 1 or step == steps or step % log_every == 0:
            entry = {"step": step, "total": float(total.detach())}
            for name in ("irradiance", "segmentation", "distribution"):
                if name in parts:
                    entry[name] = float(parts[name].detach())
            log.append(entry)

    model.eval()
    if log_path:
        with open(log_path, "w") as fh:
            json.dump(log, fh, indent=1)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, model, log)
    return model, log


def save_checkpoint(path, model, log=None):
    torch.save({
        "config": model.cfg.to_dict(),
        "state_dict": model.state_dict(),
        "log": log or [],
    }, path)


def load_checkpoint(path):
    doc = torch.load(path, map_location="cpu", weights_only=True)
    model = SkyForecaster(ModelConfig.from_dict(doc["config"]))
    model.load_state_dict(doc["state_dict"])
    model.eval()
    return model, doc.get("log", [])


def _format_time(ts):
    return ts.strftime("%Y-%m-%dT%H:%M:%S")


def predict_records(model, records):
    """Per-record horizon predictions in W/m2 (and probabilities if any)."""
    cfg = model.cfg
    model.eval()
    out = []
    with torch.no_grad():
        for lo in range(0, len(records), cfg.batch):
            chunk = records[lo:lo + cfg.batch]
            x, _ = records_to_batch(chunk, cfg)
            preds = model(x)
            y_scaled = preds["irradiance"].numpy()
            probs = None
            if "distribution_logits" in preds:
                probs = torch.softmax(preds["distribution_logits"],
                                      dim=2).numpy()
            for b, rec in enumerate(chunk):
                y = y_scaled[b] * GHI_SCALE_WM2
                if rec.target_mode == "change":
                    y = rec.anchor_ghi + y
                out.append((rec, y, None if probs is None else probs[b]))
    return out


def export_predictions(model, records, path, step_minutes=2.0):
    """Write the forecast table CSV consumed by the evaluation tools.

    Columns: issue_time_iso, horizon_min, y_true_wm2, y_pred_wm2, then
    aux_irradiance_wm2 (the anchor) for change-mode windows, then p000..
    when the model carries the categorical head. Refuses to write
    anything that would break the schema.
    """
    predictions = predict_records(model, records)
    with_aux = any(r.target_mode == "change" for r, _, _ in predictions)
    with_probs = model.cfg.use_distribution

    header = ["issue_time_iso", "horizon_min", "y_true_wm2", "y_pred_wm2"]
    if with_aux:
        header.append("aux_irradiance_wm2")
    if with_probs:
        header.extend(f"p{i:03d}" for i in range(model.cfg.bins))

    rows, seen = [], set()
    for rec, y_pred, probs in sorted(predictions,
                                     key=lambda p: p[0].issue_time):
        truth = rec.absolute_ghi()
        for i in range(len(truth)):
            h = (i + 1) * step_minutes
            key = (rec.issue_time, h)
            if key in seen:
                raise SchemaError(f"duplicate forecast key {key}")
            seen.add(key)
            if not (np.isfinite(y_pred[i]) and np.isfinite(truth[i])):
                raise SchemaError("refusing to write non-finite forecast "
                                  f"for {key}")
            row = [_format_time(rec.issue_time), f"{h:g}",
                   f"{truth[i]:.6f}", f"{y_pred[i]:.6f}"]
            if with_aux:
                row.append(f"{rec.anchor_ghi:.6f}")
            if with_probs:
                p = probs[i].astype(np.float64)
                if abs(p.sum() - 1.0) > 1e-6 or (p < 0).any():
                    raise SchemaError("distribution row is not a "
                                      f"probability vector for {key}")
                # single-precision softmax drifts a few 1e-7 from 1;
                # renormalize so the written row meets the 1e-6 contract
                p /= p.sum()
                row.extend(f"{v:.9g}" for v in p)
            rows.append(",".join(row))

    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(",".join(header) + "\n")
        fh.write("\n".join(rows) + "\n")
    os.replace(tmp, path)
    return len(rows)
