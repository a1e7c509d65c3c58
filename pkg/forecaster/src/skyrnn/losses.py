"""Training objective: irradiance MSE plus discounted segmentation CE.

The segmentation term weights early horizon steps more: step i (1-based)
carries gamma**i. With the categorical head enabled, a cross-entropy
against the target's bin index joins the total, averaged over horizons.
"""
import torch
import torch.nn.functional as F

from .errors import DomainError, ShapeError


def bin_index(values, bins=100, span=1300.0):
    """Cell index of an irradiance value on the equal-width grid [0, span]."""
    v = torch.as_tensor(values)
    idx = torch.floor(v * (bins / span)).long()
    return idx.clamp(0, bins - 1)


def _finite(name, t):
    if not torch.isfinite(t).all():
        raise DomainError(f"{name} contains non-finite values")


def compute_loss_parts(predictions, targets, cfg):
    """Component losses as 0-d tensors: irradiance, segmentation, distribution.

    `predictions` is the forward() dict; `targets` carries "irradiance"
    (B, H) in the same units as the predictions, "segmentation"
    (B, H, H8, W8) class indices, and "bin_indices" (B, H) when the
    categorical head is in play. Segmentation is skipped entirely at
    alpha = 0 so the total reduces to the irradiance term exactly.
    """
    y_hat = predictions["irradiance"]
    y = torch.as_tensor(targets["irradiance"], dtype=y_hat.dtype)
    if y_hat.shape != y.shape:
        raise ShapeError(f"irradiance shapes differ: {tuple(y_hat.shape)} "
                         f"vs {tuple(y.shape)}")
    _finite("predicted irradiance", y_hat)
    _finite("target irradiance", y)
    parts = {"irradiance": F.mse_loss(y_hat, y)}

    if cfg.alpha != 0.0:
        logits = predictions.get("segmentation_logits")
        seg = targets.get("segmentation")
        if logits is None or seg is None:
            raise DomainError("alpha = 1 needs segmentation predictions "
                              "and targets")
        seg = torch.as_tensor(seg, dtype=torch.long)
        if logits.shape[1] != y.shape[1] or seg.shape[1] != y.shape[1]:
            raise ShapeError("horizon counts disagree across heads")
        _finite("segmentation logits", logits)
        total = None
        for i in range(logits.shape[1]):
            ce = F.cross_entropy(logits[:, i], seg[:, i])
            term = (cfg.gamma ** (i + 1)) * ce
            total = term if total is None else total + term
        parts["segmentation"] = total

    dist = predictions.get("distribution_logits")
    if cfg.use_distribution and dist is not None:
        _finite("distribution logits", dist)
        idx = targets.get("bin_indices")
        if idx is None:
            raise DomainError("distribution head needs target bin indices; "
                              "build them with bin_index()")
        idx = torch.as_tensor(idx, dtype=torch.long)
        total = None
        for i in range(dist.shape[1]):
            ce = F.cross_entropy(dist[:, i], idx[:, i])
            total = ce if total is None else total + ce
        parts["distribution"] = total / dist.shape[1]
    return parts


def fold_loss(parts, cfg):
    """Combine component losses into the training total."""
    total = parts["irradiance"]
    if "segmentation" in parts:
        total = total + cfg.alpha * parts["segmentation"]
    if "distribution" in parts:
        total = total + parts["distribution"]
    return total


def compute_loss(predictions, targets, cfg):
    """Scalar training loss: irradiance + alpha * segmentation (+ bins)."""
    return fold_loss(compute_loss_parts(predictions, targets, cfg), cfg)
