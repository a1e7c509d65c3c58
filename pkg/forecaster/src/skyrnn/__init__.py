"""Recurrent forecaster over sky-image windows.

Past frames compress into a latent state that rolls forward step by
step; each future state decodes into a segmentation map, a scalar
irradiance, and optionally a categorical irradiance distribution.
Windows arrive via the on-disk exchange format; forecasts leave as
CSV tables for the external evaluator.
"""
from .config import GHI_SCALE_WM2, ModelConfig
from .errors import DomainError, ForecasterError, SchemaError, ShapeError
from .losses import bin_index, compute_loss, compute_loss_parts
from .network import SkyForecaster
from .train import (export_predictions, load_checkpoint, predict_records,
                    save_checkpoint, train)
from .windows import WindowRecord, load_dataset, load_window, save_window

__all__ = [
    "GHI_SCALE_WM2", "ModelConfig", "SkyForecaster", "WindowRecord",
    "ForecasterError", "ShapeError", "DomainError", "SchemaError",
    "bin_index", "compute_loss", "compute_loss_parts",
    "train", "export_predictions", "predict_records",
    "save_checkpoint", "load_checkpoint",
    "load_dataset", "load_window", "save_window",
]
