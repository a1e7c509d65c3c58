"""Encoder, latent rollout, and decoders.

Data flow for one window: past frames are squeezed spatially (by 8) to
per-frame features, the frame stack collapses to a single latent state,
that state is rolled forward one horizon step at a time by a recurrent
transition, and each future state decodes independently into a
segmentation map, a scalar irradiance, and optionally a categorical
irradiance distribution.
"""
import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig
from .errors import DomainError, ShapeError


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with a skip; stride/width changes ride the skip."""

    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1,
                               bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        if stride != 1 or in_ch != out_ch:
            self.skip = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch))
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return F.relu(y + self.skip(x))


class SpatialEncoder(nn.Module):
    """Per-frame feature extractor, squeezing the grid by 8.

    A wide-kernel stem (conv 7, batch norm, relu, max pool) halves the
    grid once; two residual stages at 64 and 128 filters halve it twice
    more through their strides.
    """

    def __init__(self, in_channels):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, 64, 7, padding=3, bias=False),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2))
        self.stage1 = ResidualBlock(64, 64, stride=2)
        self.stage2 = ResidualBlock(64, 128, stride=2)

    def forward(self, frames):
        return self.stage2(self.stage1(self.stem(frames)))


class TemporalEncoder(nn.Module):
    """Collapse a feature stack (t, 128, h, w) into one latent state.

    Local branch: a factorized 3-d convolution (temporal kernel then
    spatial kernel) whose last time step carries fine motion up to the
    present. Global branch: the stack pooled to a single context vector
    and broadcast over the grid. Both concatenate and mix down to the
    latent width.
    """

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.local_t = nn.Conv3d(in_ch, in_ch, (3, 1, 1), padding=(1, 0, 0),
                                 bias=False)
        self.local_s = nn.Conv3d(in_ch, in_ch, (1, 3, 3), padding=(0, 1, 1),
                                 bias=False)
        self.local_bn = nn.BatchNorm3d(in_ch)
        self.global_mix = nn.Conv2d(in_ch, in_ch, 1)
        self.mix = nn.Conv2d(2 * in_ch, out_ch, 1)

    def forward(self, x):
        # x: (B, t, C, h, w)
        stack = x.permute(0, 2, 1, 3, 4)                 # (B, C, t, h, w)
        local = F.relu(self.local_bn(self.local_s(self.local_t(stack))))
        local = local[:, :, -1]                          # state at t
        ctx = stack.mean(dim=(2, 3, 4), keepdim=False)   # (B, C)
        ctx = F.relu(self.global_mix(ctx[:, :, None, None]))
        ctx = ctx.expand(-1, -1, local.shape[-2], local.shape[-1])
        return self.mix(torch.cat([local, ctx], dim=1))


class ConvGRUCell(nn.Module):
    """Gated recurrent update where state and gates are feature maps."""

    def __init__(self, channels):
        super().__init__()
        self.gates = nn.Conv2d(2 * channels, 2 * channels, 3, padding=1)
        self.candidate = nn.Conv2d(2 * channels, channels, 3, padding=1)

    def forward(self, x, h):
        zr = torch.sigmoid(self.gates(torch.cat([x, h], dim=1)))
        z, r = zr.chunk(2, dim=1)
        c = torch.tanh(self.candidate(torch.cat([x, r * h], dim=1)))
        return (1.0 - z) * h + z * c


class TransitionBlock(nn.Module):
    """One of the four stages of the state transition.

    The recurrent cell reads the incoming state as both input and
    hidden state, which keeps the whole transition a pure function of
    its argument; four residual layers refine the update.
    """

    def __init__(self, channels):
        super().__init__()
        self.gru = ConvGRUCell(channels)
        self.refine = nn.Sequential(
            *[ResidualBlock(channels, channels) for _ in range(4)])

    def forward(self, z):
        return self.refine(self.gru(z, z))


class SegmentationDecoder(nn.Module):
    """Latent state to per-class logits at 8x the latent grid."""

    def __init__(self, in_ch, classes):
        super().__init__()
        up = dict(scale_factor=2, mode="bilinear", align_corners=False)
        self.body = nn.Sequential(
            ResidualBlock(in_ch, 256),
            nn.Upsample(**up),
            ResidualBlock(256, 128),
            nn.Upsample(**up),
            ResidualBlock(128, 64),
            nn.Upsample(**up))
        self.head = nn.Conv2d(64, classes, 1)

    def forward(self, z):
        return self.head(self.body(z))


class ScalarDecoder(nn.Module):
    """Latent state to a flat vector: two convs, pooled, two dense layers."""

    def __init__(self, in_ch, out_dim):
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(in_ch, 64, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(64, 64, 3, padding=1), nn.ReLU(inplace=True))
        self.fc = nn.Sequential(nn.Linear(64, 64), nn.ReLU(inplace=True),
                                nn.Linear(64, out_dim))

    def forward(self, z):
        y = self.conv(z).mean(dim=(2, 3))
        return self.fc(y)


def _batched(x, rank):
    """Add a batch axis when x comes in unbatched; report whether it did."""
    if x.ndim == rank:
        return x.unsqueeze(0), True
    if x.ndim == rank + 1:
        return x, False
    raise ShapeError(f"expected rank {rank} or {rank + 1}, got {x.ndim}")


class SkyForecaster(nn.Module):
    """The full pipeline; every stage is also callable on its own."""

    def __init__(self, cfg: ModelConfig = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        c = self.cfg.latent_channels
        self.spatial = SpatialEncoder(self.cfg.input_channels)
        self.temporal = TemporalEncoder(128, c)
        self.transition = nn.Sequential(
            *[TransitionBlock(c) for _ in range(4)])
        self.seg_decoder = SegmentationDecoder(c, self.cfg.classes)
        self.irra_decoder = ScalarDecoder(c, 1)
        if self.cfg.use_distribution:
            self.dist_decoder = ScalarDecoder(c, self.cfg.bins)
        else:
            self.dist_decoder = None

    # each stage accepts the unbatched shapes from the interface
    # contract or the same with a leading batch axis

    def spatial_encode(self, frames):
        frames, squeeze = _batched(frames, 4)
        b, t, c, h, w = frames.shape
        if c != self.cfg.input_channels:
            raise ShapeError(f"expected {self.cfg.input_channels} channels, "
                             f"got {c}")
        if h % 8 or w % 8 or h < 8 or w < 8:
            raise ShapeError(f"spatial size {h}x{w} not divisible by 8")
        feats = self.spatial(frames.reshape(b * t, c, h, w))
        feats = feats.reshape(b, t, *feats.shape[1:])
        return feats[0] if squeeze else feats

    def temporal_encode(self, features):
        features, squeeze = _batched(features, 4)
        if features.shape[1] < 2:
            raise ShapeError("temporal encoding needs at least 2 frames")
        if features.shape[2] != 128:
            raise ShapeError(f"expected 128 feature channels, got "
                             f"{features.shape[2]}")
        z = self.temporal(features)
        return z[0] if squeeze else z

    def predict_future(self, z, horizon=None):
        horizon = self.cfg.horizon if horizon is None else int(horizon)
        if horizon < 1:
            raise DomainError("horizon must be at least 1")
        z, squeeze = _batched(z, 3)
        self._check_latent(z)
        states, cur = [], z
        for _ in range(horizon):
            cur = self.transition(cur)
            states.append(cur)
        out = torch.stack(states, dim=1)        # (B, H, C, h, w)
        return out[0] if squeeze else out

    def _check_latent(self, z):
        if z.shape[1] != self.cfg.latent_channels:
            raise ShapeError(f"expected {self.cfg.latent_channels} latent "
                             f"channels, got {z.shape[1]}")

    def decode_segmentation(self, z):
        z, squeeze = _batched(z, 3)
        self._check_latent(z)
        out = self.seg_decoder(z)
        return out[0] if squeeze else out

    def decode_irradiance(self, z):
        z, squeeze = _batched(z, 3)
        self._check_latent(z)
        out = self.irra_decoder(z)[:, 0]
        return out[0] if squeeze else out

    def decode_distribution(self, z):
        if self.dist_decoder is None:
            raise DomainError("model was built without a distribution head")
        z, squeeze = _batched(z, 3)
        self._check_latent(z)
        probs = torch.softmax(self.dist_decoder(z), dim=1)
        return probs[0] if squeeze else probs

    def forward(self, windows, horizon=None):
        """Windows (B, t, C, H, W) to per-horizon predictions.

        Returns a dict: "irradiance" (B, H), "segmentation_logits"
        (B, H, classes, H8, W8) and, when the head exists,
        "distribution_logits" (B, H, bins).
        """
        horizon = self.cfg.horizon if horizon is None else int(horizon)
        feats = self.spatial_encode(windows)
        z = self.temporal_encode(feats)
        futures = self.predict_future(z, horizon)       # (B, H, C, h, w)
        b, h = futures.shape[:2]
        flat = futures.reshape(b * h, *futures.shape[2:])
        seg = self.seg_decoder(flat)
        out = {
            "irradiance": self.irra_decoder(flat)[:, 0].reshape(b, h),
            "segmentation_logits": seg.reshape(b, h, *seg.shape[1:]),
        }
        if self.dist_decoder is not None:
            out["distribution_logits"] = \
                self.dist_decoder(flat).reshape(b, h, -1)
        return out
