from dataclasses import dataclass, asdict

from .errors import DomainError, ShapeError

# all irradiance values inside the model live in units of this scale,
# matching the irradiance plane of the window exchange format
GHI_SCALE_WM2 = 1300.0


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training knobs.

    input_channels: 3 for RGB windows, 4 when the irradiance plane is
    stacked in. The distribution head discretizes [0, bin_span_wm2]
    into `bins` equal cells.
    """

    input_channels: int = 3
    classes: int = 5
    horizon: int = 5
    latent_channels: int = 110
    spatial_downsample: int = 8
    image_size: int = 32
    bins: int = 100
    bin_span_wm2: float = GHI_SCALE_WM2
    alpha: float = 1.0          # weight of the segmentation loss
    gamma: float = 0.9          # per-step discount inside it
    use_distribution: bool = False
    lr: float = 2.5e-4
    batch: int = 10

    def __post_init__(self):
        if self.input_channels not in (3, 4):
            raise DomainError("input_channels must be 3 or 4")
        if self.image_size % self.spatial_downsample:
            raise ShapeError(f"image size {self.image_size} not divisible "
                             f"by {self.spatial_downsample}")
        if self.bins < 2:
            raise DomainError("need at least 2 distribution bins")
        if self.alpha not in (0.0, 1.0):
            raise DomainError("alpha is a switch: 0 or 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError("gamma must lie in [0, 1]")
        if self.horizon < 1:
            raise DomainError("horizon must be at least 1")
        if self.classes < 2:
            raise DomainError("need at least 2 segmentation classes")

    @property
    def latent_size(self):
        return self.image_size // self.spatial_downsample

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)
