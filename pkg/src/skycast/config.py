"""Global key=value run configuration.

A config file is plain text, one `key = value` per line, `#` comments
allowed. Every recognized key has a documented default; unknown keys are
rejected so typos fail loudly. CLI flags of the form `--set key=value`
override file values.
"""

from dataclasses import dataclass

from .errors import SchemaError


def _bool(text):
    norm = str(text).strip().lower()
    if norm in ("1", "true", "yes", "on"):
        return True
    if norm in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(part) for part in str(text).split(",") if part.strip())


@dataclass(frozen=True)
class ConfigKey:
    name: str
    default: object
    parse: object
    help: str


# Single source of truth for every configurable knob, grouped by module.
CONFIG_KEYS = [
    # site
    ConfigKey("site.latitude_deg", 48.713, float, "site latitude, degrees north"),
    ConfigKey("site.longitude_deg", 2.208, float, "site longitude, degrees east"),
    ConfigKey("site.altitude_m", 157.0, float, "site altitude above sea level, m"),
    # camera calibration (equidistant fisheye)
    ConfigKey("camera.center_x", 64.0, float, "dome center x, px"),
    ConfigKey("camera.center_y", 64.0, float, "dome center y, px"),
    ConfigKey("camera.radius_per_radian", 38.0, float, "px per radian of zenith angle"),
    ConfigKey("camera.max_zenith_deg", 70.0, float, "plane projection clip angle, deg"),
    ConfigKey("camera.azimuth_offset_deg", 0.0, float, "camera roll, deg"),
    # undistortion
    ConfigKey("undistort.out_size", 128, int, "undistorted output size (square), px"),
    ConfigKey("undistort.crop", "center", str,
              "crop applied before downscaling: center (centered square) or none"),
    # sun tracking
    ConfigKey("suntrack.saturation_level", 250, int, "blue-channel level marking saturation"),
    ConfigKey("suntrack.area_min", 10, int, "min saturated component area for a sun fix, px"),
    ConfigKey("suntrack.min_obs_per_minute", 5, int, "min observations to fit a minute"),
    ConfigKey("suntrack.min_days", 30, int, "min distinct days of coverage for a fit"),
    ConfigKey("suntrack.poly_degree", 4, int, "daily smoothing polynomial degree"),
    ConfigKey("suntrack.ridge", 1e-3, float, "daily smoothing ridge weight"),
    # segmentation
    ConfigKey("segmentation.circumsolar_diameter_frac", 0.12, float,
              "circumsolar disk diameter as a fraction of image width"),
    ConfigKey("segmentation.circumsolar_relaxation", 0.10, float,
              "relative threshold reduction inside the circumsolar disk"),
    ConfigKey("segmentation.unimodal_std_threshold", 0.03, float,
              "nBRB std below which the histogram is treated as unimodal"),
    ConfigKey("segmentation.fixed_threshold", 0.25, float,
              "cloud/sky nBRB threshold used in the unimodal branch"),
    ConfigKey("segmentation.sun_threshold_frac", 0.90, float,
              "sun class cut as a fraction of the windowed-blue maximum"),
    ConfigKey("segmentation.saturation_frac", 0.98, float,
              "saturation class cut as a fraction of the max theoretical value"),
    # clear-sky / smart persistence
    ConfigKey("baseline.low_clearsky_floor_wm2", 10.0, float,
              "clear-sky GHI below which smart persistence falls back to plain persistence"),
    # metrics protocol
    ConfigKey("metrics.window_count", 200, int, "number of sampled TDI windows"),
    ConfigKey("metrics.window_length", 100, int, "samples per TDI window"),
    ConfigKey("metrics.step_minutes", 2.0, float, "nominal sample step inside a window, min"),
    ConfigKey("metrics.quantile", 0.95, float, "quantile of absolute errors to report"),
    # satellite cloud index
    ConfigKey("satellite.n_days", 10, int, "look-back window for the per-pixel minimum, days"),
    ConfigKey("satellite.cadence_minutes", 5.0, float, "satellite frame cadence, min"),
    ConfigKey("satellite.min_denominator", 1.0, float,
              "intensity range below which the cloud index is forced to 0"),
    # dataset assembly
    ConfigKey("dataset.cadence_minutes", 2.0, float, "sky image cadence, min"),
    ConfigKey("dataset.min_elevation_deg", 10.0, float, "discard samples with lower solar elevation"),
    ConfigKey("dataset.train_years", (2017, 2018), _int_list, "comma-separated training years"),
    ConfigKey("dataset.eval_year", 2019, int, "year split into even-day val / odd-day test"),
    ConfigKey("dataset.exposure", "long", str, "exposure fed to models: long or short"),
    # window assembly
    ConfigKey("window.context_frames", 5, int, "context frames per sample"),
    ConfigKey("window.horizon_frames", 5, int, "forecast frames per sample"),
    ConfigKey("window.step_minutes", 2.0, float, "frame step inside a window, min"),
    ConfigKey("window.input_mode", "RGB", str, "RGB or RGBI"),
    ConfigKey("window.target_mode", "absolute", str, "absolute or change"),
    ConfigKey("window.geometry_mode", "distorted", str, "distorted or undistorted"),
    ConfigKey("window.ghi_scale_wm2", 1300.0, float,
              "irradiance normalization for the RGBI channel"),
    # misc
    ConfigKey("seed", 0, int, "seed for every stochastic step"),
]

_BY_NAME = {key.name: key for key in CONFIG_KEYS}


class RunConfig:
    """Typed view over the key=value store."""

    def __init__(self, values=None):
        self._values = {k.name: k.default for k in CONFIG_KEYS}
        for name, raw in (values or {}).items():
            self.set(name, raw)

    def set(self, name, raw):
        key = _BY_NAME.get(name)
        if key is None:
            raise SchemaError(f"unknown config key {name!r}")
        try:
            value = key.parse(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise SchemaError(f"bad value for {name}: {exc}") from exc
        self._values[name] = value

    def __getitem__(self, name):
        if name not in self._values:
            raise SchemaError(f"unknown config key {name!r}")
        return self._values[name]

    def as_dict(self):
        return dict(self._values)

    @classmethod
    def from_file(cls, path, overrides=None):
        cfg = cls()
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise SchemaError("expected key = value", line=lineno)
                name, raw = (part.strip() for part in stripped.split("=", 1))
                try:
                    cfg.set(name, raw)
                except SchemaError as exc:
                    raise SchemaError(str(exc), line=lineno) from exc
        for item in overrides or []:
            if "=" not in item:
                raise SchemaError(f"override must be key=value, got {item!r}")
            name, raw = (part.strip() for part in item.split("=", 1))
            cfg.set(name, raw)
        return cfg


def describe_keys():
    """One line per config key, for --help output."""
    lines = []
    for key in CONFIG_KEYS:
        default = key.default
        if isinstance(default, tuple):
            default = ",".join(str(v) for v in default)
        lines.append(f"  {key.name} = {default}  ({key.help})")
    return "\n".join(lines)
