"""Pipeline configuration and its flat ``key = value`` text form.

One key per line, ``#`` starts a comment, blank lines are ignored. Stage
settings use dotted keys (``csn.learning_rate``, ``rsn.depth``); everything
else is a top-level key. Optional values accept ``none``. Defaults are the
reference hyper-parameters (CSN 256x64 depth 4 lr 0.005, RSN crop 256x64
depth 5 lr 0.001, Adam, batch 64).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .postprocess import DEFAULT_PROB_FLOOR, DEFAULT_TD
from .preprocess import PickMode, StaLtaConfig
from .rrve import RansacConfig, VelocityBounds
from .segnet import TrainConfig, UNetConfig


@dataclass(frozen=True)
class StageConfig:
    height: int
    width: int
    depth: int
    base_channels: int = 16
    optimizer: str = "adam"
    learning_rate: float = 0.005
    batch_size: int = 64


def _csn_default():
    return StageConfig(256, 64, 4, learning_rate=0.005)


def _rsn_default():
    return StageConfig(256, 64, 5, learning_rate=0.001)


@dataclass(frozen=True)
class PipelineConfig:
    csn: StageConfig = field(default_factory=_csn_default)
    rsn: StageConfig = field(default_factory=_rsn_default)
    max_iterations: int = 20000
    validate_every: int = 15
    early_stop_patience: int = 8
    csn_loss: str = "bce"
    rsn_loss: str = "mixed"
    lam: float = 0.2
    val_fraction: float = 0.1
    split_threshold: float = 0.1
    v_min: float = 1000.0
    v_max: float = 8000.0
    ransac_n: int = 8
    ransac_k: int = 100
    ransac_d: int | None = None
    threshold_mode: str = "abs"
    lmo_interval: int = 128
    patch_stride: int | None = None
    td: int = DEFAULT_TD
    prob_floor: float | None = DEFAULT_PROB_FLOOR
    sta_n_s: int = 5
    sta_n_l: int = 20
    pick_mode: str = "peak"
    snap_radius: int = 10
    output_snap_radius: int = 0
    rsn_ref_jitter: int = 4
    seed: int = 0
    use_stalta_channel: bool = True
    use_lmo: bool = True
    use_postprocess: bool = True
    pick_correction: bool = True

    def __post_init__(self):
        if self.lmo_interval < 1:
            raise ConfigError("lmo_interval must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if not 0 <= self.split_threshold < 1:
            raise ConfigError("split_threshold must lie in [0, 1)")
        if self.rsn.height != self.window_height:
            raise ConfigError(f"rsn.height {self.rsn.height} must equal 2 * lmo_interval = {self.window_height}")
        if self.rsn_ref_jitter < 0:
            raise ConfigError("rsn_ref_jitter must be >= 0")
        if self.output_snap_radius < 0:
            raise ConfigError("output_snap_radius must be >= 0")
        # validate the derived objects eagerly so bad files fail at load time
        self.csn_unet(), self.rsn_unet(), self.bounds(), self.ransac(), self.stalta(), self.picking()
        self.train_config("csn"), self.train_config("rsn")

    @property
    def window_height(self) -> int:
        return 2 * self.lmo_interval

    def csn_unet(self) -> UNetConfig:
        c = self.csn
        return UNetConfig(c.depth, 1, c.base_channels, (c.height, c.width))

    def rsn_unet(self) -> UNetConfig:
        c = self.rsn
        return UNetConfig(c.depth, 2 if self.use_stalta_channel else 1, c.base_channels, (c.height, c.width))

    def train_config(self, stage: str) -> TrainConfig:
        if stage not in ("csn", "rsn"):
            raise ConfigError(f"stage must be csn or rsn, got {stage!r}")
        c = self.csn if stage == "csn" else self.rsn
        return TrainConfig(
            optimizer=c.optimizer, learning_rate=c.learning_rate, batch_size=c.batch_size,
            max_iterations=self.max_iterations, validate_every=self.validate_every,
            early_stop_patience=self.early_stop_patience,
            loss=self.csn_loss if stage == "csn" else self.rsn_loss, lam=self.lam, rng_seed=self.seed,
        )

    def bounds(self) -> VelocityBounds:
        return VelocityBounds(self.v_min, self.v_max)

    def ransac(self) -> RansacConfig:
        return RansacConfig(self.ransac_n, self.ransac_d, self.ransac_k, self.threshold_mode, self.seed)

    def stalta(self) -> StaLtaConfig:
        return StaLtaConfig(self.sta_n_s, self.sta_n_l)

    def picking(self) -> PickMode:
        return PickMode(self.pick_mode, self.snap_radius)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _coerce(key: str, raw: str, default):
    text = raw.strip()
    optional = key in _OPTIONAL
    if optional and text.lower() == "none":
        return None
    kind = _OPTIONAL.get(key) or type(default)
    try:
        if kind is bool:
            low = text.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError(text)
            return low in _TRUE
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


_OPTIONAL = {"ransac_d": int, "patch_stride": int, "prob_floor": float}


def _flat_defaults(cfg: PipelineConfig) -> dict:
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for sf in fields(value):
                out[f"{f.name}.{sf.name}"] = getattr(value, sf.name)
        else:
            out[f.name] = value
    return out


def with_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Apply ``{key: value}`` overrides; string values are parsed like file entries."""
    known = _flat_defaults(cfg)
    top, nested = {}, {}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(value, str):
            value = _coerce(key, value, known[key])
        if "." in key:
            stage, name = key.split(".", 1)
            nested.setdefault(stage, {})[name] = value
        else:
            top[key] = value
    for stage, values in nested.items():
        top[stage] = replace(getattr(cfg, stage), **values)
    try:
        return replace(cfg, **top)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return with_overrides(base or PipelineConfig(), entries)


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for key, value in _flat_defaults(cfg).items():
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
