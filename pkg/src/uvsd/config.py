"""Pipeline configuration: one frozen dataclass per stage, loaded from YAML/JSON."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .cnn import ArchConfig, TrainConfig
from .datasets import SynthConfig
from .embed import EmbeddingConfig, TsneConfig, WalkConfig
from .pixelizer import PixelizerConfig
from .raster import RasterConfig

# file key -> (section attribute, field name)
_ALIASES = {
    "fans_threshold": ("pixelizer", "fans_threshold"),
    "psi": ("pixelizer", "psi"),
    "walk.p": ("walk", "p"),
    "walk.q": ("walk", "q"),
    "walk.length": ("walk", "walk_length"),
    "walk.per_node": ("walk", "walks_per_node"),
    "sg.dim": ("sg", "dim"),
    "sg.window": ("sg", "window"),
    "sg.negatives": ("sg", "negatives"),
    "sg.epochs": ("sg", "epochs"),
    "sg.learning_rate": ("sg", "learning_rate"),
    "tsne.perplexity": ("tsne", "perplexity"),
    "tsne.iterations": ("tsne", "iterations"),
    "tsne.learning_rate": ("tsne", "learning_rate"),
    "raster.gamma": ("raster", "gamma"),
    "raster.canvas": ("raster", "canvas"),
    "raster.brightness_cap": ("raster", "brightness_cap"),
    "raster.min_visible": ("raster", "min_visible"),
}
_SECTIONS = ("pixelizer", "walk", "sg", "tsne", "raster", "train", "model", "synth")
_TOP = ("seed", "delta_n", "sbp", "video_length", "train_ratio", "val_ratio")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    delta_n: int = 6400
    sbp: float = 1.0
    video_length: int = 8
    train_ratio: float = 0.8
    # share of the training side held out for early stopping
    val_ratio: float = 0.2
    pixelizer: PixelizerConfig = field(default_factory=PixelizerConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)
    sg: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    tsne: TsneConfig = field(default_factory=TsneConfig)
    raster: RasterConfig = field(default_factory=RasterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ArchConfig = field(default_factory=ArchConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        if self.delta_n < 1:
            raise ValueError("delta_n must be >= 1")
        if not 0 < self.sbp <= 1:
            raise ValueError("sbp must lie in (0, 1]")
        if self.video_length < 1:
            raise ValueError("video_length must be >= 1")
        if not 0 < self.train_ratio < 1 or not 0 < self.val_ratio < 1:
            raise ValueError("train_ratio and val_ratio must lie in (0, 1)")

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed, train=replace(self.train, seed=seed), synth=replace(self.synth, seed=seed))

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in _TOP}
        for sec in _SECTIONS:
            d = dataclasses.asdict(getattr(self, sec))
            out[sec] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return out


def _flatten(mapping: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in mapping.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        else:
            flat[key] = v
    return flat


def _coerce(value, default):
    # PyYAML reads "1e-8" (no dot) as a string
    if isinstance(value, str) and isinstance(default, (int, float)) and not isinstance(default, bool):
        try:
            return type(default)(float(value)) if isinstance(default, float) else int(value)
        except ValueError:
            raise ValueError(f"expected a number, got {value!r}") from None
    return value


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a config from nested sections and/or dotted keys."""
    top, sections = {}, {s: {} for s in _SECTIONS}
    for key, value in _flatten(data or {}).items():
        if key in _ALIASES:
            sec, name = _ALIASES[key]
        elif key in _TOP:
            top[key] = value
            continue
        elif "." in key and key.split(".", 1)[0] in _SECTIONS:
            sec, name = key.split(".", 1)
        elif key.startswith("pixelizer."):
            sec, name = "pixelizer", key.split(".", 1)[1]
        else:
            raise ValueError(f"unknown config key {key!r}")
        sections[sec][name] = tuple(value) if isinstance(value, list) else value
    defaults = PipelineConfig()
    top = {k: _coerce(v, getattr(defaults, k)) for k, v in top.items()}
    base = PipelineConfig(**top)
    kwargs = {}
    for sec, values in sections.items():
        if values:
            current = getattr(base, sec)
            known = {f.name for f in dataclasses.fields(current)}
            unknown = set(values) - known
            if unknown:
                raise ValueError(f"unknown keys in [{sec}]: {sorted(unknown)}")
            kwargs[sec] = replace(current, **{k: _coerce(v, getattr(current, k)) for k, v in values.items()})
    cfg = replace(base, **kwargs)
    if "seed" in top:
        seed = top["seed"]
        cfg = replace(cfg,
                      train=replace(cfg.train, seed=sections["train"].get("seed", seed)),
                      synth=replace(cfg.synth, seed=sections["synth"].get("seed", seed)))
    return cfg


def load_config(path) -> PipelineConfig:
    text = Path(path).read_text(encoding="utf-8")
    return config_from_dict(yaml.safe_load(text) or {})
