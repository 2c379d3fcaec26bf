"""Pipeline configuration: flat key=value files, overridden by CLI flags."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .errors import FormatError, MpadError
from .features import CHANNELS


@dataclass(frozen=True)
class PipelineConfig:
    channel: str = "embedding_diff"
    dim: int = 512
    normalize_embeddings: bool = True
    svm_c: float = 1.0
    svm_gamma: float | str = "scale"
    crop_size: int = 224
    seed: int = 0
    count: int = 0
    warp_intensity: float = 1.0
    frontal_max_asymmetry: float = 0.35
    mouth_max_gap: float = 0.10
    sanity_box: float = 1.5


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("1", "true", "on", "yes"):
        return True
    if low in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_gamma(value: str):
    if value.strip() == "scale":
        return "scale"
    return float(value)


_PARSERS = {
    "channel": str,
    "dim": int,
    "normalize_embeddings": _parse_bool,
    "svm_c": float,
    "svm_gamma": parse_gamma,
    "crop_size": int,
    "seed": int,
    "count": int,
    "warp_intensity": float,
    "frontal_max_asymmetry": float,
    "mouth_max_gap": float,
    "sanity_box": float,
}


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    if cfg.channel not in CHANNELS:
        raise MpadError(f"unknown channel {cfg.channel!r}; choose from {', '.join(CHANNELS)}")
    if cfg.dim < 1:
        raise MpadError("dim must be at least 1")
    if cfg.svm_c <= 0:
        raise MpadError("svm_c must be positive")
    if isinstance(cfg.svm_gamma, float) and cfg.svm_gamma <= 0:
        raise MpadError("svm_gamma must be positive or 'scale'")
    if cfg.crop_size < 8 or cfg.crop_size % 4:
        raise MpadError("crop_size must be >= 8 and divisible by 4")
    if cfg.count < 0:
        raise MpadError("count must be non-negative")
    if not (0.0 <= cfg.warp_intensity <= 1.0):
        raise MpadError("warp_intensity must lie in [0, 1]")
    if cfg.frontal_max_asymmetry < 0 or cfg.mouth_max_gap < 0 or cfg.sanity_box <= 0:
        raise MpadError("quality-gate thresholds must be non-negative (sanity_box positive)")
    return cfg


def load_config(path) -> PipelineConfig:
    """Parse a key=value config file; unknown keys are rejected."""
    p = Path(path)
    if not p.is_file():
        raise FormatError(f"config file not found: {p}")
    values = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{p}: line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        parser = _PARSERS.get(key)
        if parser is None:
            raise FormatError(f"{p}: line {lineno}: unknown config key {key!r}")
        try:
            values[key] = parser(value.strip())
        except ValueError as exc:
            raise FormatError(f"{p}: line {lineno}: bad value for {key}: {exc}") from None
    return validate_config(PipelineConfig(**values))


def override(cfg: PipelineConfig, **updates) -> PipelineConfig:
    """Apply non-None CLI overrides on top of the config."""
    filtered = {k: v for k, v in updates.items() if v is not None}
    return validate_config(replace(cfg, **filtered))
