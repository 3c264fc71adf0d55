"""Pipeline configuration: an INI-style ``key = value`` file, one section
per stage. Every value is validated when the file is loaded."""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

from .classifier.models import TrainConfig
from .detector import ScanParams
from .helmet import DEFAULT_RANGES, HueRange
from .motion import ViBeParams


class ConfigError(ValueError):
    """A config value failed validation; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class MotionParams:
    min_area: int = 150
    morph_radius: int = 1

    def __post_init__(self):
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")
        if self.morph_radius < 0:
            raise ValueError("morph_radius must be >= 0")


@dataclass(frozen=True)
class CascadeParams:
    theta1: float = 0.0
    theta2: float = 0.0
    nms_iou: float = 0.45

    def __post_init__(self):
        if not 0 < self.nms_iou < 1:
            raise ValueError("nms_iou must be in (0, 1)")


@dataclass(frozen=True)
class HelmetParams:
    ranges: Tuple[HueRange, ...] = DEFAULT_RANGES
    min_ratio: float = 0.3
    v_floor: float = 0.15
    head_fraction: float = 0.2
    achromatic_white: bool = False

    def __post_init__(self):
        if not 0 <= self.min_ratio <= 1:
            raise ValueError("min_ratio must be in [0, 1]")
        if not 0 <= self.v_floor <= 1:
            raise ValueError("v_floor must be in [0, 1]")
        if not 0 < self.head_fraction <= 1:
            raise ValueError("head_fraction must be in (0, 1]")
        if not self.ranges:
            raise ValueError("ranges must not be empty")
        labels = [r.label for r in self.ranges]
        if len(set(labels)) != len(labels):
            raise ValueError("ranges labels must be unique")


@dataclass(frozen=True)
class EvalParams:
    iou: float = 0.5

    def __post_init__(self):
        if not 0 < self.iou <= 1:
            raise ValueError("iou must be in (0, 1]")


@dataclass
class PipelineConfig:
    vibe: ViBeParams = field(default_factory=ViBeParams)
    motion: MotionParams = field(default_factory=MotionParams)
    scan: ScanParams = field(default_factory=ScanParams)
    cascade: CascadeParams = field(default_factory=CascadeParams)
    helmet: HelmetParams = field(default_factory=HelmetParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalParams = field(default_factory=EvalParams)


_SECTIONS = {
    "vibe": ViBeParams,
    "motion": MotionParams,
    "scan": ScanParams,
    "cascade": CascadeParams,
    "helmet": HelmetParams,
    "train": TrainConfig,
    "eval": EvalParams,
}


def format_ranges(ranges) -> str:
    return ", ".join(f"{r.label}:{r.lo:g}:{r.hi:g}" for r in ranges)


def parse_ranges(text: str) -> Tuple[HueRange, ...]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"hue range {item!r} is not label:lo:hi")
        out.append(HueRange(parts[0].strip(), float(parts[1]), float(parts[2])))
    return tuple(out)


def _convert(section: str, name: str, ftype, raw: str):
    kind = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    try:
        if name == "ranges":
            return parse_ranges(raw)
        if "bool" in kind:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if "Optional[float]" in kind:
            return None if raw.strip().lower() in ("", "none") else float(raw)
        if "int" in kind and "float" not in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{section}.{name}", str(exc)) from None


def load_config(path: str | Path | None = None, text: str | None = None) -> PipelineConfig:
    """Read a config file (missing keys take their defaults)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        elif text is not None:
            parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc).splitlines()[0]) from None
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
    for section, cls in _SECTIONS.items():
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in fields:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                kwargs[key] = _convert(section, key, fields[key].type, raw)
        try:
            values[section] = cls(**kwargs)
        except ValueError as exc:
            msg = str(exc)
            bad = next((k for k in fields if k in msg), "?")
            raise ConfigError(f"{section}.{bad}", msg) from None
    return PipelineConfig(**values)


def dump_config(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser()
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        parser.add_section(section)
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if f.name == "ranges":
                value = format_ranges(value)
            parser.set(section, f.name, "none" if value is None else str(value))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")
