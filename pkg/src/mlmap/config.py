"""Run configuration: ``section.key = value`` text files.

Unknown keys are rejected; every section is validated by constructing the
corresponding module config, so a loaded RunConfig is always usable.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .gaussian import GaussianLayerConfig
from .kernel import KernelParams
from .labeling import TraversabilityLabelConfig
from .semantic import SemanticConfig
from .traversability import TraversabilityConfig


@dataclass(frozen=True)
class MapGeometry:
    resolution: float = 0.1
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        if not self.resolution > 0 or len(self.origin) != 3:
            raise ValueError("map resolution must be positive and origin a 3-vector")


@dataclass(frozen=True)
class MappingOptions:
    """Which pixels become training points and how maps are evaluated."""

    pixel_stride: int = 1
    max_range: float = 30.0
    eval_threshold: float = 0.5
    eval_use_map: bool = False
    friction_fusion: bool = False

    def __post_init__(self):
        if self.pixel_stride < 1 or not self.max_range > 0 or not 0 < self.eval_threshold < 1:
            raise ValueError("invalid mapping options")


@dataclass(frozen=True)
class RunConfig:
    kernel: KernelParams = field(default_factory=KernelParams)
    map: MapGeometry = field(default_factory=MapGeometry)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    traversability: TraversabilityConfig = field(default_factory=TraversabilityConfig)
    gaussian: GaussianLayerConfig = field(default_factory=GaussianLayerConfig)
    labeling: TraversabilityLabelConfig = field(default_factory=TraversabilityLabelConfig)
    mapping: MappingOptions = field(default_factory=MappingOptions)
    seed: int = 0

    def replace(self, **sections) -> "RunConfig":
        return dataclasses.replace(self, **sections)


_SECTIONS = ("kernel", "map", "semantic", "traversability", "gaussian", "labeling", "mapping")


def _parse_value(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, tuple):
        items = [t for t in text.replace(",", " ").split()]
        kind = type(default[0]) if default else int
        return tuple(kind(t) for t in items)
    return type(default)(text)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    updates: dict[str, dict] = {s: {} for s in _SECTIONS}
    seed = 0
    base = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "seed":
                seed = int(value)
                continue
            section, _, name = key.partition(".")
            if section not in updates:
                raise ValueError(f"unknown section {section!r}")
            current = getattr(base, section)
            if name not in {f.name for f in dataclasses.fields(current)}:
                raise ValueError(f"unknown key {key!r}")
            updates[section][name] = _parse_value(value, getattr(current, name))
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    try:
        sections = {s: dataclasses.replace(getattr(base, s), **updates[s]) for s in _SECTIONS}
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{source}: {exc}") from None
    cfg = RunConfig(seed=seed, **sections)
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg: RunConfig) -> None:
    if any(c >= cfg.semantic.num_classes or c < 0 for c in cfg.labeling.untraversable_classes):
        raise ValueError("labeling.untraversable_classes outside the semantic class range")


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(), str(path))


def format_config(cfg: RunConfig) -> str:
    lines = [f"seed = {cfg.seed}"]
    for s in _SECTIONS:
        sec = getattr(cfg, s)
        for f in dataclasses.fields(sec):
            v = getattr(sec, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            else:
                v = repr(v)
            lines.append(f"{s}.{f.name} = {v}")
    return "\n".join(lines) + "\n"
