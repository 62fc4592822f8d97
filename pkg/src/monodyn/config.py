"""Pipeline configuration. Defaults are the published constants."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .dynamic.outliers import OutlierConfig
from .dynamic.points import PointRenderConfig
from .dynamic.splat import SplatConfig
from .errors import InvalidArgumentError
from .masks import MaskConfig
from .static.epipolar import AggregatorConfig
from .static.selection import SourceSelectionConfig
from .tracks import DEFAULT_N_TEMPORAL

DYN_RENDERERS = ("splat", "points", "mesh")
STATIC_BACKENDS = ("points", "epipolar")

_NESTED = {
    "outlier": OutlierConfig,
    "splat": SplatConfig,
    "points": PointRenderConfig,
    "selection": SourceSelectionConfig,
    "aggregator": AggregatorConfig,
    "mask": MaskConfig,
}


@dataclass(frozen=True)
class PipelineConfig:
    dyn_renderer: str = "splat"
    static_backend: str = "points"
    use_tracks: bool = False
    n_temporal: int = DEFAULT_N_TEMPORAL
    remove_outliers: bool = True
    cycle_abs_tol: float = 1.0
    cycle_rel_tol: float = 0.05
    static_stride: int = 1
    background: tuple = (0.0, 0.0, 0.0)
    emit_diagnostics: bool = False
    outlier: OutlierConfig = field(default_factory=OutlierConfig)
    splat: SplatConfig = field(default_factory=SplatConfig)
    points: PointRenderConfig = field(default_factory=PointRenderConfig)
    selection: SourceSelectionConfig = field(default_factory=SourceSelectionConfig)
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)

    def __post_init__(self):
        if self.dyn_renderer not in DYN_RENDERERS:
            raise InvalidArgumentError(f"unknown dynamic renderer {self.dyn_renderer!r}")
        if self.static_backend not in STATIC_BACKENDS:
            raise InvalidArgumentError(f"unknown static backend {self.static_backend!r}")
        if self.n_temporal < 1 or self.static_stride < 1:
            raise InvalidArgumentError("n_temporal and static_stride must be positive")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key in _NESTED:
                sub = _NESTED[key]
                sub_known = {f.name for f in fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise InvalidArgumentError(f"unknown keys in {key}: {sorted(bad)}")
                kwargs[key] = sub(**value)
            elif key == "background":
                kwargs[key] = tuple(float(v) for v in value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc}", path=path) from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def override(self, **changes):
        """Return a copy with top-level or ``section__key`` fields replaced."""
        top = {}
        nested = {}
        for key, value in changes.items():
            if value is None:
                continue
            if "__" in key:
                section, sub = key.split("__", 1)
                nested.setdefault(section, {})[sub] = value
            else:
                top[key] = value
        for section, sub in nested.items():
            top[section] = replace(getattr(self, section), **sub)
        return replace(self, **top)
