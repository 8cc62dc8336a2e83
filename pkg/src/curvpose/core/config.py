"""
Configuration dataclasses for every pipeline stage.

All configs validate in `__post_init__` and can be built from plain dicts
(JSON spec files, CLI flags). Unknown keys are rejected.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar

from .errors import ConfigError

T = TypeVar("T")

# Gaussian scale factors used when generating ground-truth center heatmaps.
SIGMA_SCALE_PRESETS: Dict[str, float] = {"dimo": 0.5, "tless": 1.25}


def default_workers() -> int:
    """Worker count for batched cost evaluation (`CURVPOSE_WORKERS`, default CPU count)."""
    raw = os.getenv("CURVPOSE_WORKERS") or str(os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"CURVPOSE_WORKERS must be an integer, got {raw!r}")
    return max(1, value)


def dataclass_from_dict(cls: Type[T], data: Optional[Dict[str, Any]]) -> T:
    data = dict(data or {})
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}")
    return cls(**data)  # type: ignore[call-arg]


@dataclass
class HeatmapConfig:
    """Oracle heatmap synthesis and peak detection.

    Attributes
    ----------
    sigma_scale: s_e in sigma = s_e * mean_bbox_extent * 100 / distance.
    noise_sigma: standard deviation of the Gaussian corruption.
    peak_min_distance: half-width (px) of the square peak neighborhood.
    peak_threshold: minimum heatmap value of a reported peak.
    splat_truncation: blobs are evaluated within this many sigmas.
    visibility_threshold: when > 0, blobs are only splatted for objects whose
        visible fraction in the view is strictly greater than this value.
    """

    sigma_scale: float = SIGMA_SCALE_PRESETS["dimo"]
    noise_sigma: float = 0.0
    peak_min_distance: int = 5
    peak_threshold: float = 0.3
    splat_truncation: float = 4.0
    visibility_threshold: float = 0.0

    def __post_init__(self) -> None:
        if not self.sigma_scale > 0:
            raise ConfigError(f"sigma_scale must be > 0, got {self.sigma_scale}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if int(self.peak_min_distance) < 1:
            raise ConfigError(f"peak_min_distance must be >= 1, got {self.peak_min_distance}")
        self.peak_min_distance = int(self.peak_min_distance)
        if not 0.0 < self.peak_threshold < 1.0:
            raise ConfigError(f"peak_threshold must be in (0, 1), got {self.peak_threshold}")
        if not self.splat_truncation > 0:
            raise ConfigError(f"splat_truncation must be > 0, got {self.splat_truncation}")
        if not 0.0 <= self.visibility_threshold < 1.0:
            raise ConfigError(
                f"visibility_threshold must be in [0, 1), got {self.visibility_threshold}"
            )

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "HeatmapConfig":
        return dataclass_from_dict(cls, data)


@dataclass
class TriangulationConfig:
    """Heatmaps-to-centers thresholds, all in meters (30 mm defaults).

    A refined center is kept only when its reprojection score reaches
    `support_score` in at least `min_support_views` views (capped at the
    number of views) and its aggregate score is at least
    `min_score_fraction` of the best center of the same class.
    """

    d_t: float = 0.03
    d_c: float = 0.03
    d_o: float = 0.03
    expected_count: Optional[int] = None
    refine_max_iters: int = 200
    refine_xtol: float = 1e-5
    refine_ftol: float = 1e-7
    support_score: float = 0.3
    min_support_views: int = 3
    min_score_fraction: float = 0.5

    def __post_init__(self) -> None:
        for name in ("d_t", "d_c", "d_o"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.expected_count is not None and int(self.expected_count) < 0:
            raise ConfigError(f"expected_count must be >= 0, got {self.expected_count}")
        if int(self.refine_max_iters) < 0:
            raise ConfigError(f"refine_max_iters must be >= 0, got {self.refine_max_iters}")
        if not 0.0 <= self.support_score <= 1.0:
            raise ConfigError(f"support_score must be in [0, 1], got {self.support_score}")
        if int(self.min_support_views) < 1:
            raise ConfigError(f"min_support_views must be >= 1, got {self.min_support_views}")
        self.min_support_views = int(self.min_support_views)
        if not 0.0 <= self.min_score_fraction <= 1.0:
            raise ConfigError(
                f"min_score_fraction must be in [0, 1], got {self.min_score_fraction}"
            )

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "TriangulationConfig":
        return dataclass_from_dict(cls, data)


@dataclass
class CostConfig:
    """Render-and-compare cost settings.

    `view_weights=None` means uniform weights; `empty_render_penalty=None`
    means the image diagonal of the view in pixels. `backend` selects process
    or thread workers for batched evaluation.
    """

    t_b: float = 0.1
    view_weights: Optional[Tuple[float, ...]] = None
    empty_render_penalty: Optional[float] = None
    workers: int = field(default_factory=default_workers)
    backend: str = "process"

    def __post_init__(self) -> None:
        if not self.t_b > 0:
            raise ConfigError(f"t_b must be > 0, got {self.t_b}")
        if self.view_weights is not None:
            weights = tuple(float(w) for w in self.view_weights)
            if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
                raise ConfigError(f"view_weights must be >= 0 with one > 0, got {weights}")
            self.view_weights = weights
        if self.empty_render_penalty is not None and self.empty_render_penalty < 0:
            raise ConfigError(f"empty_render_penalty must be >= 0, got {self.empty_render_penalty}")
        if int(self.workers) < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        self.workers = int(self.workers)
        if self.backend not in ("thread", "process"):
            raise ConfigError(f"backend must be 'thread' or 'process', got {self.backend!r}")

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "CostConfig":
        return dataclass_from_dict(cls, data)


@dataclass
class OptimizerConfig:
    """Candidate sampling and simplex refinement.

    `translation_sigma` / `translation_bound` of None resolve to 0.25 and 0.5
    times the object diameter.
    """

    n_candidates: int = 2000
    n_refine: int = 4
    translation_sigma: Optional[float] = None
    translation_bound: Optional[float] = None
    simplex_max_iters: int = 200
    simplex_xtol: float = 1e-5
    simplex_ftol: float = 1e-6
    simplex_translation_step: float = 0.05
    simplex_rotation_step: float = 0.1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if int(self.n_refine) < 1 or int(self.n_candidates) < int(self.n_refine):
            raise ConfigError(
                f"Need n_candidates >= n_refine >= 1, got {self.n_candidates} / {self.n_refine}"
            )
        if self.translation_sigma is not None and self.translation_sigma < 0:
            raise ConfigError(f"translation_sigma must be >= 0, got {self.translation_sigma}")
        if self.translation_bound is not None and not self.translation_bound > 0:
            raise ConfigError(f"translation_bound must be > 0, got {self.translation_bound}")
        if int(self.simplex_max_iters) < 0:
            raise ConfigError(f"simplex_max_iters must be >= 0, got {self.simplex_max_iters}")
        if not (self.simplex_translation_step > 0 and self.simplex_rotation_step > 0):
            raise ConfigError("simplex steps must be > 0")
        self.n_candidates = int(self.n_candidates)
        self.n_refine = int(self.n_refine)

    def sigma_for(self, diameter: float) -> float:
        return 0.25 * diameter if self.translation_sigma is None else float(self.translation_sigma)

    def bound_for(self, diameter: float) -> float:
        return 0.5 * diameter if self.translation_bound is None else float(self.translation_bound)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "OptimizerConfig":
        return dataclass_from_dict(cls, data)


@dataclass
class PipelineConfig:
    """All stage configs in one document."""

    heatmaps: HeatmapConfig = field(default_factory=HeatmapConfig)
    triangulation: TriangulationConfig = field(default_factory=TriangulationConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "PipelineConfig":
        data = dict(data or {})
        unknown = sorted(set(data) - {"heatmaps", "triangulation", "cost", "optimizer"})
        if unknown:
            raise ConfigError(f"Unknown PipelineConfig sections: {', '.join(unknown)}")
        return cls(
            heatmaps=HeatmapConfig.from_dict(data.get("heatmaps")),
            triangulation=TriangulationConfig.from_dict(data.get("triangulation")),
            cost=CostConfig.from_dict(data.get("cost")),
            optimizer=OptimizerConfig.from_dict(data.get("optimizer")),
        )

    @classmethod
    def from_json(cls, path: Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid pipeline config {path}: {e}")
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
