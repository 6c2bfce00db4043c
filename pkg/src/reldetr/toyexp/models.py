"""Scenes, training settings and experiment reports for toy runs."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Literal

from reldetr.matching.models import GroundTruth

Variant = Literal["baseline", "relation", "relation+contrast"]
VARIANTS: tuple[str, ...] = ("baseline", "relation", "relation+contrast")
CORRELATIONS: tuple[str, ...] = ("none", "linear")


@dataclass(frozen=True)
class Scene:
    """Ground truth of one synthetic image in the unit square."""

    objects: GroundTruth
    seed: int
    index: int


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings and the synthetic dataset drawn for a run."""

    lr: float = 1e-2
    momentum: float = 0.0
    num_scenes: int = 10
    eval_fraction: float = 0.2
    correlation: str = "linear"
    max_objects: int = 6
    divergence_threshold: float = 1e6

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.num_scenes < 2:
            raise ValueError("num_scenes must be >= 2")
        if not 0 < self.eval_fraction < 1:
            raise ValueError("eval_fraction must be in (0, 1)")
        if self.correlation not in CORRELATIONS:
            raise ValueError(f"correlation must be one of {', '.join(CORRELATIONS)}")
        if self.max_objects < 1:
            raise ValueError("max_objects must be >= 1")
        if self.divergence_threshold <= 0:
            raise ValueError("divergence_threshold must be > 0")

    def as_dict(self) -> dict[str, Any]:
        return {item.name: getattr(self, item.name) for item in fields(self)}


@dataclass(frozen=True)
class LossPoint:
    """Mean training losses of one step; ``total`` is the one-to-one loss."""

    step: int
    cls: float
    l1: float
    giou: float
    total: float
    hybrid_total: float | None = None

    def as_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "step": self.step,
            "cls": self.cls,
            "l1": self.l1,
            "giou": self.giou,
            "total": self.total,
        }
        if self.hybrid_total is not None:
            payload["hybrid_total"] = self.hybrid_total
        return payload


@dataclass
class ExperimentReport:
    """Outcome of one toy training run."""

    config: dict[str, Any]
    config_hash: str
    seed: int
    variant: str
    steps: int
    losses: list[LossPoint] = field(default_factory=list)
    toy_ap: float = 0.0
    toy_ap_initial: float = 0.0
    diverged: bool = False
    wall_ms: float | None = None

    @property
    def initial_total(self) -> float:
        return self.losses[0].total

    @property
    def final_total(self) -> float:
        return self.losses[-1].total
