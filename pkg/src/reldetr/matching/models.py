"""Ground truth, assignments and loss records for set-prediction matching."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from reldetr.errors import DimensionError
from reldetr.geom import Box, boxes_to_array, validate_box_array
from reldetr.numkit.tensor import Tensor

CLASSIFICATION_LOSSES = ("quality_focal", "focal")


@dataclass(frozen=True)
class GroundTruth:
    """``(G, 4)`` center-size boxes with integer class labels."""

    boxes: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(boxes) != len(labels):
            raise DimensionError(f"{len(boxes)} boxes but {len(labels)} labels")
        if len(boxes):
            validate_box_array(boxes)
        if np.any(labels < 0):
            raise ValueError("labels must be >= 0")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_boxes(cls, boxes: Sequence[Box], labels: Sequence[int]) -> GroundTruth:
        return cls(boxes_to_array(boxes), np.asarray(labels, dtype=np.int64))

    @classmethod
    def empty(cls) -> GroundTruth:
        return cls(np.zeros((0, 4)), np.zeros(0, dtype=np.int64))

    @property
    def count(self) -> int:
        return len(self.labels)

    def check_classes(self, num_classes: int) -> None:
        if np.any(self.labels >= num_classes):
            raise ValueError(f"labels must lie in [0, {num_classes})")

    def tile(self, repeat: int) -> GroundTruth:
        """Return the targets repeated ``repeat`` times, copy by copy."""
        if repeat < 1:
            raise ValueError("repeat must be >= 1")
        return GroundTruth(np.tile(self.boxes, (repeat, 1)), np.tile(self.labels, repeat))

    def permuted(self, order: Sequence[int]) -> GroundTruth:
        index = np.asarray(order, dtype=np.int64)
        return GroundTruth(self.boxes[index], self.labels[index])


@dataclass(frozen=True)
class Assignment:
    """Injective ``(query, target)`` pairs sorted by query index."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float

    @property
    def rows(self) -> np.ndarray:
        return np.array([pair[0] for pair in self.pairs], dtype=np.int64)

    @property
    def cols(self) -> np.ndarray:
        return np.array([pair[1] for pair in self.pairs], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class LossWeights:
    """Cost and loss weights for classification, L1 and ``1 - GIoU`` terms."""

    cls: float = 2.0
    l1: float = 5.0
    giou: float = 2.0
    gamma: float = 2.0
    alpha: float = 0.25
    classification: str = "quality_focal"

    def __post_init__(self) -> None:
        if min(self.cls, self.l1, self.giou) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.gamma < 0 or not 0 <= self.alpha <= 1:
            raise ValueError("gamma must be >= 0 and alpha in [0, 1]")
        if self.classification not in CLASSIFICATION_LOSSES:
            raise ValueError(
                f"classification must be one of {', '.join(CLASSIFICATION_LOSSES)}"
            )

    def as_dict(self) -> dict[str, float | str]:
        return {
            "cls": self.cls,
            "l1": self.l1,
            "giou": self.giou,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "classification": self.classification,
        }


@dataclass(frozen=True)
class LayerLoss:
    """Unweighted loss components of one decoder layer and its weighted total."""

    classification: Tensor
    box_l1: Tensor
    box_giou: Tensor
    total: Tensor
    assignment: Assignment


@dataclass(frozen=True)
class LossBreakdown:
    """Layer losses summed without weighting across layers."""

    per_layer: tuple[LayerLoss, ...]
    total: Tensor
    num_targets: int = 0

    @property
    def classification(self) -> float:
        return sum(layer.classification.item() for layer in self.per_layer)

    @property
    def box_l1(self) -> float:
        return sum(layer.box_l1.item() for layer in self.per_layer)

    @property
    def box_giou(self) -> float:
        return sum(layer.box_giou.item() for layer in self.per_layer)

    def as_dict(self) -> dict[str, float]:
        return {
            "cls": self.classification,
            "l1": self.box_l1,
            "giou": self.box_giou,
            "total": self.total.item(),
        }
