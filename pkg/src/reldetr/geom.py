"""Bounding-box algebra: conversions, IoU/GIoU and pairwise relative geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from reldetr.errors import DimensionError, EmptyInputError

Corners = tuple[float, float, float, float]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in center-size form ``(x, y, w, h)``."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        values = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(value) for value in values):
            raise ValueError(f"Box fields must be finite: {values}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"Box width and height must be > 0: w={self.w}, h={self.h}")

    @classmethod
    def from_corner_size(cls, x_min: float, y_min: float, w: float, h: float) -> Box:
        """Build from the COCO ``[x_min, y_min, w, h]`` convention."""
        return cls(x_min + w / 2.0, y_min + h / 2.0, float(w), float(h))

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> Box:
        return cls((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)

    def corners(self) -> Corners:
        half_w = self.w / 2.0
        half_h = self.h / 2.0
        return (self.x - half_w, self.y - half_h, self.x + half_w, self.y + half_h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class RelationFeatures:
    """Pairwise relative geometry, ``values[i, j] = e(a_i, b_j)``."""

    values: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape)


def boxes_to_array(boxes: Iterable[Box]) -> np.ndarray:
    """Stack boxes into an ``(N, 4)`` float64 array."""
    rows = [box.as_tuple() for box in boxes]
    return np.array(rows, dtype=np.float64).reshape(len(rows), 4)


def boxes_from_array(array: np.ndarray) -> list[Box]:
    """Validate an ``(N, 4)`` array and convert it into boxes."""
    values = np.asarray(array, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != 4:
        raise DimensionError(f"expected an (N, 4) box array, got shape {values.shape}")
    return [Box(*(float(v) for v in row)) for row in values]


def validate_box_array(array: np.ndarray) -> np.ndarray:
    """Check an ``(N, 4)`` center-size array holds valid boxes and return it."""
    values = np.asarray(array, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != 4:
        raise DimensionError(f"expected an (N, 4) box array, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("Box fields must be finite")
    if np.any(values[:, 2:] <= 0):
        raise ValueError("Box width and height must be > 0")
    return values


def corners_array(boxes: np.ndarray) -> np.ndarray:
    """Convert ``(N, 4)`` center-size boxes into ``(N, 4)`` corner form."""
    half = boxes[:, 2:] / 2.0
    return np.concatenate([boxes[:, :2] - half, boxes[:, :2] + half], axis=1)


def _relation_kernel(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Relative geometry for every ``(a_i, b_j)`` pair of ``(N, 4)`` arrays."""
    ax, ay, aw, ah = (a[:, k][:, None] for k in range(4))
    bx, by, bw, bh = (b[:, k][None, :] for k in range(4))
    return np.stack(
        [
            np.log1p(np.abs(ax - bx) / aw),
            np.log1p(np.abs(ay - by) / ah),
            np.log(aw / bw),
            np.log(ah / bh),
        ],
        axis=-1,
    )


def relative_geometry(a: Box, b: Box) -> np.ndarray:
    """Return ``[log(|dx|/w_a + 1), log(|dy|/h_a + 1), log(w_a/w_b), log(h_a/h_b)]``.

    Channels 0-1 are normalized by ``a`` only, so they are not symmetric.
    """
    return _relation_kernel(boxes_to_array([a]), boxes_to_array([b]))[0, 0]


def relation_matrix(
    set_a: Sequence[Box] | np.ndarray, set_b: Sequence[Box] | np.ndarray
) -> RelationFeatures:
    """Return the ``|A| x |B| x 4`` relation features between two box sets."""
    a = _as_box_array(set_a)
    b = _as_box_array(set_b)
    if len(a) == 0 or len(b) == 0:
        raise EmptyInputError(
            f"relation_matrix needs non-empty box sets, got {len(a)} and {len(b)}"
        )
    return RelationFeatures(_relation_kernel(a, b))


def _as_box_array(boxes: Sequence[Box] | np.ndarray) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        if boxes.size == 0:
            return np.zeros((0, 4), dtype=np.float64)
        return validate_box_array(boxes)
    return boxes_to_array(boxes)


def pairwise_iou(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(iou, union)`` matrices for two ``(N, 4)`` center-size arrays."""
    ca, cb = corners_array(a), corners_array(b)
    # Areas from the corner form so identical boxes give IoU exactly 1.
    area_a = (ca[:, 2] - ca[:, 0]) * (ca[:, 3] - ca[:, 1])
    area_b = (cb[:, 2] - cb[:, 0]) * (cb[:, 3] - cb[:, 1])
    top_left = np.maximum(ca[:, None, :2], cb[None, :, :2])
    bottom_right = np.minimum(ca[:, None, 2:], cb[None, :, 2:])
    wh = np.clip(bottom_right - top_left, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union, union


def pairwise_giou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Generalized IoU for every pair of two ``(N, 4)`` center-size arrays."""
    iou, union = pairwise_iou(a, b)
    ca, cb = corners_array(a), corners_array(b)
    top_left = np.minimum(ca[:, None, :2], cb[None, :, :2])
    bottom_right = np.maximum(ca[:, None, 2:], cb[None, :, 2:])
    wh = bottom_right - top_left
    enclosure = wh[..., 0] * wh[..., 1]
    return iou - (enclosure - union) / enclosure


def iou(a: Box, b: Box) -> float:
    return float(pairwise_iou(boxes_to_array([a]), boxes_to_array([b]))[0][0, 0])


def giou(a: Box, b: Box) -> float:
    """Generalized IoU of two boxes, in ``(-1, 1]``; ``giou(a, a) == 1``."""
    return float(pairwise_giou(boxes_to_array([a]), boxes_to_array([b]))[0, 0])
