"""Pairwise prediction-to-target matching cost."""

from __future__ import annotations

import numpy as np

from reldetr.errors import DimensionError
from reldetr.geom import pairwise_giou
from reldetr.matching.models import GroundTruth, LossWeights
from reldetr.numkit.ops import stable_sigmoid


def matching_cost(
    boxes: np.ndarray,
    logits: np.ndarray,
    gt: GroundTruth,
    weights: LossWeights,
) -> np.ndarray:
    """Return the ``(N, G)`` cost of pairing each prediction with each target.

    ``cost[i, j] = -w_cls * p_i[label_j] + w_l1 * |b_i - g_j|_1 + w_giou * (1 - giou(b_i, g_j))``
    with ``p`` the sigmoid class probabilities.
    """
    pred_boxes = np.asarray(boxes, dtype=np.float64)
    pred_logits = np.asarray(logits, dtype=np.float64)
    if pred_boxes.ndim != 2 or pred_boxes.shape[1] != 4:
        raise DimensionError(f"expected (N, 4) boxes, got {pred_boxes.shape}")
    if pred_logits.ndim != 2 or pred_logits.shape[0] != pred_boxes.shape[0]:
        raise DimensionError(
            f"logits {pred_logits.shape} do not match {pred_boxes.shape[0]} predictions"
        )
    gt.check_classes(pred_logits.shape[1])
    if gt.count == 0:
        return np.zeros((pred_boxes.shape[0], 0))
    probs = stable_sigmoid(pred_logits)
    cls_cost = -probs[:, gt.labels]
    l1_cost = np.abs(pred_boxes[:, None, :] - gt.boxes[None, :, :]).sum(axis=-1)
    giou_cost = 1.0 - pairwise_giou(pred_boxes, gt.boxes)
    return weights.cls * cls_cost + weights.l1 * l1_cost + weights.giou * giou_cost
