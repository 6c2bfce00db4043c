"""One-to-one and one-to-many set losses summed over decoder layers."""

from __future__ import annotations

import logging
from typing import Protocol, Sequence

import numpy as np

from reldetr.geom import pairwise_iou
from reldetr.matching.cost import matching_cost
from reldetr.matching.hungarian import hungarian
from reldetr.matching.models import Assignment, GroundTruth, LayerLoss, LossBreakdown, LossWeights
from reldetr.numkit import ops
from reldetr.numkit.freeze import detach
from reldetr.numkit.tensor import Tensor

LOGGER = logging.getLogger("reldetr.matching.losses")


class Prediction(Protocol):
    boxes: Tensor
    logits: Tensor


def _zero() -> Tensor:
    return Tensor(0.0)


def _column(boxes: Tensor, index: int) -> Tensor:
    return ops.reshape(ops.take(boxes, [index], axis=1), (boxes.shape[0],))


def giou_pairs(pred: Tensor, target: np.ndarray) -> Tensor:
    """Differentiable GIoU between row ``k`` of ``pred`` and row ``k`` of ``target``."""
    px, py, pw, ph = (_column(pred, k) for k in range(4))
    tx, ty, tw, th = (target[:, k] for k in range(4))
    p_x0, p_x1 = ops.sub(px, ops.mul(pw, 0.5)), ops.add(px, ops.mul(pw, 0.5))
    p_y0, p_y1 = ops.sub(py, ops.mul(ph, 0.5)), ops.add(py, ops.mul(ph, 0.5))
    t_x0, t_x1 = tx - tw / 2.0, tx + tw / 2.0
    t_y0, t_y1 = ty - th / 2.0, ty + th / 2.0

    inter_w = ops.relu(ops.sub(ops.minimum(p_x1, t_x1), ops.maximum(p_x0, t_x0)))
    inter_h = ops.relu(ops.sub(ops.minimum(p_y1, t_y1), ops.maximum(p_y0, t_y0)))
    inter = ops.mul(inter_w, inter_h)
    union = ops.sub(ops.add(ops.mul(pw, ph), tw * th), inter)
    iou = ops.div(inter, union)
    hull_w = ops.sub(ops.maximum(p_x1, t_x1), ops.minimum(p_x0, t_x0))
    hull_h = ops.sub(ops.maximum(p_y1, t_y1), ops.minimum(p_y0, t_y0))
    hull = ops.mul(hull_w, hull_h)
    return ops.sub(iou, ops.div(ops.sub(hull, union), hull))


def classification_targets(
    shape: tuple[int, int],
    assignment: Assignment,
    gt: GroundTruth,
    pred_boxes: np.ndarray,
    weights: LossWeights,
) -> np.ndarray:
    """Per-logit targets: matched class entries get IoU (quality) or 1, the rest 0."""
    targets = np.zeros(shape)
    if not len(assignment):
        return targets
    rows, cols = assignment.rows, assignment.cols
    if weights.classification == "focal":
        quality = np.ones(len(rows))
    else:
        overlaps, _ = pairwise_iou(pred_boxes[rows], gt.boxes[cols])
        quality = np.clip(np.diag(overlaps), 0.0, 1.0)
    targets[rows, gt.labels[cols]] = quality
    return targets


def classification_loss(logits: Tensor, targets: np.ndarray, weights: LossWeights) -> Tensor:
    """Summed focal-style binary cross-entropy over every logit.

    ``quality_focal``: entries with a positive target are weighted by that
    target, the rest by ``alpha * p^gamma``. ``focal``: standard sigmoid focal
    loss with 0/1 targets.
    """
    bce = ops.sub(ops.softplus(logits), ops.mul(logits, targets))
    prob = ops.sigmoid(logits)
    positive = targets > 0
    if weights.classification == "focal":
        p_t = ops.add(ops.mul(prob, targets), ops.mul(ops.sub(1.0, prob), 1.0 - targets))
        modulator = ops.power(ops.sub(1.0, p_t), weights.gamma)
        alpha_t = weights.alpha * targets + (1.0 - weights.alpha) * (1.0 - targets)
        weight = ops.mul(modulator, alpha_t)
    else:
        negative_weight = ops.mul(ops.power(prob, weights.gamma), weights.alpha * ~positive)
        weight = ops.add(negative_weight, np.where(positive, targets, 0.0))
    return ops.sum(ops.mul(weight, bce))


def layer_loss(pred: Prediction, gt: GroundTruth, weights: LossWeights) -> LayerLoss:
    """Match one layer's predictions to ``gt`` and score them."""
    boxes = detach(pred.boxes).data
    logits = detach(pred.logits).data
    assignment = hungarian(matching_cost(boxes, logits, gt, weights))
    norm = float(max(1, gt.count))

    targets = classification_targets(logits.shape, assignment, gt, boxes, weights)
    cls = ops.div(classification_loss(pred.logits, targets, weights), norm)
    if len(assignment):
        matched = ops.take(pred.boxes, assignment.rows, axis=0)
        target_boxes = gt.boxes[assignment.cols]
        l1 = ops.div(ops.sum(ops.abs(ops.sub(matched, target_boxes))), norm)
        giou = ops.div(ops.sum(ops.sub(1.0, giou_pairs(matched, target_boxes))), norm)
    else:
        l1, giou = _zero(), _zero()
    total = ops.add(
        ops.add(ops.mul(cls, weights.cls), ops.mul(l1, weights.l1)),
        ops.mul(giou, weights.giou),
    )
    return LayerLoss(
        classification=cls, box_l1=l1, box_giou=giou, total=total, assignment=assignment
    )


def _sum_layers(per_layer: Sequence[LayerLoss], num_targets: int) -> LossBreakdown:
    if not per_layer:
        raise ValueError("need at least one decoder layer of predictions")
    total = per_layer[0].total
    for layer in per_layer[1:]:
        total = ops.add(total, layer.total)
    return LossBreakdown(per_layer=tuple(per_layer), total=total, num_targets=num_targets)


def one_to_one_loss(
    predictions: Sequence[Prediction],
    gt: GroundTruth,
    weights: LossWeights | None = None,
) -> LossBreakdown:
    """Hungarian loss of every layer against ``gt``, summed over layers."""
    weights = weights or LossWeights()
    per_layer = [layer_loss(pred, gt, weights) for pred in predictions]
    return _sum_layers(per_layer, gt.count)


def one_to_many_loss(
    predictions: Sequence[Prediction],
    gt: GroundTruth,
    repeat: int,
    weights: LossWeights | None = None,
) -> LossBreakdown:
    """Hungarian loss against ``gt`` repeated ``repeat`` times.

    Up to ``repeat`` queries can be positive for each object.
    """
    tiled = gt.tile(repeat)
    if predictions and predictions[0].boxes.shape[0] < tiled.count:
        LOGGER.warning(
            "only %s hybrid queries for %s repeated targets; some repeats stay unmatched",
            predictions[0].boxes.shape[0],
            tiled.count,
        )
    return one_to_one_loss(predictions, tiled, weights)
