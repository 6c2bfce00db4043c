"""Greedy exact-match detection score at a fixed IoU threshold."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from reldetr.geom import pairwise_iou
from reldetr.matching.models import GroundTruth
from reldetr.numkit.ops import stable_sigmoid

IOU_THRESHOLD = 0.5


def toy_ap(
    predictions: Sequence[tuple[np.ndarray, np.ndarray]],
    targets: Sequence[GroundTruth],
    *,
    iou_threshold: float = IOU_THRESHOLD,
) -> float:
    """Average precision over scenes of ``(boxes, logits)`` predictions.

    Predictions are ranked by top sigmoid probability across all scenes. A
    prediction is a hit when its argmax class matches an unclaimed target of
    the same scene with IoU >= ``iou_threshold``. Precision is interpolated
    over every recall point.
    """
    if len(predictions) != len(targets):
        raise ValueError("predictions and targets must pair up scene by scene")
    total_targets = sum(gt.count for gt in targets)
    if total_targets == 0:
        return 0.0

    ranked: list[tuple[float, int, int]] = []
    for scene, (_, logits) in enumerate(predictions):
        scores = stable_sigmoid(np.asarray(logits, dtype=np.float64)).max(axis=1)
        ranked.extend((-float(score), scene, query) for query, score in enumerate(scores))
    ranked.sort()

    claimed = [np.zeros(gt.count, dtype=bool) for gt in targets]
    overlaps = [
        pairwise_iou(np.asarray(boxes, dtype=np.float64), gt.boxes)[0]
        if gt.count
        else np.zeros((len(boxes), 0))
        for (boxes, _), gt in zip(predictions, targets)
    ]
    hits = np.zeros(len(ranked), dtype=bool)
    for rank, (_, scene, query) in enumerate(ranked):
        gt = targets[scene]
        if gt.count == 0:
            continue
        label = int(np.argmax(predictions[scene][1][query]))
        candidates = overlaps[scene][query].copy()
        candidates[(gt.labels != label) | claimed[scene]] = -1.0
        best = int(np.argmax(candidates))
        if candidates[best] >= iou_threshold:
            claimed[scene][best] = True
            hits[rank] = True

    true_positives = np.cumsum(hits)
    precision = true_positives / np.arange(1, len(ranked) + 1)
    recall = true_positives / total_targets
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    previous_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - previous_recall) * envelope))
