"""Bipartite matching, matching cost and set-prediction losses."""

from reldetr.matching.cost import matching_cost
from reldetr.matching.hungarian import brute_force_assignment, hungarian
from reldetr.matching.losses import one_to_many_loss, one_to_one_loss
from reldetr.matching.models import (
    Assignment,
    GroundTruth,
    LayerLoss,
    LossBreakdown,
    LossWeights,
)

__all__ = [
    "Assignment",
    "GroundTruth",
    "LayerLoss",
    "LossBreakdown",
    "LossWeights",
    "brute_force_assignment",
    "hungarian",
    "matching_cost",
    "one_to_many_loss",
    "one_to_one_loss",
]
