"""Seeded synthetic scenes with independent or fully correlated box layouts."""

from __future__ import annotations

import numpy as np

from reldetr.matching.models import GroundTruth
from reldetr.rng import SeedTree
from reldetr.toyexp.models import CORRELATIONS, Scene


def _independent_boxes(rng: np.random.Generator, count: int) -> np.ndarray:
    sizes = rng.uniform(0.1, 0.4, size=(count, 2))
    centers = rng.uniform(sizes / 2.0, 1.0 - sizes / 2.0)
    return np.concatenate([centers, sizes], axis=1)


def _linear_boxes(rng: np.random.Generator, count: int) -> np.ndarray:
    """Boxes ``alpha_j * base + c_j`` (every component shifted by ``c_j``).

    Every pair is perfectly positively correlated, and all boxes stay inside
    the unit square for the sampled ranges.
    """
    base = np.concatenate([rng.uniform(0.1, 0.35, size=2), rng.uniform(0.05, 0.15, size=2)])
    scales = rng.uniform(0.5, 1.5, size=(count, 1))
    shifts = rng.uniform(0.0, 0.2, size=(count, 1))
    return scales * base[None, :] + shifts


def generate_scenes(
    n: int,
    seed: int,
    correlation: str = "none",
    *,
    num_classes: int = 4,
    max_objects: int = 6,
) -> list[Scene]:
    """Draw ``n`` scenes of 1 to ``max_objects`` boxes; scene ``i`` uses its own stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if correlation not in CORRELATIONS:
        raise ValueError(f"correlation must be one of {', '.join(CORRELATIONS)}")
    tree = SeedTree(seed).child("scenes")
    scenes: list[Scene] = []
    for index in range(n):
        rng = tree.generator(str(index))
        count = int(rng.integers(1, max_objects + 1))
        if correlation == "linear":
            boxes = _linear_boxes(rng, count)
        else:
            boxes = _independent_boxes(rng, count)
        labels = rng.integers(0, num_classes, size=count)
        scenes.append(Scene(objects=GroundTruth(boxes, labels), seed=seed, index=index))
    return scenes


def split_scenes(
    scenes: list[Scene], seed: int, eval_fraction: float = 0.2
) -> tuple[list[Scene], list[Scene]]:
    """Seed-stable shuffle, then the first ``1 - eval_fraction`` share trains."""
    order = SeedTree(seed).generator("split").permutation(len(scenes))
    n_eval = max(1, int(round(len(scenes) * eval_fraction)))
    n_eval = min(n_eval, len(scenes) - 1)
    shuffled = [scenes[int(i)] for i in order]
    return shuffled[n_eval:], shuffled[:n_eval]
