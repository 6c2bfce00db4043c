"""Synthetic memory tokens and sinusoidal position encodings."""

from __future__ import annotations

import math

import numpy as np

from reldetr.decoder.models import Memory
from reldetr.decoder.weights import DecoderModel
from reldetr.errors import DimensionError
from reldetr.geom import corners_array
from reldetr.matching.models import GroundTruth
from reldetr.numkit import ops

POSITION_TEMPERATURE = 10000.0


def sine_position_encoding(
    coords: np.ndarray, dim: int, *, temperature: float = POSITION_TEMPERATURE
) -> np.ndarray:
    """Encode ``(N, k)`` coordinates in ``[0, 1]`` into ``(N, dim)`` sin/cos features.

    Each coordinate gets ``dim // k`` slots holding interleaved ``sin`` and
    ``cos`` of ``2 pi c / temperature^(2i / slots)``.
    """
    values = np.asarray(coords, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionError(f"expected (N, k) coordinates, got shape {values.shape}")
    count, width = values.shape
    slots = dim // width
    if slots * width != dim or slots % 2:
        raise DimensionError(f"dim {dim} must split into an even number of slots per coordinate")
    exponents = 2.0 * np.arange(slots // 2, dtype=np.float64) / slots
    phase = values[:, :, None] * (2.0 * math.pi) / np.power(temperature, exponents)
    paired = np.stack([np.sin(phase), np.cos(phase)], axis=-1)
    return paired.reshape(count, dim)


def grid_centers(grid: int) -> np.ndarray:
    """Row-major ``(grid * grid, 2)`` cell centers of the unit square."""
    ticks = (np.arange(grid, dtype=np.float64) + 0.5) / grid
    ys, xs = np.meshgrid(ticks, ticks, indexing="ij")
    return np.stack([xs.reshape(-1), ys.reshape(-1)], axis=1)


def occupancy(gt: GroundTruth, centers: np.ndarray, num_classes: int) -> np.ndarray:
    """Count, per cell and class, the ground-truth boxes covering the cell center."""
    counts = np.zeros((len(centers), num_classes))
    if gt.count == 0:
        return counts
    corners = corners_array(gt.boxes)
    inside = (
        (centers[:, None, 0] >= corners[None, :, 0])
        & (centers[:, None, 0] <= corners[None, :, 2])
        & (centers[:, None, 1] >= corners[None, :, 1])
        & (centers[:, None, 1] <= corners[None, :, 3])
    )
    for obj, label in enumerate(gt.labels):
        counts[:, label] += inside[:, obj]
    return counts


def build_memory(gt: GroundTruth, model: DecoderModel, rng: np.random.Generator) -> Memory:
    """Build ``grid^2`` tokens: cell position code + class occupancy embedding + noise."""
    cfg = model.memory
    d_model = model.decoder.d_model
    gt.check_classes(model.decoder.num_classes)
    centers = grid_centers(cfg.grid)
    base = sine_position_encoding(centers, d_model)
    if cfg.noise_std > 0:
        base = base + rng.normal(scale=cfg.noise_std, size=base.shape)
    filled = occupancy(gt, centers, model.decoder.num_classes)
    class_signal = ops.matmul(filled, model.params.tensor("memory.class_embed"))
    return Memory(tokens=ops.add(class_signal, base), token_positions=centers)
