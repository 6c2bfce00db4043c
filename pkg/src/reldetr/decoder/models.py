"""Configuration and state types for the toy relation decoder."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any, Literal

import numpy as np

from reldetr.errors import DimensionError
from reldetr.numkit.tensor import Tensor

Mode = Literal["train", "infer"]
MODES: tuple[str, ...] = ("train", "infer")


@dataclass(frozen=True)
class DecoderConfig:
    """Decoder shape: layers, width, heads, query counts, repeat factor, FFN width, classes."""

    layers: int = 6
    d_model: int = 256
    heads: int = 8
    num_matching: int = 900
    num_hybrid: int = 1500
    repeat: int = 6
    ffn_dim: int = 2048
    num_classes: int = 80

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.heads < 1 or self.d_model % self.heads:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by heads ({self.heads})")
        if self.d_model % 8:
            raise ValueError("d_model must be a multiple of 8 for the box position embedding")
        if self.num_matching < 1 or self.num_hybrid < 1:
            raise ValueError("query counts must be >= 1")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        if self.ffn_dim < 1 or self.num_classes < 1:
            raise ValueError("ffn_dim and num_classes must be >= 1")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    def as_dict(self) -> dict[str, int]:
        return {field.name: getattr(self, field.name) for field in fields(self)}


@dataclass(frozen=True)
class MemoryConfig:
    """Synthetic memory grid: ``grid x grid`` tokens with Gaussian noise."""

    grid: int = 16
    noise_std: float = 0.1

    def __post_init__(self) -> None:
        if self.grid < 1:
            raise ValueError("grid must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def as_dict(self) -> dict[str, Any]:
        return {"grid": self.grid, "noise_std": self.noise_std}


@dataclass(frozen=True)
class Memory:
    """Flattened memory tokens and the grid coordinates they sit on."""

    tokens: Tensor
    token_positions: np.ndarray

    def __post_init__(self) -> None:
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1:
            raise DimensionError(
                f"memory tokens must be (S, d) with S >= 1, got {self.tokens.shape}"
            )
        if self.token_positions.shape != (self.tokens.shape[0], 2):
            raise DimensionError(
                f"token positions {self.token_positions.shape} do not match "
                f"{self.tokens.shape[0]} tokens"
            )

    @property
    def size(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True)
class QueryState:
    """Queries of one decoder layer with their reference boxes and class logits.

    ``boxes`` and ``prev_boxes`` are ``(N, 4)`` center-size tensors. ``boxes``
    keeps its graph so box losses reach the refinement heads; ``logits`` is
    ``None`` before the first layer.
    """

    queries: Tensor
    boxes: Tensor
    prev_boxes: Tensor
    logits: Tensor | None = None

    def __post_init__(self) -> None:
        count = self.queries.shape[0]
        if self.boxes.shape != (count, 4) or self.prev_boxes.shape != (count, 4):
            raise DimensionError(
                f"boxes {self.boxes.shape} and prev_boxes {self.prev_boxes.shape} "
                f"must be ({count}, 4)"
            )
        if self.logits is not None and self.logits.shape[0] != count:
            raise DimensionError(f"logits {self.logits.shape} do not match {count} queries")

    @property
    def count(self) -> int:
        return self.queries.shape[0]


@dataclass(frozen=True)
class LayerPrediction:
    """Boxes ``(N, 4)`` and logits ``(N, C)`` emitted by one layer."""

    boxes: Tensor
    logits: Tensor


@dataclass(frozen=True)
class LayerOutputs:
    """Per-layer predictions for the matching path and, in training, the hybrid path."""

    matching: tuple[LayerPrediction, ...]
    hybrid: tuple[LayerPrediction, ...] | None = None

    @property
    def layers(self) -> int:
        return len(self.matching)

    def final(self) -> LayerPrediction:
        return self.matching[-1]
