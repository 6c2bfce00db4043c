"""Position relation encoder: sine-cosine embedding plus a floored linear head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from reldetr.errors import DimensionError
from reldetr.geom import Box, RelationFeatures, relation_matrix
from reldetr.numkit import ops
from reldetr.numkit.tensor import Parameter, ParameterSet, Tensor, as_tensor

WEIGHT_NAME = "weight"
BIAS_NAME = "bias"


@dataclass(frozen=True)
class RelEncConfig:
    """Encoding parameters: temperature, half-dimension, input scale, floor, heads."""

    temperature: float = 10000.0
    d_re: int = 16
    scale: float = 100.0
    epsilon: float = 1e-6
    heads: int = 8

    def __post_init__(self) -> None:
        if self.temperature <= 1:
            raise ValueError("temperature must be > 1")
        if self.d_re < 1 or self.d_re % 2:
            raise ValueError("d_re must be a positive even integer")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.heads < 1:
            raise ValueError("heads must be >= 1")

    @property
    def embed_dim(self) -> int:
        return 4 * self.d_re

    def as_dict(self) -> dict[str, float | int]:
        return {
            "temperature": self.temperature,
            "d_re": self.d_re,
            "scale": self.scale,
            "epsilon": self.epsilon,
            "heads": self.heads,
        }


@dataclass(frozen=True)
class RelationBias:
    """Additive attention bias of shape ``(N_a, N_b, heads)``; every entry >= epsilon."""

    values: Tensor

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def head(self, index: int) -> Tensor:
        return ops.reshape(ops.take(self.values, [index], axis=2), self.shape[:2])


def _frequencies(cfg: RelEncConfig) -> np.ndarray:
    exponents = 2.0 * np.arange(cfg.d_re // 2, dtype=np.float64) / cfg.d_re
    return cfg.scale / np.power(cfg.temperature, exponents)


def sincos_embed(features: RelationFeatures | Tensor, cfg: RelEncConfig) -> Tensor:
    """Embed ``(N_a, N_b, 4)`` features into ``(N_a, N_b, 4 * d_re)``.

    Slots ``2k`` and ``2k + 1`` of each channel hold ``sin`` and ``cos`` of
    ``s * e / T^(2k / d_re)``; channels are concatenated in order.
    """
    values = features.values if isinstance(features, RelationFeatures) else features
    tensor = as_tensor(values)
    if tensor.ndim != 3 or tensor.shape[2] != 4:
        raise DimensionError(f"sincos_embed expects (N_a, N_b, 4) features, got {tensor.shape}")
    n_a, n_b, _ = tensor.shape
    half = cfg.d_re // 2
    phase = ops.mul(ops.reshape(tensor, (n_a, n_b, 4, 1)), _frequencies(cfg))
    sines = ops.reshape(ops.sin(phase), (n_a, n_b, 4, half, 1))
    cosines = ops.reshape(ops.cos(phase), (n_a, n_b, 4, half, 1))
    paired = ops.concat([sines, cosines], axis=-1)
    return ops.reshape(paired, (n_a, n_b, cfg.embed_dim))


def relation_head(
    embed: Tensor,
    weight: Parameter | Tensor,
    bias: Parameter | Tensor,
    cfg: RelEncConfig,
) -> RelationBias:
    """Project each pair embedding to ``heads`` scalars and floor them at epsilon."""
    w = weight.value if isinstance(weight, Parameter) else weight
    b = bias.value if isinstance(bias, Parameter) else bias
    if w.shape != (cfg.heads, cfg.embed_dim) or b.shape != (cfg.heads,):
        raise DimensionError(
            f"relation head expects weight {(cfg.heads, cfg.embed_dim)} and bias "
            f"{(cfg.heads,)}, got {w.shape} and {b.shape}"
        )
    if embed.ndim != 3 or embed.shape[2] != cfg.embed_dim:
        raise DimensionError(
            f"relation head expects (N_a, N_b, {cfg.embed_dim}) embeddings, got {embed.shape}"
        )
    return RelationBias(ops.clamp_min(ops.linear(embed, w, b), cfg.epsilon))


def encode_relation(
    set_a: Sequence[Box] | np.ndarray,
    set_b: Sequence[Box] | np.ndarray,
    params: ParameterSet,
    cfg: RelEncConfig,
    *,
    prefix: str = "relenc",
) -> RelationBias:
    """Run relation_matrix, sincos_embed and relation_head end to end.

    Boxes are plain values; only the head parameters receive gradients.
    """
    features = relation_matrix(set_a, set_b)
    embed = sincos_embed(features, cfg)
    return relation_head(
        embed,
        params[f"{prefix}.{WEIGHT_NAME}"],
        params[f"{prefix}.{BIAS_NAME}"],
        cfg,
    )


def init_relation_params(
    params: ParameterSet,
    cfg: RelEncConfig,
    rng: np.random.Generator,
    *,
    prefix: str = "relenc",
) -> None:
    """Register head parameters: uniform fan-in weights, zero bias."""
    bound = cfg.embed_dim**-0.5
    params.add(
        f"{prefix}.{WEIGHT_NAME}",
        rng.uniform(-bound, bound, size=(cfg.heads, cfg.embed_dim)),
    )
    params.add(f"{prefix}.{BIAS_NAME}", np.zeros(cfg.heads))


def top_related(
    bias: RelationBias,
    query_index: int,
    k: int,
    *,
    head: int | None = None,
) -> list[tuple[int, float]]:
    """Return the ``k`` boxes most strongly related to one query.

    Weights are averaged over heads unless ``head`` is given; the query itself
    is excluded and ties resolve to the lower index.
    """
    values = bias.values.data
    if not 0 <= query_index < values.shape[0]:
        raise IndexError(f"query index {query_index} out of range for {values.shape[0]} boxes")
    row = values[query_index, :, head] if head is not None else values[query_index].mean(axis=-1)
    candidates = [j for j in range(values.shape[1]) if j != query_index]
    ranked = sorted(candidates, key=lambda j: (-row[j], j))
    return [(j, float(row[j])) for j in ranked[:k]]
