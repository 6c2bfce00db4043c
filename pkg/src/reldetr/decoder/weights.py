"""Parameter layout and seeded initialization for the relation decoder."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from reldetr.decoder.models import DecoderConfig, MemoryConfig
from reldetr.numkit.tensor import ParameterSet, Tensor
from reldetr.relenc import RelEncConfig, init_relation_params
from reldetr.rng import SeedTree

CLASS_PRIOR_PROB = 0.01
RELENC_PREFIX = "relenc"
ATTENTION_PROJECTIONS = ("q", "k", "v", "out")


@dataclass
class DecoderModel:
    """All decoder, query, memory and relation-head parameters plus their configs.

    Layers own separate weights; the relation head and the query position
    projection are shared by every layer. Matching and hybrid queries have
    separate embeddings but run through the same layers.
    """

    decoder: DecoderConfig
    relenc: RelEncConfig
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    params: ParameterSet = field(default_factory=ParameterSet)

    def __post_init__(self) -> None:
        if self.relenc.heads != self.decoder.heads:
            raise ValueError(
                f"relation heads ({self.relenc.heads}) must equal decoder heads "
                f"({self.decoder.heads})"
            )

    def linear(self, prefix: str) -> tuple[Tensor, Tensor]:
        return self.params.tensor(f"{prefix}.weight"), self.params.tensor(f"{prefix}.bias")

    def layer_prefix(self, index: int) -> str:
        return f"decoder.layers.{index}"

    def zero_relation(self) -> None:
        """Set the relation head to ``W = 0, B = 0`` (bias collapses to epsilon)."""
        for parameter in self.params.subset(f"{RELENC_PREFIX}."):
            parameter.assign(np.zeros(parameter.shape))

    def copy(self) -> DecoderModel:
        return DecoderModel(self.decoder, self.relenc, self.memory, self.params.copy())


def _add_linear(
    params: ParameterSet,
    prefix: str,
    in_dim: int,
    out_dim: int,
    seeds: SeedTree,
    *,
    zero: bool = False,
    bias_value: float = 0.0,
) -> None:
    if zero:
        weight = np.zeros((out_dim, in_dim))
    else:
        bound = 1.0 / math.sqrt(in_dim)
        weight = seeds.generator(f"{prefix}.weight").uniform(-bound, bound, size=(out_dim, in_dim))
    params.add(f"{prefix}.weight", weight)
    params.add(f"{prefix}.bias", np.full(out_dim, bias_value))


def _add_attention(params: ParameterSet, prefix: str, d_model: int, seeds: SeedTree) -> None:
    for name in ATTENTION_PROJECTIONS:
        _add_linear(params, f"{prefix}.{name}", d_model, d_model, seeds)


def build_model(
    decoder: DecoderConfig,
    relenc: RelEncConfig,
    memory: MemoryConfig | None = None,
    *,
    seed: int = 0,
) -> DecoderModel:
    """Create a model whose every parameter is drawn from its own named stream."""
    model = DecoderModel(decoder, relenc, memory or MemoryConfig())
    params = model.params
    seeds = SeedTree(seed).child("params")
    d = decoder.d_model

    params.add(
        "queries.matching",
        seeds.generator("queries.matching").normal(size=(decoder.num_matching, d)),
    )
    params.add(
        "queries.hybrid",
        seeds.generator("queries.hybrid").normal(size=(decoder.num_hybrid, d)),
    )
    params.add(
        "memory.class_embed",
        seeds.generator("memory.class_embed").normal(size=(decoder.num_classes, d)),
    )
    _add_linear(params, "decoder.query_pos", d, d, seeds)

    prior_bias = -math.log((1.0 - CLASS_PRIOR_PROB) / CLASS_PRIOR_PROB)
    for index in range(decoder.layers):
        prefix = model.layer_prefix(index)
        _add_attention(params, f"{prefix}.self_attn", d, seeds)
        _add_attention(params, f"{prefix}.cross_attn", d, seeds)
        _add_linear(params, f"{prefix}.ffn.fc1", d, decoder.ffn_dim, seeds)
        _add_linear(params, f"{prefix}.ffn.fc2", decoder.ffn_dim, d, seeds)
        _add_linear(params, f"{prefix}.box.fc1", d, d, seeds)
        # Refinement starts as the identity on boxes.
        _add_linear(params, f"{prefix}.box.fc2", d, 4, seeds, zero=True)
        _add_linear(
            params,
            f"{prefix}.class",
            d,
            decoder.num_classes,
            seeds,
            bias_value=prior_bias,
        )

    init_relation_params(params, relenc, seeds.generator(RELENC_PREFIX), prefix=RELENC_PREFIX)
    return model
