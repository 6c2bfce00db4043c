"""Toy relation decoder with a shared-weight matching/hybrid query pipeline."""

from reldetr.decoder.attention import AttentionResult, biased_self_attention, cross_attention
from reldetr.decoder.contrast import anchor_grid, contrast_forward, init_queries
from reldetr.decoder.layer import decoder_layer
from reldetr.decoder.memory import build_memory
from reldetr.decoder.models import (
    DecoderConfig,
    LayerOutputs,
    LayerPrediction,
    Memory,
    MemoryConfig,
    QueryState,
)
from reldetr.decoder.weights import DecoderModel, build_model

__all__ = [
    "AttentionResult",
    "DecoderConfig",
    "DecoderModel",
    "LayerOutputs",
    "LayerPrediction",
    "Memory",
    "MemoryConfig",
    "QueryState",
    "anchor_grid",
    "biased_self_attention",
    "build_memory",
    "build_model",
    "contrast_forward",
    "cross_attention",
    "decoder_layer",
    "init_queries",
]
