"""Multi-head scaled dot-product attention with an optional additive relation bias."""

from __future__ import annotations

import math
from dataclasses import dataclass

from reldetr.decoder.models import Memory, QueryState
from reldetr.decoder.weights import DecoderModel
from reldetr.errors import DimensionError
from reldetr.numkit import ops
from reldetr.numkit.tensor import Tensor
from reldetr.relenc import RelationBias


@dataclass(frozen=True)
class AttentionResult:
    """Mixed output ``(N, d_model)`` and the per-head ``(N, S)`` attention rows."""

    output: Tensor
    weights: tuple[Tensor, ...]


def _project(x: Tensor, model: DecoderModel, prefix: str) -> Tensor:
    return ops.linear(x, *model.linear(prefix))


def _split_heads(x: Tensor, heads: int) -> list[Tensor]:
    head_dim = x.shape[1] // heads
    return [ops.take(x, range(h * head_dim, (h + 1) * head_dim), axis=1) for h in range(heads)]


def multi_head_attention(
    query_in: Tensor,
    key_in: Tensor,
    value_in: Tensor,
    model: DecoderModel,
    prefix: str,
    *,
    bias: RelationBias | None = None,
) -> AttentionResult:
    """Attend from ``query_in`` rows to ``key_in`` rows using the weights under ``prefix``.

    Each head scores ``q_h k_h^T / sqrt(head_dim)``; when ``bias`` is given its
    slice for that head is added to the scores before the row softmax.
    """
    heads = model.decoder.heads
    n_queries, n_keys = query_in.shape[0], key_in.shape[0]
    if bias is not None and bias.shape != (n_queries, n_keys, heads):
        raise DimensionError(
            f"relation bias {bias.shape} does not fit attention "
            f"{(n_queries, n_keys, heads)}"
        )
    q = _split_heads(_project(query_in, model, f"{prefix}.q"), heads)
    k = _split_heads(_project(key_in, model, f"{prefix}.k"), heads)
    v = _split_heads(_project(value_in, model, f"{prefix}.v"), heads)
    scale = 1.0 / math.sqrt(model.decoder.head_dim)

    outputs: list[Tensor] = []
    weights: list[Tensor] = []
    for h in range(heads):
        scores = ops.mul(ops.matmul(q[h], ops.transpose(k[h])), scale)
        rows = ops.softmax_rows(scores, bias.head(h) if bias is not None else None)
        weights.append(rows)
        outputs.append(ops.matmul(rows, v[h]))
    mixed = _project(ops.concat(outputs, axis=1), model, f"{prefix}.out")
    return AttentionResult(output=mixed, weights=tuple(weights))


def biased_self_attention(
    state: QueryState,
    bias: RelationBias | None,
    model: DecoderModel,
    layer_index: int,
    *,
    query_pos: Tensor | None = None,
) -> Tensor:
    """Self-attention among the queries of ``state``.

    ``query_pos`` is added to the inputs of the query and key projections only.
    """
    x = state.queries
    if x.shape[1] != model.decoder.d_model:
        raise DimensionError(
            f"queries {x.shape} do not match d_model {model.decoder.d_model}"
        )
    positioned = ops.add(x, query_pos) if query_pos is not None else x
    prefix = f"{model.layer_prefix(layer_index)}.self_attn"
    return multi_head_attention(positioned, positioned, x, model, prefix, bias=bias).output


def cross_attention(
    x: Tensor,
    memory: Memory,
    model: DecoderModel,
    layer_index: int,
    *,
    query_pos: Tensor | None = None,
) -> Tensor:
    """Attend from the queries to the memory tokens (no bias)."""
    positioned = ops.add(x, query_pos) if query_pos is not None else x
    prefix = f"{model.layer_prefix(layer_index)}.cross_attn"
    return multi_head_attention(positioned, memory.tokens, memory.tokens, model, prefix).output
