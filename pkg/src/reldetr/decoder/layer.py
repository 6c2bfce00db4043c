"""One decoder layer: biased self-attention, cross-attention, FFN and box refinement."""

from __future__ import annotations

import logging

import numpy as np

from reldetr.decoder.attention import biased_self_attention, cross_attention
from reldetr.decoder.memory import sine_position_encoding
from reldetr.decoder.models import Memory, QueryState
from reldetr.decoder.weights import RELENC_PREFIX, DecoderModel
from reldetr.errors import NumericError
from reldetr.numkit import ops
from reldetr.numkit.freeze import detach
from reldetr.numkit.tensor import Tensor
from reldetr.perf import PerfTracker
from reldetr.relenc import RelationBias, encode_relation

LOGGER = logging.getLogger("reldetr.decoder.layer")

LOGIT_EPS = 1e-5


def inverse_sigmoid(values: np.ndarray, eps: float = LOGIT_EPS) -> np.ndarray:
    clipped = np.clip(values, eps, 1.0 - eps)
    return np.log(clipped / (1.0 - clipped))


def query_position(boxes: np.ndarray, model: DecoderModel) -> Tensor:
    """Project the sine code of each reference box to ``d_model``."""
    code = sine_position_encoding(boxes, model.decoder.d_model)
    return ops.linear(code, *model.linear("decoder.query_pos"))


def relation_bias(state: QueryState, model: DecoderModel) -> RelationBias:
    """Relation bias from the previous boxes (rows) to the current boxes (columns)."""
    previous = detach(state.prev_boxes).data
    current = detach(state.boxes).data
    return encode_relation(previous, current, model.params, model.relenc, prefix=RELENC_PREFIX)


def _mlp(x: Tensor, model: DecoderModel, prefix: str) -> Tensor:
    hidden = ops.relu(ops.linear(x, *model.linear(f"{prefix}.fc1")))
    return ops.linear(hidden, *model.linear(f"{prefix}.fc2"))


def _check(x: Tensor, layer_index: int, what: str) -> None:
    try:
        ops.check_finite(x, f"layer {layer_index} {what}")
    except NumericError:
        LOGGER.error("non-finite %s in decoder layer %s", what, layer_index)
        raise


def decoder_layer(
    state: QueryState,
    memory: Memory,
    model: DecoderModel,
    layer_index: int,
    *,
    use_relation: bool = True,
    counters: PerfTracker | None = None,
    path: str = "matching",
) -> QueryState:
    """Advance ``state`` through layer ``layer_index``.

    The refined boxes are ``sigmoid(logit(old) + delta)`` where the old boxes
    are detached; the relation bias also sees detached boxes only.
    """
    reference = detach(state.boxes).data
    pos = query_position(reference, model)
    bias = relation_bias(state, model) if use_relation else None

    attended = biased_self_attention(state, bias, model, layer_index, query_pos=pos)
    x = ops.add(state.queries, attended)
    x = ops.add(x, cross_attention(x, memory, model, layer_index, query_pos=pos))
    prefix = model.layer_prefix(layer_index)
    x = ops.add(x, _mlp(x, model, f"{prefix}.ffn"))
    _check(x, layer_index, "queries")
    if counters is not None:
        counters.count(f"{path}.self_attention")
        counters.count(f"{path}.cross_attention")
        counters.count(f"{path}.ffn")
        if use_relation:
            counters.count(f"{path}.relation")

    delta = _mlp(x, model, f"{prefix}.box")
    boxes = ops.sigmoid(ops.add(inverse_sigmoid(reference), delta))
    logits = ops.linear(x, *model.linear(f"{prefix}.class"))
    _check(boxes, layer_index, "boxes")
    _check(logits, layer_index, "logits")
    return QueryState(queries=x, boxes=boxes, prev_boxes=state.boxes, logits=logits)
