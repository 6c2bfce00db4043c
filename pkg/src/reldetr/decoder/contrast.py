"""Matching and hybrid query paths through one shared decoder."""

from __future__ import annotations

import math

import numpy as np

from reldetr.decoder.layer import decoder_layer
from reldetr.decoder.models import MODES, LayerOutputs, LayerPrediction, Memory, Mode, QueryState
from reldetr.decoder.weights import DecoderModel
from reldetr.numkit.tensor import Tensor
from reldetr.perf import PerfTracker


def anchor_grid(count: int) -> np.ndarray:
    """First ``count`` cells (row-major) of the smallest square grid holding them.

    Each anchor is centered in its cell and is half the cell wide.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    side = math.ceil(math.sqrt(count))
    ticks = (np.arange(side, dtype=np.float64) + 0.5) / side
    ys, xs = np.meshgrid(ticks, ticks, indexing="ij")
    size = np.full(side * side, 0.5 / side)
    grid = np.stack([xs.reshape(-1), ys.reshape(-1), size, size], axis=1)
    return grid[:count]


def _initial_state(model: DecoderModel, name: str, count: int) -> QueryState:
    boxes = Tensor(anchor_grid(count), op="anchors")
    return QueryState(queries=model.params.tensor(name), boxes=boxes, prev_boxes=boxes)


def init_queries(model: DecoderModel) -> tuple[QueryState, QueryState]:
    """Return the initial matching and hybrid states.

    Query embeddings come from the model (seeded when it was built); boxes
    are grid anchors and ``prev_boxes`` equals ``boxes``.
    """
    cfg = model.decoder
    return (
        _initial_state(model, "queries.matching", cfg.num_matching),
        _initial_state(model, "queries.hybrid", cfg.num_hybrid),
    )


def run_path(
    state: QueryState,
    memory: Memory,
    model: DecoderModel,
    *,
    use_relation: bool,
    counters: PerfTracker | None = None,
    path: str = "matching",
) -> tuple[LayerPrediction, ...]:
    predictions: list[LayerPrediction] = []
    for index in range(model.decoder.layers):
        state = decoder_layer(
            state,
            memory,
            model,
            index,
            use_relation=use_relation,
            counters=counters,
            path=path,
        )
        assert state.logits is not None
        predictions.append(LayerPrediction(boxes=state.boxes, logits=state.logits))
    return tuple(predictions)


def contrast_forward(
    matching: QueryState,
    hybrid: QueryState | None,
    memory: Memory,
    model: DecoderModel,
    mode: Mode = "train",
    *,
    relation: bool = True,
    counters: PerfTracker | None = None,
) -> LayerOutputs:
    """Run both query paths in training, only the matching path at inference.

    The matching path uses the relation bias when ``relation`` is set; the
    hybrid path never does.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    matched = run_path(
        matching, memory, model, use_relation=relation, counters=counters, path="matching"
    )
    if mode == "infer":
        return LayerOutputs(matching=matched)
    if hybrid is None:
        raise ValueError("training mode needs hybrid queries")
    hybrid_out = run_path(
        hybrid, memory, model, use_relation=False, counters=counters, path="hybrid"
    )
    return LayerOutputs(matching=matched, hybrid=hybrid_out)
