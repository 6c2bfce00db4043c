from __future__ import annotations

import math

import numpy as np
import pytest

from reldetr.errors import DimensionError
from reldetr.geom import Box, RelationFeatures, relation_matrix
from reldetr.numkit import ParameterSet, Tensor, gradcheck, ops
from reldetr.relenc import (
    RelEncConfig,
    encode_relation,
    init_relation_params,
    relation_head,
    sincos_embed,
    top_related,
)
from tests.utils import dyadic_boxes


def _params(cfg: RelEncConfig, seed: int = 0) -> ParameterSet:
    params = ParameterSet()
    init_relation_params(params, cfg, np.random.default_rng(seed))
    return params


def test_config_validation() -> None:
    with pytest.raises(ValueError, match="even"):
        RelEncConfig(d_re=3)
    with pytest.raises(ValueError, match="epsilon"):
        RelEncConfig(epsilon=0.0)
    with pytest.raises(ValueError, match="temperature"):
        RelEncConfig(temperature=1.0)
    assert RelEncConfig().embed_dim == 64


def test_sincos_embed_layout() -> None:
    cfg = RelEncConfig(d_re=4, scale=2.0, temperature=100.0)
    features = RelationFeatures(np.array([[[0.5, -1.0, 0.0, 0.25]]]))
    embed = sincos_embed(features, cfg).data
    assert embed.shape == (1, 1, 16)
    # Channel 1, frequency index 1: s / T^(2/4) = 2 / 10.
    phase = 2.0 / 10.0 * -1.0
    assert embed[0, 0, 4 + 2] == pytest.approx(math.sin(phase))
    assert embed[0, 0, 4 + 3] == pytest.approx(math.cos(phase))
    # A zero feature embeds to alternating 0, 1.
    np.testing.assert_allclose(embed[0, 0, 8:12], [0.0, 1.0, 0.0, 1.0])


def test_sincos_embed_rejects_bad_shape() -> None:
    with pytest.raises(DimensionError, match="sincos_embed"):
        sincos_embed(Tensor(np.zeros((2, 3))), RelEncConfig())


def test_bias_shape_and_floor() -> None:
    cfg = RelEncConfig(d_re=8, heads=3, epsilon=1e-3)
    boxes = dyadic_boxes(np.random.default_rng(0), 6)
    params = _params(cfg)
    params["relenc.bias"].assign(np.array([-50.0, 0.0, 5.0]))
    bias = encode_relation(boxes, boxes[:4], params, cfg)
    assert bias.shape == (6, 4, 3)
    assert np.all(bias.values.data >= cfg.epsilon)
    np.testing.assert_array_equal(bias.head(0).data, np.full((6, 4), cfg.epsilon))
    assert bias.head(2).shape == (6, 4)


def test_relation_head_rejects_wrong_parameters() -> None:
    cfg = RelEncConfig(d_re=4, heads=2)
    embed = Tensor(np.zeros((2, 2, cfg.embed_dim)))
    with pytest.raises(DimensionError, match="relation head"):
        relation_head(embed, Tensor(np.zeros((3, cfg.embed_dim))), Tensor(np.zeros(3)), cfg)


def test_bias_is_invariant_to_shift_and_scale() -> None:
    cfg = RelEncConfig(d_re=8, heads=2)
    params = _params(cfg, seed=4)
    rng = np.random.default_rng(5)
    boxes = dyadic_boxes(rng, 4)
    moved = boxes * np.array([0.25, 0.25, 0.25, 0.25]) + np.array([3.0, -1.5, 0.0, 0.0])
    before = encode_relation(boxes, boxes, params, cfg).values.data
    after = encode_relation(moved, moved, params, cfg).values.data
    assert before.tobytes() == after.tobytes()


def test_head_parameters_pass_gradcheck() -> None:
    cfg = RelEncConfig(d_re=4, heads=2, epsilon=1e-6)
    params = _params(cfg, seed=2)
    params["relenc.bias"].assign(np.array([0.5, 0.7]))
    boxes = dyadic_boxes(np.random.default_rng(8), 3)
    readout = np.random.default_rng(9).normal(size=(3, 3, 2))

    def loss() -> Tensor:
        return ops.sum(ops.mul(encode_relation(boxes, boxes, params, cfg).values, readout))

    assert gradcheck(loss, params).passed


def test_top_related_ranks_neighbors() -> None:
    cfg = RelEncConfig(d_re=4, heads=2)
    params = _params(cfg)
    boxes = [Box(0.0, 0.0, 1.0, 1.0), Box(0.5, 0.0, 1.0, 1.0), Box(8.0, 8.0, 1.0, 1.0)]
    bias = encode_relation(boxes, boxes, params, cfg)
    neighbors = top_related(bias, 0, 5)
    assert len(neighbors) == 2
    assert all(index != 0 for index, _ in neighbors)
    weights = [weight for _, weight in neighbors]
    assert weights == sorted(weights, reverse=True)
    single = top_related(bias, 1, 1, head=1)
    assert len(single) == 1
    with pytest.raises(IndexError, match="out of range"):
        top_related(bias, 3, 1)


def test_relation_matrix_feeds_embedding() -> None:
    cfg = RelEncConfig(d_re=2, heads=1)
    boxes = [Box(0.0, 0.0, 1.0, 1.0), Box(1.0, 0.0, 1.0, 1.0)]
    embed = sincos_embed(relation_matrix(boxes, boxes), cfg)
    assert embed.shape == (2, 2, 8)
