from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from reldetr.decoder import build_model
from reldetr.geom import Box
from reldetr.matching import GroundTruth
from reldetr.mcstat import image_mc
from reldetr.profiles import get_profile
from reldetr.toyexp.metrics import toy_ap
from reldetr.toyexp.models import TrainConfig
from reldetr.toyexp.scenes import generate_scenes, split_scenes
from reldetr.toyexp.train import config_hash, report_as_dict, report_bytes, run_experiment


def _small_profile(**train_changes):
    profile = get_profile("gradcheck")
    train = replace(profile.train, num_scenes=4, **train_changes)
    return replace(profile, train=train)


def test_train_config_validation() -> None:
    with pytest.raises(ValueError, match="lr"):
        TrainConfig(lr=0.0)
    with pytest.raises(ValueError, match="correlation"):
        TrainConfig(correlation="quadratic")
    with pytest.raises(ValueError, match="momentum"):
        TrainConfig(momentum=1.0)


def test_generate_scenes_is_seeded() -> None:
    first = generate_scenes(5, 3, "none")
    again = generate_scenes(5, 3, "none")
    other = generate_scenes(5, 4, "none")
    assert [s.objects.boxes.tobytes() for s in first] == [s.objects.boxes.tobytes() for s in again]
    assert [s.objects.boxes.tobytes() for s in first] != [s.objects.boxes.tobytes() for s in other]
    longer = generate_scenes(8, 3, "none")
    assert longer[2].objects.boxes.tobytes() == first[2].objects.boxes.tobytes()


@pytest.mark.parametrize("correlation", ["none", "linear"])
def test_scenes_stay_in_unit_square(correlation: str) -> None:
    for scene in generate_scenes(50, 0, correlation, num_classes=3, max_objects=5):
        gt = scene.objects
        assert 1 <= gt.count <= 5
        corners = np.concatenate(
            [gt.boxes[:, :2] - gt.boxes[:, 2:] / 2, gt.boxes[:, :2] + gt.boxes[:, 2:] / 2], axis=1
        )
        assert np.all(corners >= 0.0) and np.all(corners <= 1.0)
        assert np.all((gt.labels >= 0) & (gt.labels < 3))


def test_linear_scenes_are_fully_correlated() -> None:
    for scene in generate_scenes(30, 1, "linear"):
        if scene.objects.count < 2:
            continue
        boxes = [Box(*row) for row in scene.objects.boxes]
        assert image_mc(boxes) == pytest.approx(1.0, abs=1e-9)


def test_generate_scenes_rejects_bad_arguments() -> None:
    with pytest.raises(ValueError, match="correlation"):
        generate_scenes(2, 0, "quadratic")
    with pytest.raises(ValueError, match="n must be"):
        generate_scenes(0, 0)


def test_split_scenes_partitions() -> None:
    scenes = generate_scenes(10, 0)
    train, held_out = split_scenes(scenes, 0, 0.2)
    assert len(train) == 8 and len(held_out) == 2
    assert sorted(s.index for s in train + held_out) == list(range(10))
    assert [s.index for s in split_scenes(scenes, 0, 0.2)[1]] == [s.index for s in held_out]


def test_toy_ap_scores() -> None:
    gt = GroundTruth(np.array([[0.3, 0.3, 0.2, 0.2], [0.7, 0.7, 0.2, 0.2]]), np.array([0, 1]))
    good_logits = np.array([[5.0, -5.0], [-5.0, 5.0]])
    assert toy_ap([(gt.boxes, good_logits)], [gt]) == pytest.approx(1.0)
    swapped = good_logits[:, ::-1]
    assert toy_ap([(gt.boxes, swapped)], [gt]) == 0.0
    half = np.array([[5.0, -5.0], [5.0, -5.0]])
    assert toy_ap([(gt.boxes, half)], [gt]) == pytest.approx(0.5)
    assert toy_ap([(gt.boxes, good_logits)], [GroundTruth.empty()]) == 0.0
    with pytest.raises(ValueError, match="pair up"):
        toy_ap([], [gt])


def test_config_hash_is_order_independent() -> None:
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_run_experiment_report_contents() -> None:
    profile = _small_profile()
    report, model = run_experiment("relation+contrast", 2, 0, profile)
    assert report.steps == 2
    assert [point.step for point in report.losses] == [0, 1]
    assert all(point.hybrid_total is not None for point in report.losses)
    assert report.wall_ms is None
    assert not report.diverged
    assert 0.0 <= report.toy_ap <= 1.0
    payload = json.loads(report_bytes(report))
    assert payload["config"]["profile"] == "gradcheck"
    assert payload["variant"] == "relation+contrast"
    assert model.params.tensor("queries.matching").shape == (4, 16)


def test_baseline_report_has_no_hybrid_losses() -> None:
    report, _ = run_experiment("baseline", 1, 0, _small_profile())
    assert report.losses[0].hybrid_total is None
    assert "hybrid_total" not in report_as_dict(report)["losses"][0]


def test_run_experiment_is_byte_deterministic() -> None:
    profile = _small_profile()
    first, _ = run_experiment("relation", 2, 5, profile)
    second, _ = run_experiment("relation", 2, 5, profile)
    assert report_bytes(first) == report_bytes(second)


def test_timing_records_wall_time() -> None:
    report, _ = run_experiment("baseline", 1, 0, _small_profile(), timing=True)
    assert report.wall_ms is not None and report.wall_ms >= 0.0


def test_zeroed_relation_trains_like_baseline() -> None:
    profile = _small_profile()
    baseline, _ = run_experiment("baseline", 3, 2, profile)
    zeroed = build_model(profile.decoder, profile.relenc, profile.memory, seed=2)
    zeroed.zero_relation()
    related, trained = run_experiment("relation", 3, 2, profile, model=zeroed)
    assert [p.as_dict() for p in related.losses] == [p.as_dict() for p in baseline.losses]
    assert related.toy_ap == baseline.toy_ap
    np.testing.assert_array_equal(trained.params.tensor("relenc.weight").data, 0.0)


def test_divergence_stops_the_run() -> None:
    profile = _small_profile(divergence_threshold=1e-9)
    report, _ = run_experiment("baseline", 5, 0, profile)
    assert report.diverged
    assert len(report.losses) == 1
    assert report.toy_ap == 0.0


def test_run_experiment_rejects_bad_arguments() -> None:
    with pytest.raises(ValueError, match="variant"):
        run_experiment("contrast", 1, 0, _small_profile())
    with pytest.raises(ValueError, match="steps"):
        run_experiment("baseline", 0, 0, _small_profile())


@pytest.mark.slow
def test_toy_training_halves_matching_loss() -> None:
    report, _ = run_experiment("relation+contrast", 200, 7, get_profile("toy"))
    assert not report.diverged
    assert report.final_total <= 0.5 * report.initial_total


def test_toy_profile_training_boxes_fit_matching_queries() -> None:
    profile = get_profile("toy")
    train = profile.train
    assert train.lr == 1e-2
    assert 0 < train.momentum < 1
    scenes = generate_scenes(train.num_scenes, 7, train.correlation, max_objects=train.max_objects)
    train_scenes, eval_scenes = split_scenes(scenes, 7, train.eval_fraction)
    assert (len(train_scenes), len(eval_scenes)) == (4, 1)
    assert sum(scene.objects.count for scene in train_scenes) <= profile.decoder.num_matching
