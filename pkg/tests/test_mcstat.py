from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from reldetr.errors import IngestionError
from reldetr.geom import Box, boxes_from_array
from reldetr.mcstat import (
    AnnotationSet,
    McRecord,
    dataset_mc,
    image_mc,
    load_annotations,
    parse_annotations,
    pearson4,
    summarize,
    write_records_csv,
    write_summary_json,
)
from reldetr.verify import double_loop_mc
from tests.utils import coco_payload, dyadic_boxes, write_json


def test_pearson4_values() -> None:
    assert pearson4((1.0, 1.0, 2.0, 2.0), (2.0, 2.0, 4.0, 4.0)) == 1.0
    assert pearson4((1.0, 1.0, 2.0, 2.0), (2.0, 2.0, 1.0, 1.0)) == -1.0
    assert pearson4((1.0, 1.0, 2.0, 2.0), (1.0, 2.0, 1.0, 2.0)) == 0.0
    assert pearson4((2.0, 2.0, 2.0, 2.0), (1.0, 2.0, 3.0, 4.0)) is None
    with pytest.raises(ValueError, match="4-vector"):
        pearson4((1.0, 2.0), (1.0, 2.0))


def test_image_mc_skips_single_box() -> None:
    assert image_mc([Box(1.0, 1.0, 2.0, 2.0)]) is None
    assert image_mc([]) is None


def test_image_mc_averages_ordered_pairs() -> None:
    boxes = [Box(1.0, 1.0, 2.0, 2.0), Box(1.0, 2.0, 1.0, 2.0), Box(2.0, 2.0, 4.0, 4.0)]
    assert image_mc(boxes) == pytest.approx(1.0 / 3.0)


def test_undefined_pairs_contribute_zero() -> None:
    boxes = [Box(1.0, 1.0, 2.0, 2.0), Box(2.0, 2.0, 2.0, 2.0)]
    assert image_mc(boxes) == 0.0
    ann = AnnotationSet.from_boxes({7: boxes})
    result = dataset_mc(ann)
    assert result.records[0].n_degenerate_pairs == 2


def test_image_mc_matches_double_loop() -> None:
    rng = np.random.default_rng(4)
    for _ in range(20):
        count = int(rng.integers(2, 9))
        boxes = [
            Box(*rng.uniform(0.0, 1.0, size=2), *rng.uniform(0.05, 0.5, size=2))
            for _ in range(count)
        ]
        assert image_mc(boxes) == pytest.approx(double_loop_mc(boxes), abs=1e-12)


def test_mc_record_validation() -> None:
    with pytest.raises(ValueError, match="two objects"):
        McRecord(1, 1, 0.5)
    with pytest.raises(ValueError, match="mc must lie"):
        McRecord(1, 2, 1.5)


def test_summarize_empty_is_no_data() -> None:
    summary = summarize([], n_skipped=3)
    assert summary.no_data
    assert summary.as_dict()["mean"] is None
    assert summary.n_skipped == 3
    assert sum(summary.counts) == 0
    with pytest.raises(ValueError, match="bins"):
        summarize([], bins=0)


def test_summarize_histogram_and_densities() -> None:
    records = [McRecord(i, 2, value) for i, value in enumerate([0.0, 0.25, 0.25, 1.0])]
    summary = summarize(records, bins=4)
    assert summary.counts == (1, 2, 0, 1)
    assert summary.densities == pytest.approx((1.0, 2.0, 0.0, 1.0))
    assert summary.mean == pytest.approx(0.375)
    assert summary.median == pytest.approx(0.25)
    assert summary.bin_edges == pytest.approx((0.0, 0.25, 0.5, 0.75, 1.0))


def test_fixture_summary_values(fixtures_dir: Path) -> None:
    annotations = load_annotations(fixtures_dir / "coco_100.json")
    result = dataset_mc(annotations)
    summary = result.summary
    assert len(result.records) == 83
    assert summary.n_images == 83
    assert summary.n_skipped == 17
    assert summary.n_degenerate_pairs == 32
    assert summary.n_degenerate_boxes == 1
    assert summary.mean == pytest.approx(116.0 / 249.0, abs=1e-12)
    assert summary.median == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert summary.counts == (33, 0, 0, 17, 0, 0, 0, 0, 0, 33)


def test_dataset_mc_is_independent_of_jobs(fixtures_dir: Path) -> None:
    annotations = load_annotations(fixtures_dir / "coco_100.json")
    serial = dataset_mc(annotations, jobs=1)
    threaded = dataset_mc(annotations, jobs=4)
    assert serial.records == threaded.records
    assert serial.summary == threaded.summary


def test_records_are_sorted_by_image_id() -> None:
    boxes = [Box(1.0, 1.0, 2.0, 2.0), Box(2.0, 2.0, 4.0, 4.0)]
    ann = AnnotationSet.from_boxes({9: boxes, 2: boxes, 5: boxes[:1]})
    result = dataset_mc(ann)
    assert [record.image_id for record in result.records] == [2, 9]
    assert result.summary.n_skipped == 1


def test_parse_drops_degenerate_boxes(caplog) -> None:
    payload = coco_payload({1: [[0.0, 0.0, 2.0, 2.0], [1.0, 1.0, 0.0, 3.0], [0.0, 0.0, 4.0, 4.0]]})
    with caplog.at_level(logging.WARNING, logger="reldetr.mcstat.coco"):
        ann = parse_annotations(payload)
    assert ann.n_degenerate_boxes == 1
    assert len(ann.boxes(1)) == 2
    assert "degenerate" in caplog.text


def test_parse_reports_location_of_schema_errors() -> None:
    payload = coco_payload({1: [[0.0, 0.0, 2.0, 2.0]]})
    payload["annotations"][0]["bbox"] = [0.0, 0.0, 2.0]
    with pytest.raises(IngestionError, match=r"annotations\[0\]\.bbox"):
        parse_annotations(payload, source="bad.json")


def test_parse_rejects_unknown_and_duplicate_images() -> None:
    payload = coco_payload({1: [[0.0, 0.0, 2.0, 2.0]]})
    payload["annotations"][0]["image_id"] = 42
    with pytest.raises(IngestionError, match="unknown image id 42"):
        parse_annotations(payload)
    payload = coco_payload({1: []})
    payload["images"].append(dict(payload["images"][0]))
    with pytest.raises(IngestionError, match="duplicate image id 1"):
        parse_annotations(payload)


def test_load_annotations_reports_path(tmp_path: Path) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(IngestionError, match="broken.json"):
        load_annotations(broken)
    with pytest.raises(IngestionError, match="missing.json"):
        load_annotations(tmp_path / "missing.json")


def test_writers(tmp_path: Path) -> None:
    path = write_json(tmp_path / "ann.json", coco_payload({3: [[0, 0, 2, 2], [0, 0, 4, 4]]}))
    result = dataset_mc(load_annotations(path))
    csv_path = write_records_csv(result.records, tmp_path / "out" / "mc.csv")
    assert csv_path.read_text(encoding="utf-8") == "image_id,n_objects,mc\n3,2,1.0\n"
    summary_path = write_summary_json(result.summary, tmp_path / "out" / "summary.json")
    payload = json.loads(summary_path.read_text(encoding="utf-8"))
    assert payload["schema_version"] == "1"
    assert payload["mean"] == 1.0
    assert payload["no_data"] is False


def test_image_mc_ignores_box_order() -> None:
    rng = np.random.default_rng(21)
    boxes = boxes_from_array(dyadic_boxes(rng, 7))
    baseline = image_mc(boxes)
    assert baseline is not None
    for _ in range(5):
        order = rng.permutation(len(boxes))
        assert image_mc([boxes[i] for i in order]) == pytest.approx(baseline, abs=1e-12)


def test_dataset_mc_ignores_image_id_labels() -> None:
    rng = np.random.default_rng(8)
    scenes = {
        image_id: boxes_from_array(dyadic_boxes(rng, 2 + image_id % 4)) for image_id in range(6)
    }
    relabel = {0: 40, 1: 7, 2: 93, 3: 12, 4: 3, 5: 61}
    original = dataset_mc(AnnotationSet.from_boxes(scenes))
    renamed = dataset_mc(
        AnnotationSet.from_boxes({relabel[key]: boxes for key, boxes in scenes.items()})
    )
    by_scene = {record.image_id: record.mc for record in original.records}
    for record in renamed.records:
        source = next(key for key, value in relabel.items() if value == record.image_id)
        assert record.mc == by_scene[source]
    assert renamed.summary.mean == pytest.approx(original.summary.mean, abs=1e-12)
    assert renamed.summary.median == pytest.approx(original.summary.median, abs=1e-12)
    assert renamed.summary.counts == original.summary.counts


def test_records_csv_bytes_do_not_depend_on_jobs(fixtures_dir: Path, tmp_path: Path) -> None:
    annotations = load_annotations(fixtures_dir / "coco_100.json")
    serial = write_records_csv(dataset_mc(annotations, jobs=1).records, tmp_path / "jobs1.csv")
    threaded = write_records_csv(dataset_mc(annotations, jobs=8).records, tmp_path / "jobs8.csv")
    assert serial.read_bytes() == threaded.read_bytes()
