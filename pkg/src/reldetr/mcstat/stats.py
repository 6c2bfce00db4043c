"""Macroscopic position correlation (MC) of box layouts, per image and per dataset."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from reldetr.contracts import SCHEMA_VERSION, validate_mc_summary
from reldetr.geom import Box, boxes_to_array
from reldetr.jobs import run_jobs
from reldetr.mcstat.coco import AnnotationSet

LOGGER = logging.getLogger("reldetr.mcstat.stats")

CSV_HEADER = ("image_id", "n_objects", "mc")
DEFAULT_BINS = 10


@dataclass(frozen=True)
class McRecord:
    """MC value of one image with at least two boxes."""

    image_id: int
    n_objects: int
    mc: float
    n_degenerate_pairs: int = 0

    def __post_init__(self) -> None:
        if self.n_objects < 2:
            raise ValueError("an MC record needs at least two objects")
        if not 0.0 <= self.mc <= 1.0:
            raise ValueError(f"mc must lie in [0, 1], got {self.mc}")


@dataclass(frozen=True)
class McSummary:
    """Distribution of per-image MC values over a dataset."""

    n_images: int
    n_skipped: int
    n_degenerate_pairs: int
    n_degenerate_boxes: int
    mean: float | None
    median: float | None
    stddev: float | None
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    densities: tuple[float, ...]

    @property
    def no_data(self) -> bool:
        return self.mean is None

    def as_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "no_data": self.no_data,
            "mean": self.mean,
            "median": self.median,
            "stddev": self.stddev,
            "histogram": {
                "bin_edges": list(self.bin_edges),
                "counts": list(self.counts),
                "densities": list(self.densities),
            },
            "n_images": self.n_images,
            "n_skipped": self.n_skipped,
            "n_degenerate_pairs": self.n_degenerate_pairs,
            "n_degenerate_boxes": self.n_degenerate_boxes,
        }


@dataclass(frozen=True)
class McResult:
    records: tuple[McRecord, ...]
    summary: McSummary


def _as_vector(box: Box | Sequence[float]) -> np.ndarray:
    values = box.as_tuple() if isinstance(box, Box) else tuple(box)
    vector = np.asarray(values, dtype=np.float64)
    if vector.shape != (4,):
        raise ValueError(f"expected a 4-vector, got shape {vector.shape}")
    return vector


def pearson4(a: Box | Sequence[float], b: Box | Sequence[float]) -> float | None:
    """Pearson correlation of two 4-vectors; ``None`` when either has zero variance."""
    da = _as_vector(a) - _as_vector(a).mean()
    db = _as_vector(b) - _as_vector(b).mean()
    var_a = float(np.dot(da, da))
    var_b = float(np.dot(db, db))
    if var_a == 0.0 or var_b == 0.0:
        return None
    value = float(np.dot(da, db)) / math.sqrt(var_a * var_b)
    return min(1.0, max(-1.0, value))


def _pair_statistics(boxes: Sequence[Box]) -> tuple[float | None, int]:
    """Return ``(mc, degenerate ordered pairs)``; ``mc`` is ``None`` below two boxes."""
    count = len(boxes)
    if count < 2:
        return None, 0
    values = boxes_to_array(boxes)
    deviations = values - values.mean(axis=1, keepdims=True)
    variances = np.einsum("ij,ij->i", deviations, deviations)
    defined = variances > 0
    valid = defined[:, None] & defined[None, :]
    np.fill_diagonal(valid, False)
    off_diagonal = ~np.eye(count, dtype=bool)
    scale = np.sqrt(np.outer(variances, variances))
    safe_scale = np.where(valid, scale, 1.0)
    correlation = np.where(valid, (deviations @ deviations.T) / safe_scale, 0.0)
    magnitude = np.minimum(np.abs(correlation), 1.0)
    degenerate = int(np.count_nonzero(off_diagonal & ~valid))
    mc = float(magnitude[off_diagonal].sum()) / (count * (count - 1))
    return mc, degenerate


def image_mc(boxes: Sequence[Box]) -> float | None:
    """Mean ``|pearson4|`` over ordered pairs of distinct boxes.

    Pairs with an undefined correlation contribute 0. Returns ``None`` (skip)
    for fewer than two boxes.
    """
    mc, _ = _pair_statistics(boxes)
    return mc


def summarize(
    records: Sequence[McRecord],
    *,
    n_skipped: int = 0,
    n_degenerate_boxes: int = 0,
    bins: int = DEFAULT_BINS,
) -> McSummary:
    """Mean, median, population stddev and a ``[0, 1]`` histogram of MC values."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    values = np.array([record.mc for record in records], dtype=np.float64)
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    width = 1.0 / bins
    if len(values):
        densities = tuple(float(c) / (len(values) * width) for c in counts)
        mean: float | None = float(np.mean(values))
        median: float | None = float(np.median(values))
        stddev: float | None = float(np.std(values))
    else:
        densities = tuple(0.0 for _ in counts)
        mean = median = stddev = None
    return McSummary(
        n_images=len(values),
        n_skipped=n_skipped,
        n_degenerate_pairs=sum(record.n_degenerate_pairs for record in records),
        n_degenerate_boxes=n_degenerate_boxes,
        mean=mean,
        median=median,
        stddev=stddev,
        bin_edges=tuple(float(edge) for edge in edges),
        counts=tuple(int(c) for c in counts),
        densities=densities,
    )


def dataset_mc(ann: AnnotationSet, *, jobs: int = 1, bins: int = DEFAULT_BINS) -> McResult:
    """Per-image MC over a dataset, sorted by image id, plus the summary.

    Images with fewer than two boxes are skipped and counted. Results do not
    depend on ``jobs``.
    """
    image_ids = ann.image_ids()

    def worker(image_id: int) -> tuple[int, int, float | None, int]:
        boxes = ann.boxes(image_id)
        mc, degenerate = _pair_statistics(boxes)
        return image_id, len(boxes), mc, degenerate

    records: list[McRecord] = []
    skipped = 0
    for image_id, count, mc, degenerate in run_jobs(image_ids, jobs, worker):
        if mc is None:
            skipped += 1
            LOGGER.debug("skipped: %s boxes", count, extra={"image": image_id})
            continue
        records.append(McRecord(image_id, count, mc, degenerate))
    if not records:
        LOGGER.warning("no image with two or more boxes; summary has no data")
    summary = summarize(
        records, n_skipped=skipped, n_degenerate_boxes=ann.n_degenerate_boxes, bins=bins
    )
    return McResult(records=tuple(records), summary=summary)


def write_records_csv(records: Sequence[McRecord], path: Path) -> Path:
    """Write ``image_id,n_objects,mc`` rows (UTF-8, LF line endings)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow([record.image_id, record.n_objects, repr(record.mc)])
    return path


def write_summary_json(summary: McSummary, path: Path) -> Path:
    payload = summary.as_dict()
    validate_mc_summary(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
