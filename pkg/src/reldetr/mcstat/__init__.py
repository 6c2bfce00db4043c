"""Macroscopic correlation statistics over COCO-style annotations."""

from reldetr.mcstat.coco import AnnotationSet, load_annotations, parse_annotations
from reldetr.mcstat.stats import (
    McRecord,
    McResult,
    McSummary,
    dataset_mc,
    image_mc,
    pearson4,
    summarize,
    write_records_csv,
    write_summary_json,
)

__all__ = [
    "AnnotationSet",
    "McRecord",
    "McResult",
    "McSummary",
    "dataset_mc",
    "image_mc",
    "load_annotations",
    "parse_annotations",
    "pearson4",
    "summarize",
    "write_records_csv",
    "write_summary_json",
]
