"""Schema validation for the JSON artifacts reldetr reads and writes."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping

import jsonschema

SCHEMA_VERSION = "1"


@lru_cache(maxsize=None)
def _load_schema(name: str) -> dict[str, Any]:
    """Load a JSON schema bundled in the package."""
    with resources.files("reldetr.schemas").joinpath(name).open("r", encoding="utf-8") as handle:
        return json.load(handle)


def validate_experiment_report(report: Mapping[str, Any]) -> None:
    jsonschema.validate(report, _load_schema("experiment_report.schema.json"))


def validate_mc_summary(summary: Mapping[str, Any]) -> None:
    jsonschema.validate(summary, _load_schema("mc_summary.schema.json"))


def validate_checkpoint(payload: Mapping[str, Any]) -> None:
    jsonschema.validate(payload, _load_schema("checkpoint.schema.json"))


def validate_encode_output(payload: Mapping[str, Any]) -> None:
    jsonschema.validate(payload, _load_schema("encode_output.schema.json"))


def validate_run_config(config: Mapping[str, Any]) -> None:
    """Validate a ``--config`` override file."""
    jsonschema.validate(config, _load_schema("run_config.schema.json"))


def validate_coco_annotations(payload: Mapping[str, Any]) -> None:
    """Validate the COCO fields used by the MC statistics."""
    jsonschema.validate(payload, _load_schema("coco_annotations.schema.json"))
