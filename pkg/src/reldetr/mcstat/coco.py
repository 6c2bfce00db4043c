"""COCO annotation ingestion for box statistics."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from reldetr.contracts import validate_coco_annotations
from reldetr.errors import IngestionError
from reldetr.geom import Box

LOGGER = logging.getLogger("reldetr.mcstat.coco")


@dataclass
class AnnotationSet:
    """Images with their sizes and center-size boxes.

    Boxes with ``w <= 0`` or ``h <= 0`` are dropped at load time and counted in
    ``n_degenerate_boxes``.
    """

    images: dict[int, tuple[float, float]] = field(default_factory=dict)
    boxes_by_image: dict[int, list[Box]] = field(default_factory=dict)
    n_degenerate_boxes: int = 0
    source: str | None = None

    def image_ids(self) -> list[int]:
        return sorted(self.images)

    def boxes(self, image_id: int) -> list[Box]:
        return self.boxes_by_image.get(image_id, [])

    @classmethod
    def from_boxes(cls, boxes_by_image: Mapping[int, list[Box]]) -> AnnotationSet:
        """Build an in-memory set (image sizes are not needed by the statistics)."""
        return cls(
            images={image_id: (1.0, 1.0) for image_id in boxes_by_image},
            boxes_by_image={image_id: list(boxes) for image_id, boxes in boxes_by_image.items()},
        )


def _json_location(path: Any) -> str:
    parts: list[str] = []
    for item in path:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else str(item))
    return "".join(parts) or "$"


def parse_annotations(payload: Any, *, source: str = "<memory>") -> AnnotationSet:
    """Convert a decoded COCO document into an :class:`AnnotationSet`."""
    try:
        validate_coco_annotations(payload)
    except jsonschema.ValidationError as exc:
        raise IngestionError(
            exc.message, path=source, location=_json_location(exc.absolute_path)
        ) from exc

    result = AnnotationSet(source=source)
    for index, image in enumerate(payload["images"]):
        image_id = int(image["id"])
        if image_id in result.images:
            raise IngestionError(
                f"duplicate image id {image_id}", path=source, location=f"images[{index}].id"
            )
        result.images[image_id] = (float(image["width"]), float(image["height"]))
        result.boxes_by_image[image_id] = []

    for index, annotation in enumerate(payload["annotations"]):
        location = f"annotations[{index}]"
        image_id = int(annotation["image_id"])
        if image_id not in result.images:
            raise IngestionError(
                f"unknown image id {image_id}", path=source, location=f"{location}.image_id"
            )
        x_min, y_min, width, height = (float(value) for value in annotation["bbox"])
        if not all(math.isfinite(value) for value in (x_min, y_min, width, height)):
            raise IngestionError("non-finite bbox", path=source, location=f"{location}.bbox")
        if width <= 0 or height <= 0:
            result.n_degenerate_boxes += 1
            LOGGER.debug(
                "dropping degenerate box %s", annotation["bbox"], extra={"image": image_id}
            )
            continue
        result.boxes_by_image[image_id].append(Box.from_corner_size(x_min, y_min, width, height))

    if result.n_degenerate_boxes:
        LOGGER.warning(
            "dropped %s degenerate boxes (w <= 0 or h <= 0) from %s",
            result.n_degenerate_boxes,
            source,
        )
    return result


def load_annotations(path: Path) -> AnnotationSet:
    """Read a COCO-format JSON file."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read file ({exc.strerror or exc})", path=str(path)) from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestionError(
            f"invalid JSON: {exc.msg}", path=str(path), location=f"line {exc.lineno}"
        ) from exc
    return parse_annotations(payload, source=str(path))
