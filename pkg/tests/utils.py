from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

import numpy as np


def with_src_env(base_env: dict[str, str] | None = None) -> dict[str, str]:
    """Return an environment with repo src/ on PYTHONPATH."""
    env = dict(base_env or os.environ)
    repo_root = Path(__file__).resolve().parents[1]
    src_path = repo_root / "src"
    if src_path.exists():
        existing = env.get("PYTHONPATH", "")
        entries = [entry for entry in existing.split(os.pathsep) if entry]
        src_str = str(src_path)
        if src_str not in entries:
            entries.insert(0, src_str)
        env["PYTHONPATH"] = os.pathsep.join(entries)
    return env


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def coco_payload(
    boxes_by_image: dict[int, list[list[float]]], *, extra_images: tuple[int, ...] = ()
) -> dict[str, Any]:
    """Build a minimal COCO document from ``{image_id: [[x, y, w, h], ...]}``."""
    image_ids = sorted({*boxes_by_image, *extra_images})
    annotations = []
    next_id = 1
    for image_id in image_ids:
        for bbox in boxes_by_image.get(image_id, []):
            annotations.append(
                {"id": next_id, "image_id": image_id, "category_id": 1, "bbox": bbox}
            )
            next_id += 1
    return {
        "images": [{"id": image_id, "width": 640, "height": 480} for image_id in image_ids],
        "annotations": annotations,
        "categories": [{"id": 1, "name": "object"}],
    }


def dyadic_boxes(rng: np.random.Generator, count: int) -> np.ndarray:
    """Center-size boxes whose fields are exact multiples of 1/64."""
    centers = rng.integers(-256, 257, size=(count, 2)) / 64.0
    sizes = rng.integers(1, 257, size=(count, 2)) / 64.0
    return np.concatenate([centers, sizes], axis=1)
