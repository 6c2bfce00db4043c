"""Portable JSON checkpoints of parameter values."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from reldetr.contracts import SCHEMA_VERSION, validate_checkpoint
from reldetr.numkit.tensor import ParameterSet


def parameters_as_dict(
    params: ParameterSet, metadata: Mapping[str, Any] | None = None
) -> dict[str, Any]:
    """Flat ``name -> {shape, values}`` map with row-major float values."""
    return {
        "schema_version": SCHEMA_VERSION,
        "metadata": dict(metadata or {}),
        "parameters": {
            parameter.name: {
                "shape": list(parameter.shape),
                "values": [float(value) for value in parameter.value.data.reshape(-1)],
            }
            for parameter in params
        },
    }


def save_parameters(
    params: ParameterSet, path: Path, metadata: Mapping[str, Any] | None = None
) -> Path:
    """Write a checkpoint; floats use the shortest exact decimal form."""
    payload = parameters_as_dict(params, metadata)
    validate_checkpoint(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    return path


def parameters_from_dict(payload: Mapping[str, Any]) -> ParameterSet:
    validate_checkpoint(payload)
    params = ParameterSet()
    for name, entry in payload["parameters"].items():
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(int(extent) for extent in entry["shape"])
        if values.size != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(f"parameter {name}: {values.size} values do not fill shape {shape}")
        params.add(name, values.reshape(shape))
    return params


def load_parameters(path: Path, into: ParameterSet | None = None) -> ParameterSet:
    """Read a checkpoint; with ``into`` the values are loaded into existing parameters."""
    loaded = parameters_from_dict(json.loads(path.read_text(encoding="utf-8")))
    if into is None:
        return loaded
    into.load_state(loaded.state())
    return into
