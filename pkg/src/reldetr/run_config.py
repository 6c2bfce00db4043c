"""``--config`` override files merged over a named profile."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from reldetr.contracts import validate_run_config
from reldetr.profiles import Profile, get_profile

SECTIONS = ("relenc", "decoder", "memory", "loss", "train")


@dataclass(frozen=True)
class RunConfig:
    """Normalized override payload: an optional profile name plus per-section fields."""

    profile: str | None = None
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    seed: int | None = None

    def as_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {key: dict(value) for key, value in self.sections.items()}
        if self.profile:
            payload["profile"] = self.profile
        if self.seed is not None:
            payload["seed"] = self.seed
        return payload


def normalize_run_config(payload: Mapping[str, Any]) -> RunConfig:
    """Validate and split a raw override payload into sections."""
    validate_run_config(payload)
    sections = {
        name: dict(payload[name]) for name in SECTIONS if isinstance(payload.get(name), Mapping)
    }
    profile = payload.get("profile")
    seed = payload.get("seed")
    return RunConfig(
        profile=str(profile) if profile else None,
        sections=sections,
        seed=int(seed) if seed is not None else None,
    )


def load_run_config(path: Path) -> RunConfig:
    """Load an override file; raises ``ValueError`` for invalid content."""
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, Mapping):
        raise ValueError(f"{path}: run config must be a JSON object")
    try:
        return normalize_run_config(payload)
    except jsonschema.ValidationError as exc:
        raise ValueError(f"{path}: {exc.message}") from exc


def apply_run_config(profile: Profile, config: RunConfig) -> Profile:
    """Replace fields section by section; untouched fields keep the profile's values."""
    updates: dict[str, Any] = {}
    for name, values in config.sections.items():
        if values:
            updates[name] = replace(getattr(profile, name), **values)
    return replace(profile, **updates)


def resolve_profile(name: str, config: RunConfig | None = None) -> Profile:
    """Pick the profile (file value loses to an explicit ``name``) and apply overrides."""
    base = get_profile(name)
    if config is None:
        return base
    return apply_run_config(base, config)
