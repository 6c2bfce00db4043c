"""Named configuration profiles: paper-scale defaults and desk-scale variants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from reldetr.decoder.models import DecoderConfig, MemoryConfig
from reldetr.matching.models import LossWeights
from reldetr.relenc import RelEncConfig
from reldetr.toyexp.models import TrainConfig


@dataclass(frozen=True)
class Profile:
    """Complete set of configs for a run."""

    name: str
    summary: str
    relenc: RelEncConfig
    decoder: DecoderConfig
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)

    def as_dict(self) -> dict[str, Any]:
        return {
            "profile": self.name,
            "relenc": self.relenc.as_dict(),
            "decoder": self.decoder.as_dict(),
            "memory": self.memory.as_dict(),
            "loss": self.loss.as_dict(),
            "train": self.train.as_dict(),
        }


DEFAULT_PROFILE = "toy"

_PROFILES: dict[str, Profile] = {
    "paper": Profile(
        name="paper",
        summary="Full-size decoder: 6 layers, 256 wide, 900 matching and 1500 hybrid queries.",
        relenc=RelEncConfig(temperature=10000.0, d_re=16, scale=100.0, heads=8),
        decoder=DecoderConfig(
            layers=6,
            d_model=256,
            heads=8,
            num_matching=900,
            num_hybrid=1500,
            repeat=6,
            ffn_dim=2048,
            num_classes=80,
        ),
    ),
    "toy": Profile(
        name="toy",
        summary="Desk-scale decoder for synthetic scenes (3 layers, 32 wide, 4 classes).",
        relenc=RelEncConfig(temperature=10000.0, d_re=16, scale=100.0, heads=4),
        decoder=DecoderConfig(
            layers=3,
            d_model=32,
            heads=4,
            num_matching=24,
            num_hybrid=40,
            repeat=3,
            ffn_dim=64,
            num_classes=4,
        ),
        # Four training scenes hold at most 24 boxes, one per matching query.
        train=TrainConfig(momentum=0.9, num_scenes=5),
    ),
    "gradcheck": Profile(
        name="gradcheck",
        summary="Smallest decoder used by the gradient-check suite.",
        relenc=RelEncConfig(temperature=10000.0, d_re=4, scale=100.0, heads=2),
        decoder=DecoderConfig(
            layers=2,
            d_model=16,
            heads=2,
            num_matching=4,
            num_hybrid=6,
            repeat=2,
            ffn_dim=16,
            num_classes=3,
        ),
        memory=MemoryConfig(grid=3, noise_std=0.1),
    ),
}


def list_profiles() -> list[Profile]:
    return [_PROFILES[name] for name in sorted(_PROFILES)]


def profile_names() -> list[str]:
    return sorted(_PROFILES)


def get_profile(name: str) -> Profile:
    """Return a profile by name."""
    try:
        return _PROFILES[name.strip().lower()]
    except KeyError as exc:
        raise ValueError(f"Unknown profile: {name}") from exc
