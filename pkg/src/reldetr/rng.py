"""Named, splittable random streams derived from a single seed."""

from __future__ import annotations

import hashlib

import numpy as np


def _name_words(name: str) -> tuple[int, ...]:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


class SeedTree:
    """Derive independent generators by name from one root seed.

    A stream depends only on the root seed and the dotted path of names, so
    adding or reordering consumers never shifts another consumer's numbers.
    """

    def __init__(self, seed: int, path: tuple[str, ...] = ()) -> None:
        if seed < 0:
            raise ValueError("seed must be >= 0")
        self.seed = int(seed)
        self.path = path

    def child(self, name: str) -> SeedTree:
        return SeedTree(self.seed, (*self.path, name))

    def sequence(self) -> np.random.SeedSequence:
        words: list[int] = []
        for name in self.path:
            words.extend(_name_words(name))
        return np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(words))

    def generator(self, name: str | None = None) -> np.random.Generator:
        node = self.child(name) if name is not None else self
        return np.random.Generator(np.random.PCG64(node.sequence()))

    def __repr__(self) -> str:
        return f"SeedTree(seed={self.seed}, path={'/'.join(self.path) or '.'})"
