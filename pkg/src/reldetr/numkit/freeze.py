"""Stop-gradient values that a gradient check can hold fixed.

``detach`` cuts a tensor out of the graph. Outside a gradient check it just
copies the forward value. While a :class:`FrozenValues` tape is recording, the
detached values are stored in call order; while it is replaying, each
``detach`` call returns the stored value instead of the current one, so a
finite-difference check differentiates the same function as the backward pass.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Iterator

import numpy as np

from reldetr.errors import GradcheckError
from reldetr.numkit.tensor import Tensor

_ACTIVE_TAPE: ContextVar[FrozenValues | None] = ContextVar("reldetr_frozen_values", default=None)


class FrozenValues:
    """Ordered record of detached values for one function evaluation."""

    def __init__(self) -> None:
        self._values: list[np.ndarray] = []
        self._cursor = 0
        self._replaying = False

    def __len__(self) -> int:
        return len(self._values)

    def resolve(self, value: np.ndarray) -> np.ndarray:
        if not self._replaying:
            self._values.append(np.array(value, copy=True))
            return value
        if self._cursor >= len(self._values):
            raise GradcheckError(
                "more detached values than recorded", location=f"detach #{self._cursor}"
            )
        stored = self._values[self._cursor]
        if stored.shape != value.shape:
            raise GradcheckError(
                f"detached value shape changed from {stored.shape} to {value.shape}",
                location=f"detach #{self._cursor}",
            )
        self._cursor += 1
        return stored

    @contextmanager
    def recording(self) -> Iterator[FrozenValues]:
        self._values = []
        self._replaying = False
        token = _ACTIVE_TAPE.set(self)
        try:
            yield self
        finally:
            _ACTIVE_TAPE.reset(token)

    @contextmanager
    def replaying(self) -> Iterator[FrozenValues]:
        self._cursor = 0
        self._replaying = True
        token = _ACTIVE_TAPE.set(self)
        try:
            yield self
        finally:
            self._replaying = False
            _ACTIVE_TAPE.reset(token)


def detach(x: Tensor) -> Tensor:
    """Return a constant copy of ``x`` that no gradient flows through."""
    tape = _ACTIVE_TAPE.get()
    value = x.data if tape is None else tape.resolve(x.data)
    return Tensor(value, op="detach")
