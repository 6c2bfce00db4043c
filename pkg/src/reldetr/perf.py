"""Operation counters and optional wall-clock spans."""

from __future__ import annotations

from collections import Counter, defaultdict
from contextlib import contextmanager
from time import perf_counter
from typing import Any, Iterator


class PerfTracker:
    """Count decoder evaluations and, when enabled, time named spans.

    Counts are recorded whether or not timing is enabled, so tests can assert
    which code paths ran without reading the clock. Counter names are dotted,
    with the query path first (``matching.ffn``, ``hybrid.self_attention``).
    """

    def __init__(self, *, enabled: bool = False) -> None:
        self.enabled = enabled
        self._counts: Counter[str] = Counter()
        self._span_seconds: defaultdict[str, float] = defaultdict(float)
        self._span_calls: Counter[str] = Counter()
        self._start: float | None = None
        self._end: float | None = None

    def start(self) -> None:
        if self.enabled:
            self._start = perf_counter()
            self._end = None

    def stop(self) -> None:
        if self.enabled and self._start is not None and self._end is None:
            self._end = perf_counter()

    def count(self, name: str, amount: int = 1) -> None:
        self._counts[name] += amount

    def counts(self, prefix: str = "") -> dict[str, int]:
        """Counters whose name starts with ``prefix``, sorted by name."""
        return {
            name: self._counts[name] for name in sorted(self._counts) if name.startswith(prefix)
        }

    def total(self, prefix: str) -> int:
        return sum(self.counts(prefix).values())

    @contextmanager
    def span(self, name: str) -> Iterator[None]:
        """Accumulate the time spent inside the block under ``name``."""
        if not self.enabled:
            yield
            return
        began = perf_counter()
        try:
            yield
        finally:
            self._span_seconds[name] += perf_counter() - began
            self._span_calls[name] += 1

    @property
    def elapsed_ms(self) -> float:
        if self._start is None:
            return 0.0
        end = self._end if self._end is not None else perf_counter()
        return max(0.0, end - self._start) * 1000.0

    def summary(self) -> dict[str, Any]:
        """JSON-serializable counters, plus span timings when enabled."""
        summary: dict[str, Any] = {"counts": self.counts()}
        if not self.enabled:
            return summary
        summary["elapsed_ms"] = round(self.elapsed_ms, 3)
        summary["spans"] = {
            name: {
                "calls": self._span_calls[name],
                "ms": round(self._span_seconds[name] * 1000.0, 3),
            }
            for name in sorted(self._span_seconds)
        }
        return summary
