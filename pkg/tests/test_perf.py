from __future__ import annotations

import time

from reldetr.perf import PerfTracker


def test_perf_tracker_records_spans() -> None:
    perf = PerfTracker(enabled=True)
    perf.start()
    with perf.span("step"):
        time.sleep(0.001)
    with perf.span("step"):
        pass
    perf.stop()

    summary = perf.summary()
    assert summary["spans"]["step"]["calls"] == 2
    assert summary["spans"]["step"]["ms"] > 0
    assert summary["elapsed_ms"] >= summary["spans"]["step"]["ms"]
    assert perf.elapsed_ms > 0


def test_perf_tracker_disabled_keeps_counts_only() -> None:
    perf = PerfTracker(enabled=False)
    perf.start()
    with perf.span("noop"):
        perf.count("matching.ffn")
    perf.stop()
    assert perf.summary() == {"counts": {"matching.ffn": 1}}
    assert perf.elapsed_ms == 0.0


def test_counts_filter_by_prefix() -> None:
    perf = PerfTracker()
    perf.count("matching.self_attention", 3)
    perf.count("hybrid.ffn")
    perf.count("hybrid.ffn")
    assert perf.counts("hybrid.") == {"hybrid.ffn": 2}
    assert perf.total("matching.") == 3
    assert perf.total("relation.") == 0
