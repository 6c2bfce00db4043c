from __future__ import annotations

import pytest

from reldetr.verify import (
    Case,
    CaseResult,
    _run_case,
    format_results,
    hungarian_trial,
    run_suites,
    suite_cases,
)


def _case(name: str) -> Case:
    return next(case for case in suite_cases("invariants") if case.name == name)


def test_suite_cases_cover_every_suite() -> None:
    names = {case.suite for case in suite_cases("all")}
    assert names == {"gradcheck", "hungarian", "invariants"}
    assert any(case.name == "decoder" for case in suite_cases("gradcheck"))
    with pytest.raises(ValueError, match="Unknown suite"):
        suite_cases("speed")


def test_hungarian_suite_passes() -> None:
    results = run_suites("hungarian")
    assert len(results) == 1
    assert results[0].passed


def test_hungarian_trial_agrees_with_oracle() -> None:
    for seed in range(10):
        solved, oracle = hungarian_trial(seed)
        assert solved.pairs == oracle.pairs
        assert solved.total_cost == oracle.total_cost


@pytest.mark.parametrize(
    "name",
    [
        "relation invariance",
        "shape contract",
        "bias floor",
        "constant bias",
        "inference purity",
        "matching discipline",
        "mc correctness",
    ],
)
def test_invariant_cases_pass(name: str) -> None:
    result = _run_case(_case(name))
    assert result.passed, result.detail


@pytest.mark.slow
def test_training_neutrality_case_passes() -> None:
    result = _run_case(_case("training neutrality"))
    assert result.passed, result.detail


@pytest.mark.slow
def test_full_gradcheck_suite_passes() -> None:
    results = run_suites("gradcheck", jobs=0)
    assert all(result.passed for result in results), format_results(results)


def test_crashing_case_is_reported_as_failure() -> None:
    def boom() -> CaseResult:
        raise RuntimeError("kaput")

    result = _run_case(Case("invariants", "boom", boom))
    assert not result.passed
    assert result.metric is None
    assert "kaput" in result.detail


def test_format_results_table() -> None:
    results = [
        CaseResult("hungarian", "oracle", True, 200.0, "200 matrices"),
        CaseResult("invariants", "bias floor", False, None, "error: x"),
    ]
    table = format_results(results)
    lines = table.splitlines()
    assert lines[0].startswith("suite")
    assert "pass" in lines[1] and "2.000e+02" in lines[1]
    assert "FAIL" in lines[2] and lines[2].rstrip().endswith("-")
    assert lines[-1] == "1/2 cases passed"
    assert results[0].as_dict()["passed"] is True
