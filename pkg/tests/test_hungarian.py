from __future__ import annotations

import numpy as np
import pytest

from reldetr.matching import brute_force_assignment, hungarian


def test_square_assignment() -> None:
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    result = hungarian(cost)
    assert result.pairs == ((0, 1), (1, 0), (2, 2))
    assert result.total_cost == 5.0


def test_wide_matrix_assigns_every_row() -> None:
    cost = np.array([[9.0, 1.0, 9.0, 9.0], [9.0, 9.0, 9.0, 2.0]])
    result = hungarian(cost)
    assert result.pairs == ((0, 1), (1, 3))
    assert len(result) == 2


def test_tall_matrix_assigns_every_column() -> None:
    cost = np.array([[5.0, 5.0], [1.0, 7.0], [6.0, 0.5], [2.0, 2.0]])
    result = hungarian(cost)
    assert result.pairs == ((1, 0), (2, 1))
    assert result.total_cost == 1.5
    assert list(result.rows) == [1, 2]
    assert list(result.cols) == [0, 1]


def test_ties_pick_lexicographically_smallest_pairs() -> None:
    assert hungarian(np.zeros((1, 3))).pairs == ((0, 0),)
    assert hungarian(np.zeros((2, 3))).pairs == ((0, 0), (1, 1))
    assert hungarian(np.zeros((3, 2))).pairs == ((0, 0), (1, 1))
    result = hungarian(np.array([[2.0, 1.0], [2.0, 1.0]]))
    assert result.pairs == ((0, 0), (1, 1))
    assert result.total_cost == 3.0
    assert hungarian(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])).pairs == ((0, 1), (1, 0))


def test_empty_side_returns_empty_assignment() -> None:
    assert hungarian(np.zeros((3, 0))).pairs == ()
    assert hungarian(np.zeros((0, 2))).total_cost == 0.0


def test_negative_costs() -> None:
    cost = np.array([[-1.0, -5.0], [-4.0, -2.0]])
    assert hungarian(cost).total_cost == -9.0


def test_rejects_invalid_matrices() -> None:
    with pytest.raises(ValueError, match="2-D"):
        hungarian(np.zeros(3))
    with pytest.raises(ValueError, match="non-finite"):
        hungarian(np.array([[0.0, np.nan]]))


def test_matches_exhaustive_search() -> None:
    rng = np.random.default_rng(0)
    for _ in range(60):
        n, m = (int(v) for v in rng.integers(1, 7, size=2))
        cost = rng.uniform(-10.0, 10.0, size=(n, m))
        solved = hungarian(cost)
        oracle = brute_force_assignment(cost)
        assert solved.total_cost == oracle.total_cost
        assert len(solved) == min(n, m)
        assert len(set(solved.cols)) == len(solved)


def test_integer_costs_with_many_ties_stay_optimal() -> None:
    rng = np.random.default_rng(1)
    for _ in range(30):
        cost = rng.integers(0, 3, size=(4, 5)).astype(np.float64)
        assert hungarian(cost).total_cost == brute_force_assignment(cost).total_cost


@pytest.mark.parametrize("shape", [(3, 3), (3, 5), (5, 3), (4, 4), (2, 6), (6, 2)])
def test_tied_optima_match_exhaustive_pairs(shape: tuple[int, int]) -> None:
    rng = np.random.default_rng(sum(shape) * 31 + shape[0])
    for _ in range(40):
        cost = rng.integers(0, 3, size=shape).astype(np.float64)
        solved = hungarian(cost)
        oracle = brute_force_assignment(cost)
        assert solved.pairs == oracle.pairs
        assert solved.total_cost == oracle.total_cost


def test_duplicated_target_columns_resolve_to_lowest_copy() -> None:
    base = np.array([[0.3, 0.9], [0.9, 0.3], [0.5, 0.5]])
    tiled = np.tile(base, (1, 2))
    assert hungarian(tiled).pairs == brute_force_assignment(tiled).pairs
