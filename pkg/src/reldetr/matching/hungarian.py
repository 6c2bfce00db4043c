"""Minimum-cost bipartite assignment (shortest augmenting path with potentials).

Among assignments of equal minimum cost the lexicographically smallest tuple
of sorted ``(row, col)`` pairs is returned, so the result does not depend on
how the solver happened to break ties.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from reldetr.matching.models import Assignment

# Reduced costs within this fraction of the largest entry count as tight.
TIGHT_RTOL = 1e-9


def _validate(cost: np.ndarray) -> np.ndarray:
    matrix = np.asarray(cost, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("cost matrix contains non-finite entries")
    return matrix


def _solve_rows(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assign every row of an ``n x m`` matrix (``n <= m``).

    Returns the column per row plus the row and column potentials ``u``, ``v``
    with ``u[i] + v[j] <= cost[i, j]``, equality on assigned pairs and
    ``v[j] <= 0`` (zero on unassigned columns).
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    owner = np.zeros(m + 1, dtype=np.int64)  # 1-based row per column, 0 = free
    way = np.zeros(m + 1, dtype=np.int64)
    for row in range(1, n + 1):
        owner[0] = row
        col = 0
        min_reduced = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[col] = True
            current = owner[col]
            free = ~used[1:]
            reduced = cost[current - 1] - u[current] - v[1:]
            better = free & (reduced < min_reduced[1:])
            min_reduced[1:][better] = reduced[better]
            way[1:][better] = col
            candidates = np.where(free, min_reduced[1:], np.inf)
            next_col = int(np.argmin(candidates)) + 1
            delta = candidates[next_col - 1]
            u[owner[used]] += delta
            v[used] -= delta
            min_reduced[~used] -= delta
            col = next_col
            if owner[col] == 0:
                break
        while col:
            previous = way[col]
            owner[col] = owner[previous]
            col = previous
    assigned = np.full(n, -1, dtype=np.int64)
    for column in range(1, m + 1):
        if owner[column]:
            assigned[owner[column] - 1] = column - 1
    return assigned, u[1:], v[1:]


def _assignment(cost: np.ndarray, pairs: list[tuple[int, int]]) -> Assignment:
    ordered = tuple(sorted(pairs))
    total = 0.0
    for row, col in ordered:
        total += float(cost[row, col])
    return Assignment(pairs=ordered, total_cost=total)


@dataclass
class _TightGraph:
    """Optimal assignments as matchings on zero-reduced-cost edges.

    A matching is optimal exactly when it uses tight edges only and covers
    every required row and column (those whose potential is nonzero, plus the
    whole smaller side).
    """

    row_cols: list[list[int]]
    col_rows: list[list[int]]
    row_required: list[bool]
    col_required: list[bool]
    match_row: list[int | None]
    match_col: list[int | None]

    def _unfixed(self, row: int | None, fixed: int) -> bool:
        return row is None or row > fixed

    def _repair_row(self, start: int, fixed: int) -> bool:
        """Re-cover required ``start`` by an alternating path over rows ``> fixed``."""
        parent: dict[int, int] = {}
        queue = [start]
        for row in queue:
            for col in self.row_cols[row]:
                holder = self.match_col[col]
                if col in parent or not self._unfixed(holder, fixed):
                    continue
                parent[col] = row
                if holder is None or not self.row_required[holder]:
                    if holder is not None:
                        self.match_row[holder] = None
                    self._shift(col, parent)
                    return True
                queue.append(holder)
        return False

    def _shift(self, col: int | None, parent: dict[int, int]) -> None:
        while col is not None:
            row = parent[col]
            following = self.match_row[row]
            self.match_row[row] = col
            self.match_col[col] = row
            col = following

    def _repair_col(self, start: int, fixed: int) -> bool:
        """Re-cover required ``start`` by moving rows ``> fixed`` along tight edges."""
        came_from: dict[int, int] = {}
        queue = [start]
        for col in queue:
            for row in self.col_rows[col]:
                if row <= fixed or row in came_from:
                    continue
                came_from[row] = col
                released = self.match_row[row]
                if released is None or not self.col_required[released]:
                    path: list[tuple[int, int]] = []
                    step = row
                    while True:
                        target = came_from[step]
                        path.append((step, target))
                        if target == start:
                            break
                        holder = self.match_col[target]
                        assert holder is not None
                        step = holder
                    if released is not None:
                        self.match_col[released] = None
                    for moved, target in path:
                        self.match_row[moved] = target
                        self.match_col[target] = moved
                    return True
                queue.append(released)
        return False

    def _force(self, row: int, col: int) -> bool:
        previous = self.match_row[row]
        holder = self.match_col[col]
        if previous is not None:
            self.match_col[previous] = None
        if holder is not None:
            self.match_row[holder] = None
        self.match_row[row] = col
        self.match_col[col] = row
        if holder is not None and self.row_required[holder]:
            if not self._repair_row(holder, row):
                return False
        if (
            previous is not None
            and self.col_required[previous]
            and self.match_col[previous] is None
        ):
            return self._repair_col(previous, row)
        return True

    def lexicographic(self) -> list[tuple[int, int]]:
        """Give each row, in order, the smallest column an optimal completion allows."""
        for row, cols in enumerate(self.row_cols):
            current = self.match_row[row]
            for col in cols:
                if current is not None and col >= current:
                    break
                if not self._unfixed(self.match_col[col], row - 1):
                    continue
                saved = (list(self.match_row), list(self.match_col))
                if self._force(row, col):
                    break
                self.match_row, self.match_col = saved
        return [(row, col) for row, col in enumerate(self.match_row) if col is not None]


def _tight_graph(
    matrix: np.ndarray,
    pairs: list[tuple[int, int]],
    row_potential: np.ndarray,
    col_potential: np.ndarray,
    row_required: np.ndarray,
    col_required: np.ndarray,
    tol: float,
) -> _TightGraph | None:
    """Return the tight-edge graph, or ``None`` when the optimum is unique."""
    reduced = matrix - row_potential[:, None] - col_potential[None, :]
    tight = reduced <= tol
    if np.count_nonzero(tight) == len(pairs):
        return None
    n, m = matrix.shape
    match_row: list[int | None] = [None] * n
    match_col: list[int | None] = [None] * m
    for row, col in pairs:
        match_row[row] = col
        match_col[col] = row
    return _TightGraph(
        row_cols=[[int(col) for col in np.flatnonzero(tight[row])] for row in range(n)],
        col_rows=[[int(row) for row in np.flatnonzero(tight[:, col])] for col in range(m)],
        row_required=[bool(flag) for flag in row_required],
        col_required=[bool(flag) for flag in col_required],
        match_row=match_row,
        match_col=match_col,
    )


def hungarian(cost: np.ndarray) -> Assignment:
    """Return a minimum-cost injective assignment of the smaller side into the larger.

    Runs in ``O(n^2 m)`` for ``n <= m`` when the optimum is unique. Ties go to
    the lexicographically smallest sorted pair tuple; the total cost sums the
    selected entries in query order.
    """
    matrix = _validate(cost)
    n, m = matrix.shape
    if n == 0 or m == 0:
        return Assignment(pairs=(), total_cost=0.0)
    tol = TIGHT_RTOL * max(1.0, float(np.max(np.abs(matrix))))
    if n <= m:
        cols, u, v = _solve_rows(matrix)
        pairs = [(row, int(col)) for row, col in enumerate(cols)]
        row_potential, col_potential = u, v
        row_required = np.ones(n, dtype=bool)
        col_required = v < -tol
    else:
        rows, u, v = _solve_rows(matrix.T)
        pairs = [(int(row), col) for col, row in enumerate(rows)]
        row_potential, col_potential = v, u
        row_required = v < -tol
        col_required = np.ones(m, dtype=bool)
    solved = _assignment(matrix, pairs)
    graph = _tight_graph(
        matrix, pairs, row_potential, col_potential, row_required, col_required, tol
    )
    if graph is None:
        return solved
    canonical = _assignment(matrix, graph.lexicographic())
    if len(canonical) == len(solved) and canonical.total_cost <= solved.total_cost:
        return canonical
    return solved


def brute_force_assignment(cost: np.ndarray) -> Assignment:
    """Exhaustive reference solver; ties go to the smallest sorted pair tuple."""
    matrix = _validate(cost)
    n, m = matrix.shape
    if n == 0 or m == 0:
        return Assignment(pairs=(), total_cost=0.0)
    best: Assignment | None = None
    if n <= m:
        candidates = (
            [(row, col) for row, col in enumerate(perm)]
            for perm in itertools.permutations(range(m), n)
        )
    else:
        candidates = (
            [(row, col) for col, row in enumerate(perm)]
            for perm in itertools.permutations(range(n), m)
        )
    for pairs in candidates:
        option = _assignment(matrix, pairs)
        if best is None or (option.total_cost, option.pairs) < (best.total_cost, best.pairs):
            best = option
    assert best is not None
    return best
