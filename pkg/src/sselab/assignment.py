"""Unbalanced min-cost assignment: shortest augmenting paths plus lexicographic ties.

The solver works directly on rectangular matrices (no dummy padding). The
primal/dual pair it maintains lets us characterize *all* optimal assignments
afterwards: an assignment is optimal iff it uses only zero-reduced-cost edges
and covers every column whose dual is strictly negative. Among those we return
the lexicographically smallest row-to-column vector, so solutions are stable
across platforms and runs.
"""

from __future__ import annotations

import numpy as np


def _solve_rows(costs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assign every row of an (nr x nc) matrix, nr <= nc, minimizing total cost.

    Returns (col4row, u, v) where u, v are feasible duals with v <= 0 and
    reduced costs >= 0 up to rounding.
    """
    nr, nc = costs.shape
    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1, dtype=np.intp)
    row4col = np.full(nc, -1, dtype=np.intp)

    for cur_row in range(nr):
        shortest = np.full(nc, np.inf)
        path = np.full(nc, -1, dtype=np.intp)
        done = np.zeros(nc, dtype=bool)
        visited_rows = [cur_row]
        min_val = 0.0
        i = cur_row
        while True:
            cand = min_val + costs[i] - u[i] - v
            upd = ~done & (cand < shortest)
            shortest[upd] = cand[upd]
            path[upd] = i
            masked = np.where(done, np.inf, shortest)
            j = int(np.argmin(masked))  # first argmin: smallest column index on ties
            min_val = float(masked[j])
            done[j] = True
            if row4col[j] < 0:
                sink = j
                break
            i = int(row4col[j])
            visited_rows.append(i)

        u[cur_row] += min_val
        for r in visited_rows[1:]:
            u[r] += min_val - shortest[col4row[r]]
        v[done] -= min_val - shortest[done]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    return col4row, u, v


def _kuhn_saturates(targets: list[int], adjacency: list[np.ndarray], allowed: np.ndarray) -> bool:
    """True iff every target (left vertex) can be matched to a distinct allowed
    right vertex along the given adjacency lists."""
    match_right: dict[int, int] = {}
    match_left: dict[int, int] = {}
    for t0 in targets:
        parent: dict[int, int] = {}
        visited: set[int] = set()
        frontier = [t0]
        free_right = -1
        while frontier and free_right < 0:
            nxt = []
            for left in frontier:
                for right in adjacency[left]:
                    right = int(right)
                    if not allowed[right] or right in visited:
                        continue
                    visited.add(right)
                    parent[right] = left
                    if right not in match_right:
                        free_right = right
                        break
                    nxt.append(match_right[right])
                if free_right >= 0:
                    break
            frontier = nxt
        if free_right < 0:
            return False
        right = free_right
        while True:
            left = parent[right]
            previous = match_left.get(left)
            match_right[right] = left
            match_left[left] = right
            if previous is None:
                break
            right = previous
    return True


def _lex_min_optimal(
    costs: np.ndarray, col4row: np.ndarray, u: np.ndarray, v: np.ndarray, tol: float
) -> np.ndarray:
    """Lexicographically smallest row-to-column vector among optimal assignments."""
    nr, nc = costs.shape
    reduced = costs - u[:, None] - v[None, :]
    tight = reduced <= tol
    if not (tight.sum(axis=1) > 1).any():
        return col4row  # unique tight candidate per row, nothing to break

    forced = np.flatnonzero(v < -tol)  # columns every optimal assignment must use
    row_adj = [np.flatnonzero(tight[r]) for r in range(nr)]
    col_adj = [np.flatnonzero(tight[:, c]) for c in range(nc)]

    locked_col = np.zeros(nc, dtype=bool)
    row_allowed = np.ones(nr, dtype=bool)
    result = np.full(nr, -1, dtype=np.intp)
    for row in range(nr):
        row_allowed[row] = False
        remaining_rows = list(range(row + 1, nr))
        fixed = False
        for cand in row_adj[row]:
            cand = int(cand)
            if locked_col[cand]:
                continue
            locked_col[cand] = True
            # Mendelsohn-Dulmage: a completion saturating both the remaining
            # rows and the forced columns exists iff each side is saturable.
            rows_ok = _kuhn_saturates(remaining_rows, row_adj, ~locked_col)
            forced_left = [int(c) for c in forced if not locked_col[c]]
            cols_ok = _kuhn_saturates(forced_left, col_adj, row_allowed)
            if rows_ok and cols_ok:
                result[row] = cand
                fixed = True
                break
            locked_col[cand] = False
        if not fixed:
            return col4row  # tolerance artifact; keep the solver's assignment
    return result


def solve_rectangular_assignment(costs: np.ndarray) -> np.ndarray:
    """Minimum-cost injective assignment of all rows of an (nr x nc) matrix, nr <= nc.

    Ties between optimal assignments are broken toward the lexicographically
    smallest assignment vector.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    nr, nc = costs.shape
    if nr == 0:
        return np.empty(0, dtype=np.intp)
    if nr > nc:
        raise ValueError(f"need at least as many columns as rows, got {nr}x{nc}")
    if not np.isfinite(costs).all():
        raise ValueError("cost matrix contains non-finite entries")
    col4row, u, v = _solve_rows(costs)
    tol = 1e-10 * max(1.0, float(np.abs(costs).max()))
    return _lex_min_optimal(costs, col4row, u, v, tol)
