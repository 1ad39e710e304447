"""Optimal bipartite matching over similarity matrices.

`hungarian_max` maximizes total similarity over one-to-one assignments of a
rectangular matrix (rows = detections, cols = tracks); `brute_force_max` is
the exhaustive oracle with the identical contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import TooLarge

NEG_INF = float("-inf")


@dataclass
class Matching:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)

    def total(self, matrix) -> float:
        m = np.asarray(matrix, dtype=float)
        return float(sum(m[r, c] for r, c in self.pairs))


def _finish(pairs, n_rows, n_cols, matrix, floor) -> Matching:
    kept = [(r, c) for r, c in sorted(pairs) if matrix[r, c] > floor]
    used_r = {r for r, _ in kept}
    used_c = {c for _, c in kept}
    return Matching(
        pairs=kept,
        unmatched_rows=[r for r in range(n_rows) if r not in used_r],
        unmatched_cols=[c for c in range(n_cols) if c not in used_c],
    )


def hungarian_max(matrix, floor: float = NEG_INF) -> Matching:
    """Max-similarity assignment of min(rows, cols) pairs, then drop any
    pair with similarity <= floor. Empty matrices yield an all-unmatched
    result rather than an error."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {m.shape}")
    n_rows, n_cols = m.shape
    if n_rows == 0 or n_cols == 0:
        return Matching(pairs=[],
                        unmatched_rows=list(range(n_rows)),
                        unmatched_cols=list(range(n_cols)))
    rows, cols = linear_sum_assignment(m, maximize=True)
    return _finish(list(zip(rows.tolist(), cols.tolist())), n_rows, n_cols, m, floor)


def brute_force_max(matrix, floor: float = NEG_INF) -> Matching:
    """Exhaustive oracle over all injections of the smaller side.

    Candidates are enumerated in lexicographic pair order and a strictly
    greater total is required to displace the incumbent, so ties resolve to
    the lexicographically smallest assignment."""
    m = np.asarray(matrix, dtype=float)
    n_rows, n_cols = m.shape
    if n_rows == 0 or n_cols == 0:
        return Matching(pairs=[],
                        unmatched_rows=list(range(n_rows)),
                        unmatched_cols=list(range(n_cols)))
    if min(n_rows, n_cols) > 8:
        raise TooLarge(f"brute force limited to min dimension 8, got {min(n_rows, n_cols)}")

    k = min(n_rows, n_cols)
    best_total = -math.inf
    best_pairs: list[tuple[int, int]] | None = None
    if n_rows <= n_cols:
        row_sets = [tuple(range(n_rows))]
    else:
        from itertools import combinations
        row_sets = list(combinations(range(n_rows), k))
    for rows in row_sets:
        for cols in permutations(range(n_cols), k):
            pairs = list(zip(rows, cols))
            total = float(sum(m[r, c] for r, c in pairs))
            if total > best_total or (total == best_total and pairs < best_pairs):
                best_total = total
                best_pairs = pairs
    assert best_pairs is not None
    return _finish(best_pairs, n_rows, n_cols, m, floor)
