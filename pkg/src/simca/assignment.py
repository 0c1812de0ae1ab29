"""Exact capacity-constrained linear assignment.

Each item j absorbs at most caps[j] users; the solver maximizes the total
score of a hard user->item matching. Items are expanded into caps[j]
unit-capacity slots, turning the problem into a rectangular n x s(caps)
assignment solved by shortest augmenting paths. Slots are ordered by item
index, so tie-breaking is deterministic and, on fully tied inputs, yields the
lexicographically smallest assignment vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import as_matrix

# enumeration guard for the brute-force oracle
MAX_BRUTE_FORCE_MATCHINGS = 10**7


@dataclass(frozen=True)
class LapSolution:
    """Optimal hard matching and its total score."""

    matching: np.ndarray
    objective: float


def _check_instance(scores, caps):
    M = as_matrix(scores, "scores")
    raw = np.asarray(caps)
    if not np.issubdtype(raw.dtype, np.integer) and np.any(raw != np.round(raw)):
        raise ValueError("capacities must be integers")
    caps = raw.astype(np.int64)
    if caps.ndim != 1 or len(caps) != M.shape[1]:
        raise ValueError(f"capacities length {caps.shape} does not match {M.shape[1]} items")
    if np.any(caps < 0):
        raise ValueError("capacities must be nonnegative")
    if int(caps.sum()) < M.shape[0]:
        raise ValueError(
            f"infeasible: total capacity {int(caps.sum())} < {M.shape[0]} users"
        )
    return M, caps


def solve_lap(scores, caps) -> LapSolution:
    """Maximize sum_i scores[i, sigma(i)] over matchings with per-item counts <= caps.

    When total capacity equals the number of users every capacity is used
    exactly; otherwise the surplus slots stay empty. Optimality is exact.
    """
    M, caps = _check_instance(scores, caps)
    n = M.shape[0]
    slot_item = np.repeat(np.arange(len(caps)), caps)
    # maximization via negated costs on the slot-expanded rectangle
    rows, cols = linear_sum_assignment(-M[:, slot_item])
    assign = np.empty(n, dtype=np.int64)
    assign[rows] = slot_item[cols]
    objective = float(M[np.arange(n), assign].sum())
    return LapSolution(matching=assign, objective=objective)


def count_feasible_matchings(n: int, caps) -> int:
    """Number of assignment vectors of n users respecting the capacities."""
    caps = np.asarray(caps, dtype=np.int64)
    # ways[t] = matchings of t users onto items processed so far
    ways = [0] * (n + 1)
    ways[0] = 1
    for c in caps:
        nxt = [0] * (n + 1)
        for t in range(n + 1):
            if ways[t] == 0:
                continue
            for k in range(0, min(int(c), n - t) + 1):
                nxt[t + k] += ways[t] * math.comb(n - t, k)
        ways = nxt
    return ways[n]


def brute_force_lap(scores, caps) -> LapSolution:
    """Exhaustive-enumeration optimum; ties go to the lexicographically
    smallest assignment vector. Guarded against instances with more than
    ``MAX_BRUTE_FORCE_MATCHINGS`` feasible matchings."""
    M, caps = _check_instance(scores, caps)
    n, m = M.shape
    total = count_feasible_matchings(n, caps)
    if total > MAX_BRUTE_FORCE_MATCHINGS:
        raise ValueError(
            f"instance too large for brute force: {total} feasible matchings"
        )

    best_obj = -math.inf
    best = None
    assign = np.zeros(n, dtype=np.int64)
    remaining = caps.copy()

    def recurse(i: int, acc: float):
        nonlocal best_obj, best
        if i == n:
            # strict improvement keeps the first (lexicographically smallest) optimum
            if acc > best_obj:
                best_obj = acc
                best = assign.copy()
            return
        for j in range(m):
            if remaining[j] == 0:
                continue
            assign[i] = j
            remaining[j] -= 1
            recurse(i + 1, acc + M[i, j])
            remaining[j] += 1

    recurse(0, 0.0)
    assert best is not None
    return LapSolution(matching=best, objective=float(best_obj))


def round_coupling(coupling, caps) -> np.ndarray:
    """Hard matching recovered from a transport plan: the LAP on its entries."""
    return solve_lap(coupling, caps).matching
