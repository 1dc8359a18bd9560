"""Greedy admissible sequences and the chaining bounds built from them.

Level n of an admissible sequence may hold at most N_n = 2^(2^n) blocks.  The
greedy builder splits every block of level n-1 into at most N_{n-1} clusters
by farthest-point traversal, so the level count stays within
N_{n-1} * N_{n-1} = N_n.  Nothing here is optimal; everything is an upper
bound on the corresponding functional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import PointSet, SparseVector, l2_distance, linf_distance, pairwise_distances
from .errors import DomainError


def N(n: int) -> int:
    """N_n = 2^(2^n)."""
    return 2 ** (2**n)


def capped_N(n: int, cap: int) -> int:
    """min(N_n, cap) without forming huge integers."""
    if n >= 6:
        return cap
    return min(N(n), cap)


Metric = Callable[[SparseVector, SparseVector], float] | str


def distance_matrix(T: PointSet, metric: Metric = "l2") -> np.ndarray:
    """Pairwise distances; ``"l2"``/``"linf"`` (or the core functions) are vectorized."""
    if metric in ("l2", l2_distance):
        return pairwise_distances(T.matrix)
    if metric in ("linf", linf_distance):
        return pairwise_distances(T.matrix, p=math.inf)
    if isinstance(metric, str):
        raise DomainError(f"unknown metric {metric!r}")
    n = len(T)
    D = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            D[a, b] = D[b, a] = metric(T[a], T[b])
    return D


def farthest_point_centers(D: np.ndarray, rows: Sequence[int], k: int) -> list[int]:
    """Up to ``k`` centers among ``rows``: start at the first row, then repeatedly
    take the row farthest from the chosen centers (ties by order).  Stops early
    once every row is at distance zero from a center."""
    rows = list(rows)
    centers = [rows[0]]
    near = D[rows[0], rows].copy()
    while len(centers) < k:
        pos = int(np.argmax(near))
        if near[pos] <= 0.0:
            break
        centers.append(rows[pos])
        near = np.minimum(near, D[rows[pos], rows])
    return centers


def assign_to_centers(D: np.ndarray, rows: Sequence[int], centers: Sequence[int]) -> list[list[int]]:
    """Clusters of ``rows`` around ``centers`` (nearest center, ties by center order)."""
    rows = list(rows)
    owner = np.argmin(D[np.ix_(list(centers), rows)], axis=0)
    return [[r for r, o in zip(rows, owner) if o == c] for c in range(len(centers))]


def covering_radius(D: np.ndarray, rows: Sequence[int], centers: Sequence[int]) -> float:
    if not centers:
        return math.inf
    return float(D[np.ix_(list(centers), list(rows))].min(axis=0).max())


@dataclass(frozen=True)
class AdmissibleSequence:
    """Partitions of a point set, level by level; blocks hold row indices."""

    levels: tuple[tuple[tuple[int, ...], ...], ...]
    ids: tuple[str, ...]

    def to_ids(self) -> list[list[list[str]]]:
        return [[[self.ids[r] for r in block] for block in level] for level in self.levels]

    def block_of(self, n: int, row: int) -> tuple[int, ...]:
        for block in self.levels[n]:
            if row in block:
                return block
        raise KeyError(row)


def check_admissible(seq: AdmissibleSequence) -> list[str]:
    """Problems with level 0, nesting or the N_n cardinality bound (empty if none)."""
    problems = []
    everything = set(range(len(seq.ids)))
    if not seq.levels or [set(b) for b in seq.levels[0]] != [everything]:
        problems.append("level 0 is not {T}")
    for n, level in enumerate(seq.levels):
        seen: list[int] = [r for b in level for r in b]
        if sorted(seen) != sorted(everything) or len(seen) != len(set(seen)):
            problems.append(f"level {n} is not a partition")
        if any(len(b) == 0 for b in level):
            problems.append(f"level {n} has an empty block")
        if len(level) > capped_N(n, len(everything) + 1) and n > 0:
            problems.append(f"level {n} has {len(level)} > N_{n} blocks")
        if n > 0:
            parent = {r: k for k, b in enumerate(seq.levels[n - 1]) for r in b}
            for b in level:
                if len({parent[r] for r in b}) != 1:
                    problems.append(f"level {n} does not refine level {n - 1}")
                    break
    return problems


def greedy_levels(D: np.ndarray, depth: int) -> list[list[list[int]]]:
    n_pts = D.shape[0]
    levels = [[list(range(n_pts))]]
    for n in range(1, depth + 1):
        split = capped_N(n - 1, n_pts)
        nxt = []
        for block in levels[-1]:
            if len(block) == 1:
                nxt.append(block)
                continue
            centers = farthest_point_centers(D, block, min(len(block), split))
            nxt.extend(c for c in assign_to_centers(D, block, centers) if c)
        levels.append(nxt)
    return levels


def _chain_values(D: np.ndarray, levels, alpha: float) -> np.ndarray:
    """Per level, per point: 2^(n/alpha) * diameter of the block holding the point."""
    n_pts = D.shape[0]
    out = np.zeros((len(levels), n_pts))
    for n, level in enumerate(levels):
        w = 2.0 ** (n / alpha)
        for block in level:
            diam = float(D[np.ix_(block, block)].max()) if len(block) > 1 else 0.0
            out[n, block] = w * diam
    return out


@dataclass(frozen=True)
class GammaResult:
    value: float
    sequence: AdmissibleSequence
    complete: bool  # False when no level up to ``depth`` could be made all singletons


def gamma_alpha_upper(T: PointSet, metric: Metric = "l2", alpha: float = 2.0, depth: int = 4) -> GammaResult:
    """Upper bound on gamma_alpha(T, d) from a greedy admissible sequence.

    For every cut c <= depth with |T| <= N_c the greedy levels below c followed
    by singletons form an admissible sequence; the best such cut is returned,
    so the value never increases with ``depth``.  If no cut is available the
    truncated sum up to ``depth`` is returned with ``complete=False``.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if depth < 1:
        raise DomainError("depth must be >= 1")
    D = distance_matrix(T, metric)
    n_pts = len(T)
    levels = greedy_levels(D, depth)
    terms = _chain_values(D, levels, alpha)
    singles = [[r] for r in range(n_pts)]
    best, best_cut = math.inf, None
    for c in range(1, depth + 1):
        if capped_N(c, n_pts) < n_pts:
            continue
        val = float(terms[:c].sum(axis=0).max())
        if val < best:
            best, best_cut = val, c
    if best_cut is None:
        value = float(terms.sum(axis=0).max())
        final = levels
        complete = False
    else:
        value = best
        final = levels[:best_cut] + [singles] * (depth + 1 - best_cut)
        complete = True
    seq = AdmissibleSequence(tuple(tuple(tuple(b) for b in lvl) for lvl in final), tuple(T.ids))
    return GammaResult(value, seq, complete)


def entropy_numbers(T: PointSet, metric: Metric = "l2", max_level: int = 16) -> list[float]:
    """Greedy covering radii e_n with centers in T: one center at n = 0, N_n after."""
    D = distance_matrix(T, metric)
    rows = list(range(len(T)))
    out = []
    for n in range(max_level + 1):
        k = 1 if n == 0 else capped_N(n, len(rows))
        e = covering_radius(D, rows, farthest_point_centers(D, rows, k))
        out.append(e)
        if e == 0.0:
            break
    return out


def dudley_bound(T: PointSet, metric: Metric = "l2") -> float:
    """sum_n 2^(n/2) e_n with greedy k-center covering radii."""
    return float(sum(2.0 ** (n / 2) * e for n, e in enumerate(entropy_numbers(T, metric))))


def sudakov_minoration_value(m: int, a: float, b: float) -> float:
    """min(a sqrt(log m), a^2 / b), before division by any universal constant."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if not (a > 0 and b > 0):
        raise DomainError("a and b must be positive")
    return min(a * math.sqrt(math.log(m)), a * a / b)
