"""Chopping maps, value grids, chopped processes and their functionals.

For a family of grids the chopped process replaces ``t_i eps_i`` by
``sum_l phi(g_{l-1}, g_l, t_i) eps_{i,l}``.  Cells that no point of T enters
are constant and dropped; full cells lying strictly between two consecutive
values of ``t_i`` give identical columns and are merged into a single sign
sum whose multiplicity is the cell count.  This is exact and keeps fine grids
(j much larger than k) cheap.

All grid levels are dyadic rationals ``p * 2**(-e)`` built with ``ldexp`` so
cell widths and the ceiling ``p_k(x) = ceil(r**k x)`` are exact in binary
floating point (``r`` is a power of two).  A float ``x`` that is itself the
rounded result of some computation may still sit on the wrong side of a cell
boundary; only the inputs given are treated as exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import IndexSet, PointSet, SparseVector, matrix_diameter, pairwise_distances
from .errors import DomainError
from .supremum import (
    EXACT_LIMIT,
    SignProcess,
    SupEstimate,
    exact_expectation,
    mc_expectation,
)


def phi(u: float, v: float, x: float) -> float:
    """The chopping map: slope 1 on [u, v], constant outside, zero at 0."""
    if not u < v:
        raise DomainError("phi needs u < v")
    return min(v, max(x, u)) - min(v, max(0.0, u))


def phi_array(u: float, v: float, x) -> np.ndarray:
    if not u < v:
        raise DomainError("phi needs u < v")
    return np.minimum(v, np.maximum(np.asarray(x, dtype=float), u)) - min(v, max(0.0, u))


def kappa_of(r: int) -> int:
    """log2(r) for a power of two r >= 4."""
    r = int(r)
    if r < 4 or r & (r - 1):
        raise DomainError("r must be a power of two >= 4")
    return r.bit_length() - 1


def p_index(x: float, k: int, r: int) -> int:
    """p_k(x) = ceil(r^k x), so (p - 1) r^-k < x <= p r^-k."""
    return math.ceil(math.ldexp(x, kappa_of(r) * k))


def grid_range(x: float, k: int, j: int, r: int) -> tuple[int, int]:
    """Integer range [w, v] with G(x, k, j) = {p r^-j : w <= p <= v}."""
    if j < k:
        raise DomainError("grid needs j >= k")
    p = p_index(x, k, r)
    scale = r ** (j - k)
    return (p - 4) * scale, (p + 3) * scale


def grid_levels(x: float, k: int, j: int, r: int) -> list[float]:
    w, v = grid_range(x, k, j, r)
    e = kappa_of(r) * j
    return [math.ldexp(p, -e) for p in range(w, v + 1)]


@dataclass(frozen=True)
class FunctionalParams:
    """The quadruple (J, u, k, j) plus the scale base r."""

    J: IndexSet
    u: SparseVector
    k: int
    j: int
    r: int = 4

    def __post_init__(self):
        object.__setattr__(self, "J", self.J if isinstance(self.J, IndexSet) else IndexSet(tuple(self.J)))
        if self.j < self.k:
            raise DomainError("FunctionalParams needs j >= k")
        kappa_of(self.r)

    @property
    def kappa(self) -> int:
        return kappa_of(self.r)

    def replace(self, **changes) -> "FunctionalParams":
        d = dict(J=self.J, u=self.u, k=self.k, j=self.j, r=self.r)
        d.update(changes)
        return FunctionalParams(**d)


@dataclass(frozen=True)
class ChoppingGrid:
    """Explicit per-index grids G_i; each needs at least two increasing levels."""

    levels: Mapping[int, np.ndarray]
    r: int = 4
    _frozen: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for i, g in self.levels.items():
            g = np.asarray(g, dtype=float)
            if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
                raise DomainError(f"grid for index {i} must have >= 2 strictly increasing levels")
            clean[int(i)] = g
        object.__setattr__(self, "levels", dict(sorted(clean.items())))

    @classmethod
    def from_params(cls, params: FunctionalParams) -> "ChoppingGrid":
        return cls(
            {i: np.array(grid_levels(params.u[i], params.k, params.j, params.r)) for i in params.J},
            params.r,
        )

    @property
    def coordinates(self) -> list[tuple[int, int]]:
        """The Bernoulli variables eps_{i,p}, one per consecutive grid cell."""
        return [(i, p) for i, g in self.levels.items() for p in range(1, len(g))]


# --- column construction ---------------------------------------------------


def _empty(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros((n, 0)), np.zeros(0, dtype=np.int64)


def _arith_columns(y: np.ndarray, p_lo: int, p_hi: int, e: int) -> tuple[np.ndarray, np.ndarray]:
    """Columns for one index chopped on {p 2^-e : p_lo <= p <= p_hi}."""
    n = y.shape[0]
    lo, hi, h = math.ldexp(p_lo, -e), math.ldexp(p_hi, -e), math.ldexp(1.0, -e)
    y = np.clip(y, lo, hi)
    z = np.unique(y)
    if z.size < 2:
        return _empty(n)
    zs = np.ldexp(z, e)  # exact: lattice units
    cols, mult = [], []
    cells = np.floor(zs)
    partial = np.unique(cells[zs != cells]).astype(np.int64)
    for p in partial:
        a = math.ldexp(int(p), -e)
        cols.append(np.clip(y, a, a + h) - a)
        mult.append(1)
    full = np.floor(zs[1:]) - np.ceil(zs[:-1])
    for m in np.nonzero(full > 0)[0]:
        cols.append(h * (y >= z[m + 1]))
        mult.append(int(full[m]))
    return np.column_stack(cols), np.array(mult, dtype=np.int64)


def _level_columns(y: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Columns for one index chopped on an explicit sorted grid ``g``."""
    n = y.shape[0]
    y = np.clip(y, g[0], g[-1])
    z = np.unique(y)
    if z.size < 2:
        return _empty(n)
    cols, mult = [], []
    idx = np.searchsorted(g, z, side="right") - 1
    inside = (idx < g.size - 1) & (g[np.minimum(idx, g.size - 1)] < z)
    for c in np.unique(idx[inside]):
        a, b = g[c], g[c + 1]
        cols.append(np.clip(y, a, b) - a)
        mult.append(1)
    widths = np.diff(g)
    for m in range(z.size - 1):
        c_lo = np.searchsorted(g, z[m], side="left")
        c_hi = np.searchsorted(g, z[m + 1], side="right") - 1
        if c_hi <= c_lo:
            continue
        w_vals, counts = np.unique(widths[c_lo:c_hi], return_counts=True)
        for w, q in zip(w_vals, counts):
            cols.append(w * (y >= z[m + 1]))
            mult.append(int(q))
    if not cols:
        return _empty(n)
    return np.column_stack(cols), np.array(mult, dtype=np.int64)


def _assemble(parts: list[tuple[np.ndarray, np.ndarray]], n: int) -> SignProcess:
    parts = [p for p in parts if p[1].size]
    if not parts:
        return SignProcess(np.zeros((n, 0)), np.zeros(0, dtype=np.int64))
    return SignProcess(np.hstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def chopped_process_matrix(X: np.ndarray, ambient: IndexSet, params: FunctionalParams) -> SignProcess:
    """The process X_t(J, u, k, j) for the rows of ``X`` (columns follow ``ambient``)."""
    X = np.atleast_2d(X)
    e = params.kappa * params.j
    parts = []
    for i in params.J:
        w, v = grid_range(params.u[i], params.k, params.j, params.r)
        y = X[:, ambient.position(i)] if i in ambient else np.zeros(X.shape[0])
        parts.append(_arith_columns(y, w, v, e))
    return _assemble(parts, X.shape[0])


def chopped_process(T: PointSet, params: FunctionalParams) -> SignProcess:
    return chopped_process_matrix(T.matrix, T.ambient, params)


def grid_process_matrix(X: np.ndarray, ambient: IndexSet, grid: ChoppingGrid) -> SignProcess:
    """The process X_t(G) for an explicit grid family."""
    X = np.atleast_2d(X)
    parts = []
    for i, g in grid.levels.items():
        y = X[:, ambient.position(i)] if i in ambient else np.zeros(X.shape[0])
        parts.append(_level_columns(y, g))
    return _assemble(parts, X.shape[0])


def refined_process_matrix(
    X: np.ndarray,
    ambient: IndexSet,
    params: FunctionalParams,
    Jp: Iterable[int],
    up: SparseVector,
) -> SignProcess:
    """Process on G_i = G(u_i, k, j) refined by G(u'_i, j+1, j+1) for i in Jp.

    Only the part of each grid that the values of X reach is materialized.
    """
    X = np.atleast_2d(X)
    r, k, j = params.r, params.k, params.j
    e = params.kappa * j
    Jp = set(Jp)
    parts = []
    for i in params.J:
        y = X[:, ambient.position(i)] if i in ambient else np.zeros(X.shape[0])
        w, v = grid_range(params.u[i], k, j, r)
        if i not in Jp:
            parts.append(_arith_columns(y, w, v, e))
            continue
        lo, hi = math.ldexp(w, -e), math.ldexp(v, -e)
        yc = np.clip(y, lo, hi)
        a = max(w, math.floor(math.ldexp(float(yc.min()), e)))
        b = min(v, math.ceil(math.ldexp(float(yc.max()), e)))
        coarse = np.ldexp(np.arange(a, b + 1, dtype=float), -e)
        fine = np.array(grid_levels(up[i], j + 1, j + 1, r))
        fine = fine[(fine >= coarse[0]) & (fine <= coarse[-1])]
        g = np.union1d(coarse, fine)
        if g.size < 2:
            continue
        parts.append(_level_columns(yc, g))
    return _assemble(parts, X.shape[0])


# --- functionals and distances ---------------------------------------------


def process_distances(proc: SignProcess) -> np.ndarray:
    """Canonical distances (E (X_s - X_t)^2)^(1/2) between all pairs of points."""
    return pairwise_distances(proc.columns, proc.variances())


def process_diameter(proc: SignProcess) -> float:
    return matrix_diameter(proc.columns, proc.variances())


def functional_diameter(T: PointSet, params: FunctionalParams) -> float:
    """Delta(T, J, u, k, j)."""
    return process_diameter(chopped_process(T, params))


def chopped_distance(s: SparseVector, t: SparseVector, params: FunctionalParams) -> float:
    """d(J, u, k, j)(s, t)."""
    amb = IndexSet(tuple(params.J))
    X = np.vstack([_dense(s, amb), _dense(t, amb)])
    proc = chopped_process_matrix(X, amb, params)
    return float(process_distances(proc)[0, 1])


def _dense(v: SparseVector, amb: IndexSet) -> np.ndarray:
    return np.array([v[i] for i in amb], dtype=float)


def functional_value(
    proc: SignProcess,
    mode: str = "auto",
    samples: int = 20_000,
    seed: int = 0,
    exact_limit: int = EXACT_LIMIT,
) -> SupEstimate:
    """E sup of a (chopped) process, exactly or by Monte Carlo."""
    proc = proc.compress()
    if mode not in ("auto", "exact", "mc"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "exact" or (mode == "auto" and proc.effective_coordinates <= exact_limit):
        return SupEstimate(exact_expectation(proc, exact_limit=exact_limit), "exact", 0, 0.0, None)
    mean, err = mc_expectation(proc, samples, seed)
    return SupEstimate(mean, "monte-carlo", samples, err, seed)


def chopped_sup(
    T: PointSet,
    params: FunctionalParams,
    mode: str = "exact",
    samples: int = 20_000,
    seed: int = 0,
    exact_limit: int = EXACT_LIMIT,
) -> SupEstimate:
    """F(T, J, u, k, j) = E sup_t X_t(J, u, k, j)."""
    return functional_value(chopped_process(T, params), mode, samples, seed, exact_limit)


def grid_sup(T: PointSet, grid: ChoppingGrid, exact_limit: int = EXACT_LIMIT) -> float:
    """E sup_t X_t(G) for an explicit grid family, exactly."""
    proc = grid_process_matrix(T.matrix, T.ambient, grid).compress()
    return exact_expectation(proc, exact_limit=exact_limit)


def grid_distance(s: SparseVector, t: SparseVector, grid: ChoppingGrid) -> float:
    amb = IndexSet(tuple(grid.levels))
    proc = grid_process_matrix(np.vstack([_dense(s, amb), _dense(t, amb)]), amb, grid)
    return float(process_distances(proc)[0, 1])


def chopped_distance_lower_bound(s: SparseVector, t: SparseVector, params: FunctionalParams) -> float:
    """(1/2) sum_{i in J} min(|s_i - t_i|^2, r^-2j) 1{|s_i - u_i| <= 2 r^-k}.

    A lower bound for d(J, u, k, j)(t, s)^2.
    """
    r, k, j = params.r, params.k, params.j
    kap = params.kappa
    cap = math.ldexp(1.0, -2 * kap * j)
    near = math.ldexp(2.0, -kap * k)
    total = 0.0
    for i in params.J:
        if abs(s[i] - params.u[i]) <= near:
            total += min((s[i] - t[i]) ** 2, cap)
    return 0.5 * total
