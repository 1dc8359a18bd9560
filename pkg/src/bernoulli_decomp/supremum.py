"""Exact and Monte-Carlo expected suprema of Bernoulli-type processes.

Every process handled here has the form ``X_t = sum_k c_k(t) * S_k`` where the
``S_k`` are independent sums of ``q_k`` Rademacher signs (``q_k = 1`` is a
plain Bernoulli coordinate).  Grouping identical coordinates into one ``S_k``
with multiplicity ``q_k`` leaves the law of the process unchanged and keeps
exact enumeration small: the number of joint values is ``prod(q_k + 1)``
instead of ``2 ** sum(q_k)``.  The *effective coordinate count* is the base-2
logarithm of that product; it is what the exact limit is compared against.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import rng as rngmod
from .core import PointSet, SparseVector
from .errors import DomainError, ExactLimitExceeded

EXACT_LIMIT = 22
_LOW_ROWS = 1 << 12
_BLOCK_BUDGET = 1 << 21


@dataclass(frozen=True)
class SupEstimate:
    value: float
    method: str
    samples: int
    stderr: float
    seed: int | None = None

    def __post_init__(self):
        if self.method not in ("exact", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "exact" and self.stderr != 0.0:
            raise ValueError("exact estimates carry zero stderr")
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SupEstimate":
        return cls(**d)


@dataclass(frozen=True)
class SignProcess:
    """Coefficient columns (points x coordinates) and per-coordinate multiplicities."""

    columns: np.ndarray
    mult: np.ndarray

    @classmethod
    def plain(cls, columns) -> "SignProcess":
        columns = np.atleast_2d(np.asarray(columns, dtype=float))
        return cls(columns, np.ones(columns.shape[1], dtype=np.int64))

    @property
    def n_points(self) -> int:
        return self.columns.shape[0]

    @property
    def effective_coordinates(self) -> float:
        return float(np.sum(np.log2(self.mult + 1.0)))

    def variances(self) -> np.ndarray:
        return self.mult.astype(float)

    def compress(self, center: bool = True) -> "SignProcess":
        """Drop coordinates that cannot affect the supremum and merge duplicates.

        With ``center`` each column is shifted by its value at the first point;
        a shift common to all points adds a mean-zero term to the supremum and
        is dropped.  Columns equal up to sign are merged (signs are symmetric).
        """
        cols = self.columns
        mult = self.mult
        if cols.shape[1] == 0:
            return self
        if center:
            cols = cols - cols[0:1, :]
        keep = np.any(cols != 0.0, axis=0)
        cols, mult = cols[:, keep], mult[keep]
        if cols.shape[1] == 0:
            return SignProcess(np.zeros((self.n_points, 0)), np.zeros(0, dtype=np.int64))
        # canonical sign: first non-zero entry positive
        first = np.argmax(cols != 0.0, axis=0)
        sign = np.sign(cols[first, np.arange(cols.shape[1])])
        cols = cols * sign
        uniq, inverse = np.unique(cols, axis=1, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        merged = np.bincount(inverse, weights=mult, minlength=uniq.shape[1]).astype(np.int64)
        return SignProcess(np.ascontiguousarray(uniq), merged)


def bernoulli_process(T: PointSet, J: Iterable[int] | None = None) -> SignProcess:
    """The process t -> sum_{i in J} t_i eps_i as a :class:`SignProcess`."""
    return SignProcess.plain(T.columns(J))


# --- exact enumeration -----------------------------------------------------


def _support(q: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(q + 1)
    values = (q - 2 * m).astype(float)
    weights = np.array([math.comb(q, int(k)) for k in m], dtype=float) / 2.0**q
    return values, weights


def _value_table(cols: np.ndarray, mult: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    S = np.zeros((1, n))
    W = np.ones(1)
    for c, q in zip(cols.T, mult):
        v, w = _support(int(q))
        S = (S[:, None, :] + v[None, :, None] * c[None, None, :]).reshape(-1, n)
        W = (W[:, None] * w[None, :]).reshape(-1)
    return S, W


def _reduce_sup(block: np.ndarray) -> np.ndarray:
    return block.max(axis=-1)


def exact_expectation(
    process: SignProcess,
    reducer: Callable[[np.ndarray], np.ndarray] = _reduce_sup,
    exact_limit: int = EXACT_LIMIT,
) -> float:
    """E[reducer(X)] by enumerating every joint value of the sign sums.

    The coordinates are split into a low block, tabulated once, and a high
    block whose rows are streamed in fixed-size chunks; each chunk costs
    O(|T|) per pattern.  Chunk contributions are summed in chunk order, so the
    result does not depend on how the work is scheduled.
    """
    eff = process.effective_coordinates
    if eff > exact_limit + 1e-9:
        raise ExactLimitExceeded(eff, exact_limit)
    n = process.n_points
    cols, mult = process.columns, process.mult
    if cols.shape[1] == 0:
        return float(reducer(np.zeros((1, 1, n)))[0, 0])
    order = np.argsort(mult, kind="stable")
    cols, mult = cols[:, order], mult[order]
    rows, split = 1, 0
    while split < len(mult) and rows * (mult[split] + 1) <= _LOW_ROWS:
        rows *= int(mult[split]) + 1
        split += 1
    split = max(split, 1)
    S_low, W_low = _value_table(cols[:, :split], mult[:split], n)
    S_high, W_high = _value_table(cols[:, split:], mult[split:], n)
    chunk = max(1, _BLOCK_BUDGET // (S_low.shape[0] * n))
    total = 0.0
    for start in range(0, S_high.shape[0], chunk):
        stop = start + chunk
        block = S_low[None, :, :] + S_high[start:stop, None, :]
        vals = reducer(block)
        total += float(W_high[start:stop] @ (vals @ W_low))
    return total


# --- Monte Carlo -----------------------------------------------------------


def _draw_sign_sums(gen: np.random.Generator, mult: np.ndarray, size: int) -> np.ndarray:
    if np.all(mult == 1):
        return gen.integers(0, 2, size=(size, len(mult))).astype(float) * 2.0 - 1.0
    return 2.0 * gen.binomial(mult, 0.5, size=(size, len(mult))) - mult


def _mc(sampler: Callable[[np.random.Generator, int], np.ndarray], samples: int, seed: int, chunk: int):
    if samples < 1:
        raise DomainError("samples must be >= 1")
    values = [sampler(rngmod.stream(seed, c), size) for c, size in enumerate(rngmod.chunk_sizes(samples, chunk))]
    vals = np.concatenate(values)
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return mean, stderr


def mc_expectation(
    process: SignProcess,
    samples: int,
    seed: int,
    reducer: Callable[[np.ndarray], np.ndarray] = _reduce_sup,
    chunk: int = 4096,
) -> tuple[float, float]:
    """Sample mean and standard error of reducer(X) over i.i.d. sign draws."""
    cols, mult = process.columns, process.mult

    def sampler(gen, size):
        if cols.shape[1] == 0:
            return reducer(np.zeros((size, process.n_points)))
        draws = _draw_sign_sums(gen, mult, size)
        return reducer(draws @ cols.T)

    return _mc(sampler, samples, seed, chunk)


# --- public estimators -----------------------------------------------------


def bernoulli_sup_exact(T: PointSet, J: Iterable[int] | None = None, exact_limit: int = EXACT_LIMIT) -> SupEstimate:
    """b_J(T) = E sup_t sum_{i in J} t_i eps_i by exhaustive enumeration."""
    proc = bernoulli_process(T, J).compress()
    return SupEstimate(exact_expectation(proc, exact_limit=exact_limit), "exact", 0, 0.0, None)


def bernoulli_sup_mc(T: PointSet, J: Iterable[int] | None = None, samples: int = 100_000, seed: int = 0) -> SupEstimate:
    # no centering: it preserves the mean but can turn a constant sup into a random one
    proc = bernoulli_process(T, J).compress(center=False)
    mean, err = mc_expectation(proc, samples, seed)
    return SupEstimate(mean, "monte-carlo", samples, err, seed)


def bernoulli_sup(T: PointSet, J=None, exact_limit: int = EXACT_LIMIT, samples: int = 100_000, seed: int = 0) -> SupEstimate:
    """Exact when the effective coordinate count allows it, Monte Carlo otherwise."""
    proc = bernoulli_process(T, J).compress()
    if proc.effective_coordinates <= exact_limit:
        return SupEstimate(exact_expectation(proc, exact_limit=exact_limit), "exact", 0, 0.0, None)
    mean, err = mc_expectation(bernoulli_process(T, J).compress(center=False), samples, seed)
    return SupEstimate(mean, "monte-carlo", samples, err, seed)


def gaussian_sup_mc(T: PointSet, samples: int = 100_000, seed: int = 0) -> SupEstimate:
    """g(T) = E sup_t sum_i t_i g_i with standard normal g_i."""
    X = T.matrix
    X = X[:, np.any(X != 0.0, axis=0)]

    def sampler(gen, size):
        if X.shape[1] == 0:
            return np.zeros(size)
        return (gen.standard_normal((size, X.shape[1])) @ X.T).max(axis=1)

    mean, err = _mc(sampler, samples, seed, 4096)
    return SupEstimate(mean, "monte-carlo", samples, err, seed)


def selector_sup_mc(T: PointSet, delta: float, samples: int = 100_000, seed: int = 0) -> SupEstimate:
    """delta(T) = E sup_t |sum_i t_i (delta_i - delta)| with Bernoulli(delta) selectors."""
    if not 0.0 < delta <= 0.5:
        raise DomainError("delta must lie in (0, 1/2]")
    X = T.matrix
    X = X[:, np.any(X != 0.0, axis=0)]

    def sampler(gen, size):
        if X.shape[1] == 0:
            return np.zeros(size)
        sel = (gen.random((size, X.shape[1])) < delta).astype(float) - delta
        return np.abs(sel @ X.T).max(axis=1)

    mean, err = _mc(sampler, samples, seed, 4096)
    return SupEstimate(mean, "monte-carlo", samples, err, seed)


def process_moment_norm(t: SparseVector, p: float, exact_limit: int = EXACT_LIMIT) -> float:
    """||X_t||_p = (E |sum_i t_i eps_i|^p)^(1/p), exactly."""
    if not p > 0:
        raise DomainError("p must be positive")
    if not t.entries:
        return 0.0
    proc = SignProcess.plain(np.fromiter(t.entries.values(), float)[None, :]).compress(center=False)

    def reducer(block):
        return np.abs(block[..., 0]) ** p

    return exact_expectation(proc, reducer, exact_limit) ** (1.0 / p)


def hull_moment_bound(representatives: Sequence[SparseVector], exact_limit: int = EXACT_LIMIT) -> float:
    """max_n ||X_{t^n}||_{log(n+2)} over hull representatives t^1, t^2, ..."""
    return max(
        (process_moment_norm(t, math.log(n + 2), exact_limit) for n, t in enumerate(representatives, 1)),
        default=0.0,
    )


def converse_convex_hull_bound(moment_bound: float, truncation: int) -> float:
    """Upper bound on E sup over T - T from a convex-hull moment representation.

    With M = ``moment_bound`` and P(sup >= uM) <= min(1, sum_{n<=N} u^(-log(n+2)))
    the tail integral equals M (u0 + sum_n u0^(1 - a_n) / (a_n - 1)), where
    a_n = log(n + 2) > 1 and u0 >= 1 is where the union bound crosses 1.
    """
    if moment_bound < 0:
        raise DomainError("moment_bound must be non-negative")
    if truncation < 1:
        raise DomainError("truncation must be >= 1")
    a = np.log(np.arange(1, truncation + 1) + 2.0)

    def excess(u):
        return float(np.sum(u ** (-a))) - 1.0

    if excess(1.0) <= 0.0:
        u0 = 1.0
    else:
        hi = 2.0
        while excess(hi) > 0.0:
            hi *= 2.0
        u0 = brentq(excess, 1.0, hi, xtol=1e-14, rtol=1e-14)
    tail = float(np.sum(u0 ** (1.0 - a) / (a - 1.0)))
    return moment_bound * (u0 + tail)


# --- contraction maps for the comparison principle ---------------------------


def clamp_map(level: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.clip(x, -level, level)


def abs_map() -> Callable[[np.ndarray], np.ndarray]:
    return np.abs


def soft_threshold_map(level: float = 0.5) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.sign(x) * np.maximum(np.abs(x) - level, 0.0)


def contracted(T: PointSet, phi: Callable[[np.ndarray], np.ndarray]) -> PointSet:
    """Apply a contraction fixing 0 coordinatewise to every point."""
    return PointSet.from_matrix(phi(T.matrix), T.ambient, T.ids)
