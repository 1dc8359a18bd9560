"""From a partition tree to the split t = (t - pi(t)) + pi(t).

The chain points pi_n(A) are attached to the tree, the per-point maps m(t, i),
tau(t, i) and pi(t) are computed, and the explicit-constant consequences are
checked.  Decomposition pieces are exact rationals: t2 = pi(t) copies
coordinates of points of T and t1 = t - pi(t) is kept as an exact fraction, so
t = t1 + t2 holds without rounding.  All thresholds are powers of two and the
comparisons against them are exact as well.

The tree has finite depth L.  Coordinates whose chain never jumps are taken
from pi_L(t) instead of the limit; those with tau(t, i) > L then contribute at
most r^-j_L(t) / 2 each to ||t - pi(t)||_1, and this truncation margin is
reported next to the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .chaining import capped_N, gamma_alpha_upper
from .core import IndexSet, PointSet, SparseVector, pairwise_distances
from .errors import DegenerateInput, PreconditionViolated
from .partition import (
    ConstantLedger,
    FunctionalEvaluator,
    PartitionNode,
    PartitionTree,
    build_partition_tree,
    check_P_conditions,
)
from .results import CheckResult
from .supremum import EXACT_LIMIT, bernoulli_sup

NEVER = math.inf


def _pow(r: int, e: int) -> Fraction:
    return Fraction(r) ** e


def _exceeds(diff_a: np.ndarray, diff_b: np.ndarray, thr: Fraction) -> np.ndarray:
    """|a - b| > thr, decided exactly."""
    approx = np.abs(diff_a - diff_b)
    t = float(thr)
    out = approx > t
    scale = np.maximum(t, np.maximum(np.abs(diff_a), np.abs(diff_b)))
    close = np.abs(approx - t) <= 1e-9 * scale
    for idx in np.nonzero(close)[0]:
        out[idx] = abs(Fraction(float(diff_a[idx])) - Fraction(float(diff_b[idx]))) > thr
    return out


def assign_pi(tree: PartitionTree, check: bool = True) -> PartitionTree:
    """pi_0 = u_0; pi_n(A) = pi_{n-1}(A') if j is unchanged, u_n(A) if p = 1,
    and the first point of A otherwise."""
    if check:
        bad = check_P_conditions(tree)
        if bad:
            raise PreconditionViolated("tree fails the partition conditions", [v.to_dict() for v in bad])
    T = tree.T
    for node, parent in tree.nodes():
        if parent is None:
            node.pi_row = node.u_row
        elif node.j == parent.j:
            node.pi_row = parent.pi_row
        elif node.p == 1:
            node.pi_row = node.u_row
        else:
            node.pi_row = node.block[0]
        node.pi = T[node.pi_row]
    return tree


@dataclass
class ChainMaps:
    """Per-point chain data along A_0(t), ..., A_L(t); index arrays follow the ambient set."""

    row: int
    path: list[PartitionNode]
    j: list[int]
    pis: np.ndarray  # (L+1) x d
    m: np.ndarray  # first level where the chain jumps by more than r^-j_n, inf if never
    tau: np.ndarray  # first level where pi_n is farther than r^-j_n / 2 from t, inf if never
    pi: np.ndarray
    ambient: IndexSet

    @property
    def L(self) -> int:
        return len(self.j) - 1

    def I_n(self, n: int) -> IndexSet:
        return IndexSet(tuple(i for i, mi in zip(self.ambient, self.m) if mi >= n))

    def J_n(self, n: int) -> IndexSet:
        return IndexSet(tuple(i for i, ti in zip(self.ambient, self.tau) if ti == n))


def chain_maps(tree: PartitionTree, row: int) -> ChainMaps:
    X = tree.T.matrix
    r = tree.r
    path = tree.path_to(row)
    if any(node.pi_row is None for node in path):
        raise PreconditionViolated("assign_pi must run first")
    L = len(path) - 1
    js = [node.j for node in path]
    pis = X[[node.pi_row for node in path]]
    t = X[row]
    d = X.shape[1]
    m = np.full(d, NEVER)
    for n in range(L):
        jump = _exceeds(pis[n + 1], pis[n], _pow(r, -js[n])) & (m == NEVER)
        m[jump] = n
    tau = np.full(d, NEVER)
    for n in range(L + 1):
        far = _exceeds(pis[n], t, _pow(r, -js[n]) / 2) & (tau == NEVER)
        tau[far] = n
    level = np.minimum(m, L).astype(int)
    pi = pis[level, np.arange(d)]
    return ChainMaps(row, path, js, pis, m, tau, pi, tree.T.ambient)


@dataclass
class DecompositionEntry:
    id: str
    t: SparseVector
    t1: dict[int, Fraction]
    t2: dict[int, Fraction]

    def exact(self) -> bool:
        keys = set(self.t.entries) | set(self.t1) | set(self.t2)
        return all(self.t1.get(i, 0) + self.t2.get(i, 0) == Fraction(self.t[i]) for i in keys)

    @property
    def l1(self) -> Fraction:
        return sum((abs(v) for v in self.t1.values()), Fraction(0))

    def t1_vector(self) -> SparseVector:
        return SparseVector({i: float(v) for i, v in self.t1.items()}, id=self.id)

    def t2_vector(self) -> SparseVector:
        return SparseVector({i: float(v) for i, v in self.t2.items()}, id=self.id)

    def scaled(self, c: Fraction) -> "DecompositionEntry":
        return DecompositionEntry(
            self.id,
            self.t * float(c),
            {i: v * c for i, v in self.t1.items()},
            {i: v * c for i, v in self.t2.items()},
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "t": {str(i): v for i, v in self.t.entries.items()},
            "t1": {str(i): str(v) for i, v in self.t1.items()},
            "t2": {str(i): str(v) for i, v in self.t2.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecompositionEntry":
        return cls(
            d["id"],
            SparseVector({int(i): v for i, v in d["t"].items()}, id=d["id"]),
            {int(i): Fraction(v) for i, v in d["t1"].items()},
            {int(i): Fraction(v) for i, v in d["t2"].items()},
        )


@dataclass
class Decomposition:
    entries: list[DecompositionEntry]
    l1_sup: float
    gamma2_upper_T2: float
    chain_sum_sup: float
    M: float
    ledger: ConstantLedger = field(default_factory=ConstantLedger)
    l1_margin: float = 0.0  # truncation allowance added to the l1 bound
    info: dict = field(default_factory=dict)
    tree: PartitionTree | None = field(default=None, repr=False, compare=False)

    def exact(self) -> bool:
        return all(e.exact() for e in self.entries)

    def T1(self) -> list[SparseVector]:
        return [e.t1_vector() for e in self.entries]

    def T2(self) -> list[SparseVector]:
        return [e.t2_vector() for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "l1_sup": self.l1_sup,
            "gamma2_upper_T2": self.gamma2_upper_T2,
            "chain_sum_sup": self.chain_sum_sup,
            "M": self.M,
            "l1_margin": self.l1_margin,
            "ledger": self.ledger.to_dict(),
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Decomposition":
        return cls(
            [DecompositionEntry.from_dict(e) for e in d["entries"]],
            d["l1_sup"],
            d["gamma2_upper_T2"],
            d["chain_sum_sup"],
            d["M"],
            ConstantLedger.from_dict(d["ledger"]),
            d.get("l1_margin", 0.0),
            d.get("info", {}),
        )


def _chain_sum(r: int, js: list[int]) -> Fraction:
    return sum((Fraction(2) ** n * _pow(r, -j) for n, j in enumerate(js)), Fraction(0))


def _truncation_margin(r: int, cm: ChainMaps) -> Fraction:
    return _pow(r, -cm.j[-1]) / 2 * int(np.sum(cm.tau > cm.L))


def extract_decomposition(tree: PartitionTree, max_level: int | None = None, gamma_depth: int = 4) -> Decomposition:
    """t1 = t - pi(t), t2 = pi(t) for every t, with the aggregate certificates."""
    if max_level is not None and max_level != tree.max_level:
        raise PreconditionViolated("max_level must match the tree depth", [("max_level", max_level, tree.max_level)])
    if any(node.pi_row is None for node, _ in tree.nodes()):
        raise PreconditionViolated("assign_pi must run first")
    T, r = tree.T, tree.r
    amb = list(T.ambient)
    entries, sums, margins, l1_exact = [], [], [], []
    for row, t in enumerate(T):
        cm = chain_maps(tree, row)
        t2 = {i: Fraction(float(v)) for i, v in zip(amb, cm.pi) if v != 0.0}
        t1 = {}
        for i in amb:
            d = Fraction(t[i]) - t2.get(i, Fraction(0))
            if d != 0:
                t1[i] = d
        e = DecompositionEntry(t.id, t, t1, t2)
        entries.append(e)
        sums.append(_chain_sum(r, cm.j))
        margins.append(_truncation_margin(r, cm))
        l1_exact.append(e.l1)
    M = float(r**4)
    T2 = _dedupe([e.t2_vector() for e in entries], T.ambient)
    g2 = gamma_alpha_upper(T2, "l2", 2.0, gamma_depth).value
    chain_sup = max(sums)
    dec = Decomposition(
        entries,
        float(max(l1_exact)),
        g2,
        float(chain_sup),
        M,
        tree.ledger,
        float(max(margins)),
        {"kappa": tree.kappa, "j0": tree.j0, "max_level": tree.max_level},
    )
    if chain_sup > 0:
        tree.ledger.note("gamma2_T2_over_sqrtM_chain", g2 / (math.sqrt(M) * float(chain_sup)))
    return dec


def _dedupe(vectors: list[SparseVector], ambient: IndexSet) -> PointSet:
    seen, out = set(), []
    for v in vectors:
        key = tuple(v.entries.items())
        if key not in seen:
            seen.add(key)
            out.append(SparseVector(v.entries, id=str(len(out))))
    return PointSet(tuple(out), ambient)


def l1_bound_checks(tree: PartitionTree) -> list[CheckResult]:
    """||t - pi(t)||_1 <= 37 M sup_t sum_n 2^n r^-j_n(t) + truncation margin, in exact arithmetic."""
    r = tree.r
    M = Fraction(r) ** 4
    maps = [chain_maps(tree, row) for row in range(len(tree.T))]
    chain_sup = max(_chain_sum(r, cm.j) for cm in maps)
    out = []
    for cm in maps:
        t = tree.T[cm.row]
        l1 = sum((abs(Fraction(t[i]) - Fraction(float(p))) for i, p in zip(cm.ambient, cm.pi)), Fraction(0))
        rhs = 37 * M * chain_sup + _truncation_margin(r, cm)
        out.append(
            CheckResult(
                "l1_37M",
                f"point {t.id}",
                float(l1),
                float(rhs),
                float(rhs - l1),
                "pass" if l1 <= rhs else "fail",
                None,
                {"margin": float(_truncation_margin(r, cm))},
            )
        )
    return out


def verify_theorem_part(tree: PartitionTree, M: float | None = None) -> list[CheckResult]:
    """Node-by-node check of the hypotheses and of the chain consequences."""
    T, r = tree.T, tree.r
    M = float(r**4) if M is None else float(M)
    Mq = Fraction(M)
    X = T.matrix
    out: list[CheckResult] = []
    diam = float(pairwise_distances(X).max()) if len(T) > 1 else 0.0
    out.append(CheckResult.asserted("hypothesis_i", "T", diam, math.sqrt(M) * math.ldexp(1.0, -tree.kappa * tree.j0)))
    maps = {row: chain_maps(tree, row) for row in range(len(T))}
    for node, parent in tree.nodes():
        if parent is None:
            continue
        tag = f"node {node.path_str}"
        if node.j == parent.j and node.pi_row == parent.pi_row:
            out.append(CheckResult("hypothesis_ii", tag, 0.0, 0.0, 0.0, "pass", None, {"case": "a"}))
            continue
        if not (node.j > parent.j and node.pi_row in parent.block):
            out.append(CheckResult("hypothesis_ii", tag, 1.0, 0.0, -1.0, "fail", None, {"case": "neither"}))
            continue
        cm = maps[node.block[0]]
        I_n = cm.m >= node.n
        cap = _pow(r, -2 * node.j)
        pi = X[node.pi_row]
        worst = Fraction(0)
        for row in node.block:
            diff = X[row] - pi
            s = Fraction(0)
            for pos in np.nonzero(I_n & (diff != 0))[0]:
                dq = Fraction(float(X[row, pos])) - Fraction(float(pi[pos]))
                s += min(dq * dq, cap)
            worst = max(worst, s)
        rhs = Mq * 2**node.n * cap
        out.append(
            CheckResult("hypothesis_ii", tag, float(worst), float(rhs), float(rhs - worst),
                        "pass" if worst <= rhs else "fail", None, {"case": "b"})
        )
    L = tree.max_level
    for n in range(L + 1):
        U = set()
        for cm in maps.values():
            lvl = np.minimum(cm.m, n).astype(int)
            U.add(tuple(cm.pis[lvl, np.arange(len(cm.m))]))
        out.append(CheckResult.asserted("U_n_size", f"level {n}", len(U), capped_N(n, 10**9) if n > 0 else 1))
        U_arr = np.array(sorted(U))
        worst_margin, worst = math.inf, None
        for cm in maps.values():
            dist = float(np.sqrt(((U_arr - cm.pi) ** 2).sum(axis=1)).min())
            bound = sum(math.sqrt(M) * 2 ** (l / 2) * math.ldexp(1.0, -tree.kappa * cm.j[l]) for l in range(n, L))
            if bound - dist < worst_margin:
                worst_margin, worst = bound - dist, (dist, bound)
        out.append(CheckResult.asserted("U_n_distance", f"level {n}", worst[0], worst[1]))
    for cm in maps.values():
        tid = T[cm.row].id
        for n in range(1, L + 1):
            size = len(cm.J_n(n))
            out.append(CheckResult.asserted("J_n_size", f"point {tid} level {n}", size, 9 * M * 2 ** (n - 1)))
        for n in range(L + 1):
            node_J = cm.path[n].J
            extra = [i for i in cm.I_n(n) if i not in node_J]
            out.append(
                CheckResult("I_n_inclusion", f"point {tid} level {n}", float(len(extra)), 0.0, -float(len(extra)),
                            "pass" if not extra else "fail", None, {})
            )
    out.extend(l1_bound_checks(tree))
    return out


def _power_of_two_scale(level: float) -> int:
    """Largest e with 2^e * level <= 1/4."""
    e = math.floor(math.log2(0.25 / level))
    while math.ldexp(level, e) > 0.25:
        e -= 1
    while math.ldexp(level, e + 1) <= 0.25:
        e += 1
    return e


def trivial_decomposition(T: PointSet, ledger: ConstantLedger | None = None, kappa: int = 2) -> Decomposition:
    entries = [
        DecompositionEntry(t.id, t, {}, {i: Fraction(v) for i, v in t.entries.items()}) for t in T
    ]
    return Decomposition(entries, 0.0, 0.0, 0.0, float((2**kappa) ** 4), ledger or ConstantLedger(), 0.0,
                         {"degenerate": True})


def bernoulli_conjecture_pipeline(
    T: PointSet,
    kappa: int = 2,
    max_level: int = 4,
    exact_limit: int = EXACT_LIMIT,
    samples: int = 100_000,
    seed: int = 0,
    ledger: ConstantLedger | None = None,
    on_degenerate: str = "return",
    evaluator_samples: int = 2000,
) -> Decomposition:
    """Normalize, build the tree, attach pi and extract t = t1 + t2.

    T is rescaled by the power of two 2^e with 2^e * max(b(T), Delta_2(T)/4)
    in (1/8, 1/4]; then Delta_2 <= 1 = r^-0 and j0 = 0.  The power of two keeps
    rescaling exact, so the returned pieces satisfy t = t1 + t2 exactly in the
    original scale.
    """
    ledger = ledger if ledger is not None else ConstantLedger()
    est = bernoulli_sup(T, None, exact_limit, samples, seed)
    diam = float(pairwise_distances(T.matrix).max()) if len(T) > 1 else 0.0
    if diam == 0.0:
        if on_degenerate == "raise":
            raise DegenerateInput("b(T) = 0: all points coincide")
        return trivial_decomposition(T, ledger, kappa)
    level = max(est.value, diam / 4)
    e = _power_of_two_scale(level)
    S = PointSet(tuple(SparseVector({i: math.ldexp(v, e) for i, v in t.entries.items()}, id=t.id) for t in T),
                 T.ambient)
    ev = FunctionalEvaluator(S, 2**kappa, samples=evaluator_samples, seed=seed)
    tree = build_partition_tree(S, 0, kappa, max_level, ledger, ev)
    assign_pi(tree, check=True)
    dec = extract_decomposition(tree)
    back = Fraction(2) ** (-e)
    dec.entries = [
        DecompositionEntry(t.id, t, {i: v * back for i, v in en.t1.items()}, {i: v * back for i, v in en.t2.items()})
        for t, en in zip(T, dec.entries)
    ]
    dec.l1_sup = math.ldexp(dec.l1_sup, -e)
    dec.gamma2_upper_T2 = math.ldexp(dec.gamma2_upper_T2, -e)
    dec.chain_sum_sup = math.ldexp(dec.chain_sum_sup, -e)
    dec.l1_margin = math.ldexp(dec.l1_margin, -e)
    dec.info.update({"b": est.value, "b_method": est.method, "b_stderr": est.stderr, "scale_exponent": e})
    dec.info["l1_sup_over_b"] = dec.l1_sup / est.value
    dec.info["gamma2_T2_over_b"] = dec.gamma2_upper_T2 / est.value
    ledger.note("l1_sup_over_b", dec.info["l1_sup_over_b"])
    ledger.note("gamma2_T2_over_b", dec.info["gamma2_T2_over_b"])
    dec.tree = tree
    return dec
