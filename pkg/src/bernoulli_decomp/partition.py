"""Greedy and two-distance splitting steps and the recursive partition builder.

Blocks are stored as tuples of row indices into the point set; the points
``u`` and ``pi`` attached to a node are always points of T and are kept both
as a row index and as the vector itself.  Every node carries the state
(n, j, k, p, u, J) that the conditions (P1)-(P9) constrain.  Construction is
deterministic: ties go to the first point in point-set order.

Functional values F(A, J, u, k, j) are only needed for the greedy center rule
and for the drop certificates, which are recorded in the constant ledger as
measured quantities.  They are evaluated exactly when the chopped process is
small and by seeded Monte Carlo otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .chaining import assign_to_centers, capped_N, farthest_point_centers
from .chopping import (
    FunctionalParams,
    chopped_process_matrix,
    functional_value,
    kappa_of,
    process_distances,
    refined_process_matrix,
)
from .core import IndexSet, PointSet, SparseVector, pairwise_distances
from .errors import CapacityExceeded, DomainError, PreconditionViolated

TOL = 1e-9
LEVEL_CAP = 8

DEFAULT_CONSTANTS = {f"L{i}": 1.0 for i in range(1, 12)}
DEFAULT_CONSTANTS["L5"] = 2.0  # the greedy ball radius L5*sigma/2 must reach sigma


@dataclass
class ConstantLedger:
    """Configured values of the unnamed universal constants and measured ratios."""

    constants: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CONSTANTS))
    measured: list[dict] = field(default_factory=list)

    def __post_init__(self):
        merged = dict(DEFAULT_CONSTANTS)
        merged.update({k: float(v) for k, v in self.constants.items()})
        self.constants = merged

    def __getitem__(self, name: str) -> float:
        return self.constants[name]

    def override(self, values: dict[str, float]) -> "ConstantLedger":
        unknown = set(values) - set(DEFAULT_CONSTANTS)
        if unknown:
            raise DomainError(f"unknown ledger constants {sorted(unknown)}")
        out = ConstantLedger(dict(self.constants), list(self.measured))
        out.constants.update({k: float(v) for k, v in values.items()})
        return out

    def problems(self) -> list[str]:
        return [f"{k} = {v} is not positive" for k, v in self.constants.items() if not (v > 0 and math.isfinite(v))]

    def record(self, name: str, lhs: float, rhs: float, **info) -> None:
        rec = {"name": name, "lhs": float(lhs), "rhs": float(rhs), "holds": bool(lhs <= rhs + TOL * max(1.0, abs(rhs)))}
        rec.update(info)
        self.measured.append(rec)

    def note(self, name: str, value: float, **info) -> None:
        """A measured ratio with no inequality attached."""
        rec = {"name": name, "value": float(value)}
        rec.update(info)
        self.measured.append(rec)

    def summary(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for rec in self.measured:
            s = out.setdefault(rec["name"], {"count": 0})
            s["count"] += 1
            if "holds" in rec:
                s["holds"] = s.get("holds", 0) + int(rec["holds"])
        return out

    def to_dict(self) -> dict:
        return {"constants": dict(sorted(self.constants.items())), "measured": list(self.measured)}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantLedger":
        return cls(dict(d.get("constants", {})), list(d.get("measured", [])))


class FunctionalEvaluator:
    """Cached chopped processes, distances and functionals for one point set."""

    def __init__(self, T: PointSet, r: int, exact_limit: float = 16, samples: int = 2000, seed: int = 0):
        self.T = T
        self.X = T.matrix
        self.r = r
        self.exact_limit = exact_limit
        self.samples = samples
        self.seed = seed
        self._proc: dict = {}
        self._val: dict = {}

    def _key(self, rows, J: IndexSet, u: SparseVector, k: int, j: int):
        return (tuple(rows), J.members, u, k, j)

    def process(self, rows, J, u, k, j):
        key = self._key(rows, J, u, k, j)
        if key not in self._proc:
            params = FunctionalParams(J, u, k, j, self.r)
            self._proc[key] = chopped_process_matrix(self.X[list(rows)], self.T.ambient, params)
        return self._proc[key]

    def distances(self, rows, J, u, k, j) -> np.ndarray:
        return process_distances(self.process(rows, J, u, k, j))

    def diameter(self, rows, J, u, k, j) -> float:
        if len(rows) < 2:
            return 0.0
        return float(self.distances(rows, J, u, k, j).max())

    def value(self, rows, J, u, k, j) -> float:
        key = self._key(rows, J, u, k, j)
        if key not in self._val:
            if len(rows) < 2:
                self._val[key] = 0.0
            else:
                est = functional_value(self.process(rows, J, u, k, j), "auto", self.samples, self.seed, self.exact_limit)
                self._val[key] = est.value
        return self._val[key]


# --- splitting steps -------------------------------------------------------


def _sqrt_log(m: int) -> float:
    return math.sqrt(math.log(m)) if m > 1 else 0.0


def _greedy_rows(ev: FunctionalEvaluator, rows, J, u, k, j, m, sigma, L5):
    rows = list(rows)
    if len(rows) == 0:
        return [], []
    D = ev.distances(rows, J, u, k, j)
    a = L5 * sigma / 2
    local = list(range(len(rows)))
    if m - 1 >= 1:
        centers = farthest_point_centers(D, local, m - 1)
        if float(D[np.ix_(centers, local)].min(axis=0).max()) <= a:
            clusters = assign_to_centers(D, local, centers)
            return [[rows[x] for x in c] for c in clusters if c], []
    remaining = local
    balls = []
    for _ in range(max(m - 1, 0)):
        if not remaining:
            break
        best, best_val = None, -math.inf
        for t in remaining:
            sub = [s for s in remaining if D[t, s] <= sigma]
            val = ev.value([rows[s] for s in sub], J, u, k, j)
            if val > best_val:
                best, best_val = t, val
        ball = [s for s in remaining if D[best, s] <= a]
        balls.append([rows[s] for s in ball])
        taken = set(ball)
        remaining = [s for s in remaining if s not in taken]
    return balls, [rows[s] for s in remaining]


def greedy_functional_split(
    T: PointSet,
    params: FunctionalParams,
    m: int,
    sigma: float,
    ledger: ConstantLedger | None = None,
    evaluator: FunctionalEvaluator | None = None,
    rows: Sequence[int] | None = None,
) -> tuple[list[list[int]], list[int]]:
    """Up to m-1 balls of chopped diameter <= L5*sigma and a remainder.

    Centers follow the greedy rule: each maximizes F over the sigma-ball it
    spans inside what is left.  Returned blocks are row indices of ``T``.
    """
    ledger = ledger or ConstantLedger()
    if m < 1 or not sigma > 0:
        raise DomainError("need m >= 1 and sigma > 0")
    need = math.ldexp(1.0, -params.kappa * params.j) * _sqrt_log(m)
    if need > sigma * (1 + TOL):
        raise PreconditionViolated("r^-j sqrt(log m) exceeds sigma", [("greedy", need, sigma)])
    ev = evaluator or FunctionalEvaluator(T, params.r)
    rows = list(range(len(T))) if rows is None else list(rows)
    return _greedy_rows(ev, rows, params.J, params.u, params.k, params.j, m, sigma, ledger["L5"])


def _two_distance_rows(ev, rows, J, Jp, u, up, k, j, m, sigma):
    rows = list(rows)
    if len(rows) < 2 or ev.diameter(rows, J, u, k, j + 1) <= sigma:
        return [rows] if rows else [], []
    params = FunctionalParams(J, u, k, j + 1, ev.r)
    proc = refined_process_matrix(ev.X[rows], ev.T.ambient, params, Jp, up)
    D = process_distances(proc)
    local = list(range(len(rows)))
    centers = farthest_point_centers(D, local, m)
    near = D[np.ix_(centers, local)]
    owner = np.argmin(near, axis=0)
    covered = near.min(axis=0) <= sigma / 6
    pieces = [[rows[x] for x in local if covered[x] and owner[x] == c] for c in range(len(centers))]
    remainder = [rows[x] for x in local if not covered[x]]
    return [p for p in pieces if p], remainder


def two_distance_split(
    T: PointSet,
    J: IndexSet,
    Jp: IndexSet,
    u: SparseVector,
    up: SparseVector,
    k: int,
    j: int,
    m: int,
    sigma: float,
    r: int = 4,
    ledger: ConstantLedger | None = None,
    evaluator: FunctionalEvaluator | None = None,
    rows: Sequence[int] | None = None,
) -> tuple[list[list[int]], list[int]]:
    """At most m pieces with Delta(., J, u, k, j+1) <= sigma and a remainder.

    Centers come from farthest-point traversal in the distance of the grid
    G(u_i, k, j+1) refined by G(u'_i, j+2, j+2) on Jp; pieces are balls of
    radius sigma/6 there.  The functional drop on the remainder is measured
    and recorded in the ledger.
    """
    ledger = ledger if ledger is not None else ConstantLedger()
    J, Jp = IndexSet(tuple(J)), IndexSet(tuple(Jp))
    kap = kappa_of(r)
    ev = evaluator or FunctionalEvaluator(T, r)
    rows = list(range(len(T))) if rows is None else list(rows)
    problems = []
    if not Jp.issubset(J):
        problems.append(("Jp subset of J", 1.0, 0.0))
    near = math.ldexp(2.0, -kap * k)
    for i in Jp:
        if abs(u[i] - up[i]) > near * (1 + TOL):
            problems.append((f"|u_{i} - u'_{i}| <= 2 r^-k", abs(u[i] - up[i]), near))
    c = ev.diameter(rows, J, u, k, j + 2)
    if ledger["L6"] * c > sigma * (1 + TOL):
        problems.append(("L6 * Delta(T, J, u, k, j+2) <= sigma", ledger["L6"] * c, sigma))
    if math.ldexp(1.0, -kap * (j + 1)) * _sqrt_log(m) > sigma * (1 + TOL):
        problems.append(("r^-(j+1) sqrt(log m) <= sigma", math.ldexp(1.0, -kap * (j + 1)) * _sqrt_log(m), sigma))
    if problems:
        raise PreconditionViolated("two_distance_split preconditions fail", problems)
    pieces, remainder = _two_distance_rows(ev, rows, J, Jp, u, up, k, j, m, sigma)
    if remainder:
        lhs = ev.value(remainder, Jp, up, j + 2, j + 2)
        rhs = ev.value(rows, J, u, k, j + 1) - sigma * _sqrt_log(m) / ledger["L7"]
        ledger.record("two_distance_drop", lhs, rhs)
    return pieces, remainder


# --- tree ------------------------------------------------------------------


@dataclass
class PartitionNode:
    block: tuple[int, ...]
    n: int
    j: int
    k: int
    p: int
    u_row: int
    u: SparseVector
    J: IndexSet
    kind: str
    children: list["PartitionNode"] = field(default_factory=list)
    pi_row: int | None = None
    pi: SparseVector | None = None
    path: tuple[int, ...] = ()

    @property
    def path_str(self) -> str:
        return "/".join(str(x) for x in self.path) or "root"

    def state(self) -> dict:
        return {"n": self.n, "j": self.j, "k": self.k, "p": self.p, "u": self.u_row, "J": list(self.J)}


@dataclass
class PartitionTree:
    T: PointSet
    root: PartitionNode
    kappa: int
    j0: int
    max_level: int
    ledger: ConstantLedger

    @property
    def r(self) -> int:
        return 2**self.kappa

    def nodes(self) -> Iterator[tuple[PartitionNode, PartitionNode | None]]:
        """All (node, parent) pairs in depth-first order."""
        stack: list[tuple[PartitionNode, PartitionNode | None]] = [(self.root, None)]
        while stack:
            node, parent = stack.pop()
            yield node, parent
            stack.extend((c, node) for c in reversed(node.children))

    def level(self, n: int) -> list[PartitionNode]:
        return [node for node, _ in self.nodes() if node.n == n]

    def path_to(self, row: int) -> list[PartitionNode]:
        """A_0(t), A_1(t), ... for the point in row ``row``."""
        out = [self.root]
        while out[-1].children:
            out.append(next(c for c in out[-1].children if row in c.block))
        return out

    def to_dict(self) -> dict:
        ids = self.T.ids

        def enc(node: PartitionNode) -> dict:
            return {
                "block": [ids[x] for x in node.block],
                "n": node.n,
                "j": node.j,
                "k": node.k,
                "p": node.p,
                "u": ids[node.u_row],
                "J": list(node.J),
                "pi": None if node.pi_row is None else ids[node.pi_row],
                "kind": node.kind,
                "children": [enc(c) for c in node.children],
            }

        return {"kappa": self.kappa, "r": self.r, "j0": self.j0, "max_level": self.max_level, "root": enc(self.root)}


def _child(parent: PartitionNode, block, kind, idx, T: PointSet, **state) -> PartitionNode:
    s = dict(j=parent.j, k=parent.k, p=parent.p, u_row=parent.u_row, J=parent.J)
    s.update(state)
    return PartitionNode(
        block=tuple(block),
        n=parent.n + 1,
        j=s["j"],
        k=s["k"],
        p=s["p"],
        u_row=s["u_row"],
        u=T[s["u_row"]],
        J=s["J"],
        kind=kind,
        path=parent.path + (idx,),
    )


def trichotomy_split(
    T: PointSet,
    node: PartitionNode,
    n: int,
    r: int = 4,
    ledger: ConstantLedger | None = None,
    evaluator: FunctionalEvaluator | None = None,
) -> list[tuple[list[int], str, dict]]:
    """Split a p = 0 block into pieces of kind C1, C2 or C3 with their new state.

    C3: Delta(A, J, u, k, j+1) <= 2^(n/2) r^-(j+1), state (j+1, k, u, J).
    C2: the remainder of a two-distance split, state p = 1, j = k = j+2,
        u = u' (the first point of the block), J' the 2 r^-k agreement set.
    C1: the remainder of the greedy step, state unchanged.
    """
    if node.p != 0:
        raise PreconditionViolated("trichotomy_split needs p = 0", [("p", node.p, 0)])
    ledger = ledger if ledger is not None else ConstantLedger()
    ev = evaluator or FunctionalEvaluator(T, r)
    kap = kappa_of(r)
    rows = list(node.block)
    J, u, k, j = node.J, node.u, node.k, node.j
    sigma = math.ldexp(2.0 ** (n / 2), -kap * (j + 1))
    c3 = {"j": j + 1}
    if len(rows) == 1 or ev.diameter(rows, J, u, k, j + 1) <= sigma:
        return [(rows, "C3", c3)]

    m = 2 ** (2 ** (n - 1)) if n <= 6 else len(rows) + 1
    m_eff = min(m, len(rows) + 1)
    log_m = math.sqrt(2.0 ** (n - 1) * math.log(2.0))
    L5, L6 = ledger["L5"], ledger["L6"]
    sigma1 = sigma / (L5 * L6)
    if math.ldexp(1.0, -kap * (j + 2)) * log_m > sigma1 * (1 + TOL):
        raise PreconditionViolated("greedy step needs r^-(j+2) sqrt(log m) <= sigma", [("greedy", sigma1, log_m)])
    balls, rest = _greedy_rows(ev, rows, J, u, k, j + 2, m_eff, sigma1, L5)

    out: list[tuple[list[int], str, dict]] = []
    if rest:
        if ev.diameter(rest, J, u, k, j + 1) <= sigma:
            out.append((rest, "C3", c3))
        else:
            out.append((rest, "C1", {}))
            _record_c1(ev, ledger, node, rest, rows, n, sigma, log_m)

    up_row = rows[0]
    up = T[up_row]
    near = math.ldexp(2.0, -kap * k)
    Jp = IndexSet(tuple(i for i in J if abs(u[i] - up[i]) <= near))
    c2 = {"p": 1, "j": j + 2, "k": j + 2, "u_row": up_row, "J": Jp}
    F_parent = None
    for ball in balls:
        pieces, remainder = _two_distance_rows(ev, ball, J, Jp, u, up, k, j, m_eff, sigma)
        out.extend((piece, "C3", c3) for piece in pieces)
        if remainder:
            out.append((remainder, "C2", c2))
            F_rem = ev.value(remainder, Jp, up, j + 2, j + 2)
            ledger.record(
                "two_distance_drop",
                F_rem,
                ev.value(ball, J, u, k, j + 1) - sigma * log_m / ledger["L7"],
                node=node.path_str,
                n=n,
            )
            if F_parent is None:
                F_parent = ev.value(rows, J, u, k, j)
            ledger.record(
                "P10",
                F_rem,
                F_parent - math.ldexp(2.0**n, -kap * (j + 1)) / ledger["L11"],
                node=node.path_str,
                n=n,
            )
    return out


def _record_c1(ev, ledger, node, rest, rows, n, sigma, log_m, max_centers: int = 8):
    """Measured (C1) certificate: the largest F over small-diameter subsets of
    the remainder versus F of the whole block minus the target drop."""
    J, u, k, j = node.J, node.u, node.k, node.j
    rho = sigma / ledger["L9"]
    D = ev.distances(rest, J, u, k, j + 2)
    local = list(range(len(rest)))
    best = 0.0
    for t in farthest_point_centers(D, local, min(max_centers, len(rest))):
        sub = [rest[s] for s in local if D[t, s] <= rho / 2]
        best = max(best, ev.value(sub, J, u, k, j + 2))
    F_block = ev.value(rows, J, u, k, j + 2)
    target = math.ldexp(2.0**n, -kappa_of(ev.r) * (j + 1)) / ledger["L10"]
    ledger.record("P11", best, F_block - target, node=node.path_str, n=n)


def build_partition_tree(
    T: PointSet,
    j0: int = 0,
    kappa: int = 2,
    max_level: int = 4,
    ledger: ConstantLedger | None = None,
    evaluator: FunctionalEvaluator | None = None,
    level_cap: int = LEVEL_CAP,
) -> PartitionTree:
    """Admissible partition tree of depth ``max_level`` with per-node state.

    Level 1 copies the root.  A node with 1 <= p <= 2 kappa - 2 is kept with
    p + 1, one with p = 2 kappa - 1 is kept with p = 0, and a p = 0 node is
    split by :func:`trichotomy_split`.
    """
    if kappa < 2:
        raise DomainError("kappa must be >= 2")
    if max_level < 1:
        raise DomainError("max_level must be >= 1")
    if max_level > level_cap:
        raise CapacityExceeded(f"max_level {max_level} exceeds the level cap {level_cap}")
    r = 2**kappa
    ledger = ledger if ledger is not None else ConstantLedger()
    bad = ledger.problems()
    if bad:
        raise PreconditionViolated("ledger constants must be positive", [(b, 0.0, 0.0) for b in bad])
    diam = float(pairwise_distances(T.matrix).max()) if len(T) > 1 else 0.0
    bound = math.ldexp(1.0, -kappa * j0)
    if diam > bound * (1 + TOL):
        raise PreconditionViolated("Delta_2(T) exceeds r^-j0", [("P1", diam, bound)])
    ev = evaluator or FunctionalEvaluator(T, r)
    rows = tuple(range(len(T)))
    root = PartitionNode(rows, 0, j0, j0, 0, 0, T[0], T.ambient, "root")
    level1 = _child(root, rows, "hold", 0, T)
    root.children.append(level1)
    frontier = [level1]
    for n in range(1, max_level):
        nxt = []
        for B in frontier:
            if 1 <= B.p <= 2 * kappa - 2:
                B.children.append(_child(B, B.block, "hold", 0, T, p=B.p + 1))
            elif B.p == 2 * kappa - 1:
                B.children.append(_child(B, B.block, "hold", 0, T, p=0))
            else:
                for idx, (block, kind, state) in enumerate(trichotomy_split(T, B, n, r, ledger, ev)):
                    B.children.append(_child(B, block, kind, idx, T, **state))
            nxt.extend(B.children)
        frontier = nxt
    return PartitionTree(T, root, kappa, j0, max_level, ledger)


# --- checker ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    node: str
    condition: str
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {"node": self.node, "condition": self.condition, "lhs": self.lhs, "rhs": self.rhs}


def _le(a: float, b: float) -> bool:
    return a <= b + TOL * max(1.0, abs(b))


def check_P_conditions(tree: PartitionTree, evaluator: FunctionalEvaluator | None = None) -> list[Violation]:
    """Every failure of (P1)-(P9) and of the structural invariants."""
    T, kap, r = tree.T, tree.kappa, tree.r
    ev = evaluator or FunctionalEvaluator(T, r)
    out: list[Violation] = []

    def bad(node, cond, lhs, rhs):
        out.append(Violation(node.path_str, cond, float(lhs), float(rhs)))

    root = tree.root
    if not (root.p == 0 and root.j == tree.j0 and root.k == tree.j0 and root.J == T.ambient):
        bad(root, "P1", root.j, tree.j0)
    if set(root.block) != set(range(len(T))):
        bad(root, "partition", len(root.block), len(T))
    widths: dict[int, int] = {}
    for node, parent in tree.nodes():
        widths[node.n] = widths.get(node.n, 0) + 1
        if node.k > node.j:
            bad(node, "k<=j", node.k, node.j)
        if not 0 <= node.p <= 2 * kap - 1:
            bad(node, "p-range", node.p, 2 * kap - 1)
        if not 0 <= node.u_row < len(T):
            bad(node, "u-in-T", node.u_row, len(T) - 1)
            continue
        if node.children:
            union = [x for c in node.children for x in c.block]
            if sorted(union) != sorted(node.block) or any(not c.block for c in node.children):
                bad(node, "partition", len(union), len(node.block))
        diam = ev.diameter(node.block, node.J, node.u, node.k, node.j)
        if node.p == 0:
            bound = math.ldexp(2.0 ** (node.n / 2), -kap * node.j)
            if not _le(diam, bound):
                bad(node, "P3", diam, bound)
        else:
            bound = math.ldexp(2.0 ** ((node.n - node.p) / 2), -kap * (node.j - 1))
            if not _le(diam, bound):
                bad(node, "P4", diam, bound)
        if parent is None:
            continue
        if not (parent.j <= node.j <= parent.j + 2 and parent.k <= node.k):
            bad(node, "P2", node.j, parent.j)
        if node.p != 1 and not (node.u == parent.u and node.k == parent.k and node.J == parent.J):
            bad(node, "P5", node.k, parent.k)
        if node.p == 1:
            near = math.ldexp(2.0, -kap * parent.k)
            expect = IndexSet(tuple(i for i in parent.J if abs(node.u[i] - parent.u[i]) <= near))
            if node.u_row not in parent.block or node.j != parent.j + 2 or node.J != expect:
                bad(node, "P6", node.j, parent.j + 2)
        if node.p > 1 and node.j != parent.j:
            bad(node, "P7", node.j, parent.j)
        if node.p > 0 and node.p != parent.p + 1:
            bad(node, "P8", node.p, parent.p + 1)
        if node.p == 0 and not (parent.p in (0, 2 * kap - 1) and node.j <= parent.j + 1):
            bad(node, "P9", node.j, parent.j + 1)
    for n, w in sorted(widths.items()):
        cap = capped_N(n, len(T))
        if w > cap:
            out.append(Violation(f"level {n}", "width", w, cap))
    return out


def functional_path_values(tree: PartitionTree, evaluator: FunctionalEvaluator | None = None) -> list[tuple[str, float, float]]:
    """(node, F_n(A), F_{n-1}(A')) for every edge of the tree."""
    ev = evaluator or FunctionalEvaluator(tree.T, tree.r)
    out = []
    for node, parent in tree.nodes():
        if parent is None:
            continue
        out.append(
            (
                node.path_str,
                ev.value(node.block, node.J, node.u, node.k, node.j),
                ev.value(parent.block, parent.J, parent.u, parent.k, parent.j),
            )
        )
    return out


def smart_subsequence(a: Sequence[float], alpha: float) -> IndexSet:
    """V = {m : a_n < a_m alpha^|n-m| for all n != m}."""
    if not alpha > 1:
        raise DomainError("alpha must be > 1")
    a = [float(x) for x in a]
    if not a or any(not (x > 0 and math.isfinite(x)) for x in a):
        raise DomainError("a must be a non-empty list of positive finite numbers")
    log_alpha = math.log(alpha)
    V = []
    for m, am in enumerate(a):
        ok = True
        for n, an in enumerate(a):
            if n == m:
                continue
            d = abs(n - m)
            if d * log_alpha > 700:
                continue
            if not an < am * alpha**d:
                ok = False
                break
        if ok:
            V.append(m)
    return IndexSet(tuple(V))
