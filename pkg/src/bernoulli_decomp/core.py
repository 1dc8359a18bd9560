"""Index sets, sparse vectors, point sets and the elementary distances.

Points are finitely supported vectors of l2(I).  A :class:`PointSet` keeps a
fixed point order (all tie-breaking in the package uses it) and an explicit
finite ambient index set; numerical kernels work on the dense
``len(points) x len(ambient)`` matrix it caches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError


@dataclass(frozen=True)
class IndexSet:
    """Sorted, duplicate-free finite set of non-negative integer indices."""

    members: tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(sorted({int(i) for i in self.members}))
        if members and members[0] < 0:
            raise DomainError("indices must be non-negative")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, items: Iterable[int]) -> "IndexSet":
        return cls(tuple(items))

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, i: object) -> bool:
        return i in self._lookup

    @cached_property
    def _lookup(self) -> dict[int, int]:
        return {i: pos for pos, i in enumerate(self.members)}

    def position(self, i: int) -> int:
        return self._lookup[i]

    def positions(self, other: Iterable[int]) -> np.ndarray:
        """Column positions of ``other``'s members; members absent here are skipped."""
        return np.array([self._lookup[i] for i in other if i in self._lookup], dtype=np.intp)

    def issubset(self, other: "IndexSet") -> bool:
        return all(i in other for i in self.members)

    def union(self, other: Iterable[int]) -> "IndexSet":
        return IndexSet(self.members + tuple(other))

    def intersection(self, other: Iterable[int]) -> "IndexSet":
        other = set(other)
        return IndexSet(tuple(i for i in self.members if i in other))

    def __repr__(self) -> str:
        return f"IndexSet({list(self.members)})"


@dataclass(frozen=True, eq=False)
class SparseVector:
    """A finitely supported point of l2(I); zero coefficients are never stored."""

    entries: Mapping[int, float] = field(default_factory=dict)
    id: str | None = None

    def __post_init__(self):
        clean = {int(i): float(v) for i, v in sorted(self.entries.items()) if v != 0.0}
        object.__setattr__(self, "entries", clean)

    @classmethod
    def basis(cls, i: int, scale: float = 1.0, id: str | None = None) -> "SparseVector":
        return cls({i: scale}, id=id)

    @classmethod
    def from_dense(cls, values: Sequence[float], ambient: IndexSet, id: str | None = None):
        return cls({i: float(v) for i, v in zip(ambient, values) if v != 0.0}, id=id)

    def __getitem__(self, i: int) -> float:
        return self.entries.get(i, 0.0)

    @property
    def support(self) -> IndexSet:
        return IndexSet(tuple(self.entries))

    def to_dense(self, ambient: IndexSet) -> np.ndarray:
        out = np.zeros(len(ambient))
        for i, v in self.entries.items():
            out[ambient.position(i)] = v
        return out

    def _combine(self, other: "SparseVector", sign: float) -> "SparseVector":
        out = dict(self.entries)
        for i, v in other.entries.items():
            out[i] = out.get(i, 0.0) + sign * v
        return SparseVector(out)

    def __add__(self, other: "SparseVector") -> "SparseVector":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SparseVector") -> "SparseVector":
        return self._combine(other, -1.0)

    def __neg__(self) -> "SparseVector":
        return SparseVector({i: -v for i, v in self.entries.items()}, id=self.id)

    def __mul__(self, c: float) -> "SparseVector":
        return SparseVector({i: c * v for i, v in self.entries.items()}, id=self.id)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self) -> int:
        return hash(tuple(self.entries.items()))

    def norm(self, p: float = 2.0) -> float:
        vals = np.abs(np.fromiter(self.entries.values(), dtype=float, count=len(self.entries)))
        if vals.size == 0:
            return 0.0
        if p == math.inf:
            return float(vals.max())
        return float(np.sum(vals**p) ** (1.0 / p))

    def __repr__(self) -> str:
        tag = f"{self.id!r}, " if self.id is not None else ""
        return f"SparseVector({tag}{self.entries})"


@dataclass(frozen=True, eq=False)
class PointSet:
    """A non-empty, ordered, finite family T of sparse vectors."""

    points: tuple[SparseVector, ...]
    ambient: IndexSet = None  # type: ignore[assignment]

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise DomainError("a PointSet must be non-empty")
        support = IndexSet(tuple(i for p in points for i in p.entries))
        ambient = support if self.ambient is None else IndexSet(tuple(self.ambient))
        if not support.issubset(ambient):
            raise DomainError("point support lies outside the ambient index set")
        # give anonymous points stable positional ids
        points = tuple(
            p if p.id is not None else SparseVector(p.entries, id=str(k)) for k, p in enumerate(points)
        )
        ids = [p.id for p in points]
        if len(set(ids)) != len(ids):
            raise DomainError("point ids must be unique")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "ambient", ambient)

    @classmethod
    def from_matrix(cls, matrix, ambient: Iterable[int] | None = None, ids=None) -> "PointSet":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        amb = IndexSet(tuple(range(matrix.shape[1]))) if ambient is None else IndexSet(tuple(ambient))
        if len(amb) != matrix.shape[1]:
            raise DomainError("ambient size does not match matrix width")
        ids = [str(k) for k in range(matrix.shape[0])] if ids is None else list(ids)
        return cls(tuple(SparseVector.from_dense(row, amb, id=i) for row, i in zip(matrix, ids)), amb)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[SparseVector]:
        return iter(self.points)

    def __getitem__(self, k: int) -> SparseVector:
        return self.points[k]

    @cached_property
    def matrix(self) -> np.ndarray:
        out = np.zeros((len(self.points), len(self.ambient)))
        for r, p in enumerate(self.points):
            for i, v in p.entries.items():
                out[r, self.ambient.position(i)] = v
        out.setflags(write=False)
        return out

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.points]

    def columns(self, J: Iterable[int] | None = None) -> np.ndarray:
        """Dense columns restricted to ``J`` (all of the ambient set if None)."""
        if J is None:
            return self.matrix
        return self.matrix[:, self.ambient.positions(J)]

    def subset(self, rows: Sequence[int]) -> "PointSet":
        return PointSet(tuple(self.points[r] for r in rows), self.ambient)

    def scaled(self, c: float) -> "PointSet":
        return PointSet(tuple(p * c for p in self.points), self.ambient)


# --- distances -------------------------------------------------------------


def restricted_l2_distance(s: SparseVector, t: SparseVector, J: Iterable[int]) -> float:
    """The restricted distance d_J(s, t) = ||s_J - t_J||_2."""
    keys = set(s.entries) | set(t.entries)
    Jset = J if isinstance(J, IndexSet) else set(J)
    total = math.fsum((s[i] - t[i]) ** 2 for i in keys if i in Jset)
    return math.sqrt(total)


def l2_distance(s: SparseVector, t: SparseVector) -> float:
    keys = set(s.entries) | set(t.entries)
    return math.sqrt(math.fsum((s[i] - t[i]) ** 2 for i in keys))


def linf_distance(s: SparseVector, t: SparseVector) -> float:
    keys = set(s.entries) | set(t.entries)
    return max((abs(s[i] - t[i]) for i in keys), default=0.0)


Metric = Callable[[SparseVector, SparseVector], float]


def diameter(T: PointSet | Sequence[SparseVector], metric: Metric = l2_distance) -> float:
    """Maximum of ``metric`` over unordered pairs; 0 for a singleton."""
    pts = list(T)
    best = 0.0
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            best = max(best, metric(pts[a], pts[b]))
    return best


def pairwise_distances(X: np.ndarray, weights: np.ndarray | None = None, p: float = 2.0) -> np.ndarray:
    """Dense pairwise distance matrix of the rows of ``X``.

    ``weights`` multiplies the squared column differences (p = 2 only).
    """
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    if p == math.inf:
        return np.abs(diff).max(axis=2, initial=0.0)
    sq = diff * diff
    if weights is not None:
        sq = sq * weights
    return np.sqrt(sq.sum(axis=2))


def matrix_diameter(X: np.ndarray, weights: np.ndarray | None = None, p: float = 2.0) -> float:
    if X.shape[0] < 2:
        return 0.0
    return float(pairwise_distances(X, weights, p).max())


# --- point-set file format -------------------------------------------------


def parse_point_set(lines: Iterable[str]) -> PointSet:
    """Parse JSON-lines records ``{"id": .., "coords": {index: value}}``.

    An optional header record ``{"ambient": [indices]}`` fixes the ambient set.
    """
    ambient = None
    points = []
    for lineno, raw in enumerate(lines, 1):
        raw = raw.strip()
        if not raw or raw.startswith("#"):
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: {exc.msg}") from exc
        if not isinstance(rec, dict):
            raise ParseError(f"line {lineno}: record must be an object")
        if "ambient" in rec:
            try:
                ambient = IndexSet(tuple(int(i) for i in rec["ambient"]))
            except (TypeError, ValueError, DomainError) as exc:
                raise ParseError(f"line {lineno}: bad ambient header") from exc
            continue
        try:
            coords = {int(k): float(v) for k, v in rec["coords"].items()}
            pid = str(rec["id"])
        except (KeyError, AttributeError, TypeError, ValueError) as exc:
            raise ParseError(f"line {lineno}: expected {{'id', 'coords'}} record") from exc
        if any(not math.isfinite(v) for v in coords.values()):
            raise ParseError(f"line {lineno}: non-finite coordinate")
        points.append(SparseVector(coords, id=pid))
    if not points:
        raise ParseError("no point records found")
    try:
        return PointSet(tuple(points), ambient)
    except DomainError as exc:
        raise ParseError(str(exc)) from exc


def read_point_set(path: str | Path) -> PointSet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_point_set(text.splitlines())


def dump_point_set(T: PointSet, with_header: bool = True) -> str:
    lines = []
    if with_header:
        lines.append(json.dumps({"ambient": list(T.ambient)}))
    for p in T:
        lines.append(json.dumps({"id": p.id, "coords": {str(i): v for i, v in p.entries.items()}}))
    return "\n".join(lines) + "\n"


def write_point_set(T: PointSet, path: str | Path) -> None:
    Path(path).write_text(dump_point_set(T))
