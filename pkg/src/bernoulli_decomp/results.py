"""Check records and the line-oriented report document."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

STATUSES = ("pass", "fail", "measured")


def _clean(x: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _unclean(x: Any) -> Any:
    if x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, dict):
        return {k: _unclean(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_unclean(v) for v in x]
    return x


@dataclass
class CheckResult:
    name: str
    instance: str
    lhs: float
    rhs: float
    margin: float
    status: str
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @classmethod
    def asserted(cls, name, instance, lhs, rhs, tol=1e-9, seed=None, **details) -> "CheckResult":
        lhs, rhs = float(lhs), float(rhs)
        ok = lhs <= rhs + tol * max(1.0, abs(rhs))
        return cls(name, instance, lhs, rhs, rhs - lhs, "pass" if ok else "fail", seed, details)

    @classmethod
    def measured(cls, name, instance, lhs, rhs, seed=None, **details) -> "CheckResult":
        lhs, rhs = float(lhs), float(rhs)
        return cls(name, instance, lhs, rhs, rhs - lhs, "measured", seed, details)

    @property
    def failed(self) -> bool:
        return self.status == "fail"

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(**_unclean(dict(d)))


@dataclass
class Report:
    results: list[CheckResult] = field(default_factory=list)
    ledger: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    timestamp: str = ""

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if r.failed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def dumps(self) -> str:
        """Header record, then one JSON record per check, sorted keys."""
        head = {"kind": "header", "ledger": self.ledger, "config": self.config, "timestamp": self.timestamp}
        lines = [json.dumps(_clean(head), sort_keys=True)]
        lines += [json.dumps({"kind": "check", **r.to_dict()}, sort_keys=True) for r in self.results]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Report":
        rep = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("kind")
            if kind == "header":
                rec = _unclean(rec)
                rep.ledger, rep.config, rep.timestamp = rec["ledger"], rec["config"], rec["timestamp"]
            else:
                rep.results.append(CheckResult.from_dict(rec))
        return rep

    def plot_data(self) -> dict[str, list[tuple[float, float]]]:
        """(lhs, rhs) pairs per measured check family."""
        out: dict[str, list[tuple[float, float]]] = {}
        for r in self.results:
            if r.status == "measured":
                out.setdefault(r.name, []).append((r.lhs, r.rhs))
        return out


def summarize(results: Iterable[CheckResult]) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for r in results:
        s = out.setdefault(r.name, {"pass": 0, "fail": 0, "measured": 0})
        s[r.status] += 1
    return out
