"""Command-line entry point: ``sup``, ``decompose``, ``verify`` and ``gamma``.

Exit codes: 0 ok, 1 asserted check failed, 2 parse or configuration error,
3 capacity or exact-limit exceeded, 4 precondition violated.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .chaining import gamma_alpha_upper
from .core import read_point_set
from .decomposer import bernoulli_conjecture_pipeline, verify_theorem_part
from .errors import CapacityExceeded, ConfigError, ExactLimitExceeded, ParseError, PreconditionViolated
from .partition import ConstantLedger
from .results import Report
from .supremum import EXACT_LIMIT, bernoulli_sup_exact, bernoulli_sup_mc
from .verify import FAULTS, SUITES, SuiteConfig, run_inequality_suite

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_CAPACITY, EXIT_PRECONDITION = 0, 1, 2, 3, 4


@dataclass
class Config:
    kappa: int = 2
    max_level: int = 4
    exact_limit: int = EXACT_LIMIT
    samples: int = 100_000
    seed: int = 0
    ledger: dict[str, float] = field(default_factory=dict)

    def validate(self) -> "Config":
        if self.kappa < 2:
            raise ConfigError("kappa must be >= 2")
        if self.max_level < 1:
            raise ConfigError("max_level must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        try:
            ConstantLedger().override(self.ledger)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; ``ledger.L5 = 2`` sets a constant."""
    out: dict = {"ledger": {}}
    names = {f.name for f in fields(Config)} - {"ledger"}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("ledger."):
                out["ledger"][key[len("ledger."):]] = float(value)
            elif key in names:
                out[key] = int(value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value {value!r}") from exc
    return out


def _ledger_pairs(pairs: list[str] | None) -> dict[str, float]:
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise ConfigError(f"--ledger expects NAME=VALUE, got {p!r}")
        k, v = p.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise ConfigError(f"bad ledger value {v!r}") from exc
    return out


def resolve_config(args: argparse.Namespace) -> Config:
    """Defaults, then the config file, then explicit flags."""
    values: dict = {"ledger": {}}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        values = parse_config_text(text)
    for name in ("kappa", "max_level", "exact_limit", "samples", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    values["ledger"] = {**values.get("ledger", {}), **_ledger_pairs(getattr(args, "ledger", None))}
    return Config(**values).validate()


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_sup(args, cfg: Config) -> int:
    T = read_point_set(args.input)
    J = None if args.set is None else [int(x) for x in args.set.split(",") if x.strip()]
    if args.mode == "exact":
        est = bernoulli_sup_exact(T, J, cfg.exact_limit)
    else:
        est = bernoulli_sup_mc(T, J, cfg.samples, cfg.seed)
    _emit({"kind": "sup", **est.to_dict()})
    return EXIT_OK


def cmd_decompose(args, cfg: Config) -> int:
    T = read_point_set(args.input)
    ledger = ConstantLedger().override(cfg.ledger)
    dec = bernoulli_conjecture_pipeline(T, cfg.kappa, cfg.max_level, cfg.exact_limit, cfg.samples, cfg.seed, ledger)
    checks = verify_theorem_part(dec.tree) if dec.tree is not None else []
    report = Report(sorted(checks, key=lambda r: r.name), ledger.to_dict(), asdict(cfg))
    doc = {"decomposition": dec.to_dict(), "report": [r.to_dict() for r in report.results]}
    _write(args.out, json.dumps(doc, sort_keys=True) + "\n")
    _emit({"kind": "decompose", "points": len(dec.entries), "exact": dec.exact(), "l1_sup": dec.l1_sup,
           "gamma2_upper_T2": dec.gamma2_upper_T2, "failures": len(report.failures), "out": args.out})
    return EXIT_OK if report.ok else EXIT_CHECK


def cmd_verify(args, cfg: Config) -> int:
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {SUITES}")
    scfg = SuiteConfig(suite=args.suite, seed=cfg.seed, samples=min(cfg.samples, 20_000), exact_limit=cfg.exact_limit,
                       kappa=cfg.kappa, max_level=cfg.max_level, fault=args.fault, ledger=dict(cfg.ledger))
    report = run_inequality_suite(scfg)
    _write(args.out, report.dumps())
    if args.plot_data:
        Path(args.plot_data).write_text(json.dumps(report.plot_data(), sort_keys=True) + "\n")
    if args.out is not None:
        _emit({"kind": "verify", "checks": len(report.results), "failures": len(report.failures), "out": args.out})
    return EXIT_OK if report.ok else EXIT_CHECK


def cmd_gamma(args, cfg: Config) -> int:
    T = read_point_set(args.input)
    res = gamma_alpha_upper(T, args.metric, args.alpha, args.depth)
    _emit({"kind": "gamma", "value": res.value, "complete": res.complete, "alpha": args.alpha,
           "metric": args.metric, "depth": args.depth, "levels": res.sequence.to_ids()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--kappa", type=int)
    common.add_argument("--max-level", dest="max_level", type=int)
    common.add_argument("--exact-limit", dest="exact_limit", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--ledger", action="append", metavar="NAME=VALUE", help="override a ledger constant")

    parser = argparse.ArgumentParser(prog="bernoulli-decomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sup", parents=[common], help="expected supremum of the Bernoulli process")
    p.add_argument("input")
    p.add_argument("--set", help="comma-separated coordinate subset J")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.set_defaults(func=cmd_sup)

    p = sub.add_parser("decompose", parents=[common], help="build the T1 + T2 decomposition")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", parents=[common], help="run the inequality harness")
    p.add_argument("--suite", default="default")
    p.add_argument("--fault", choices=sorted(FAULTS))
    p.add_argument("--out")
    p.add_argument("--plot-data", dest="plot_data")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gamma", parents=[common], help="greedy upper bound on gamma_alpha")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--metric", choices=("l2", "linf"), default="l2")
    p.add_argument("--depth", type=int, default=4)
    p.set_defaults(func=cmd_gamma)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (ParseError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ExactLimitExceeded, CapacityExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except PreconditionViolated as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        for v in exc.violations:
            rec = v.to_dict() if hasattr(v, "to_dict") else list(v) if isinstance(v, tuple) else str(v)
            print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
