"""The inequality harness: asserted checks with explicit constants, measured
ratios for the unnamed ones, and seeded fault injection.

Each fault corrupts one ingredient and is expected to trip exactly one named
check:

    phi             -> chopping_telescoping
    grid_endpoint   -> grid_endpoints
    p2_state        -> P2
    pi_assignment   -> pi_assignment
    ledger_constant -> ledger_constants
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .chaining import dudley_bound, gamma_alpha_upper, sudakov_minoration_value
from .chopping import (
    ChoppingGrid,
    FunctionalParams,
    chopped_distance,
    chopped_process,
    chopped_sup,
    functional_diameter,
    grid_distance,
    grid_levels,
    grid_sup,
    chopped_distance_lower_bound,
    phi,
)
from .core import IndexSet, PointSet, SparseVector, pairwise_distances, restricted_l2_distance
from .decomposer import assign_pi, verify_theorem_part
from .errors import ConfigError, DomainError, ExactLimitExceeded
from .instances import (
    l1_vertices,
    lacunary_fan,
    random_small_instance,
    sparse_gaussian_cloud,
    two_distance_adversarial,
)
from .partition import (
    ConstantLedger,
    FunctionalEvaluator,
    PartitionTree,
    build_partition_tree,
    check_P_conditions,
    smart_subsequence,
)
from .results import CheckResult, Report, summarize
from .supremum import (
    EXACT_LIMIT,
    SignProcess,
    abs_map,
    bernoulli_sup_exact,
    bernoulli_sup_mc,
    clamp_map,
    contracted,
    converse_convex_hull_bound,
    exact_expectation,
    gaussian_sup_mc,
    hull_moment_bound,
    process_moment_norm,
    selector_sup_mc,
    soft_threshold_map,
)

FAULTS = {
    "phi": "chopping_telescoping",
    "grid_endpoint": "grid_endpoints",
    "p2_state": "P2",
    "pi_assignment": "pi_assignment",
    "ledger_constant": "ledger_constants",
}
SUITES = ("default", "chopping", "partition")
P_NAMES = ("P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9", "structure")


@dataclass
class SuiteConfig:
    suite: str = "default"
    seed: int = 0
    instances: int = 12
    max_points: int = 8
    max_dim: int = 6
    samples: int = 20_000
    exact_limit: int = EXACT_LIMIT
    kappa: int = 2
    max_level: int = 4
    tree_instances: int = 6
    fault: str | None = None
    ledger: dict = field(default_factory=dict)

    def validate(self) -> "SuiteConfig":
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {SUITES}")
        if self.fault is not None and self.fault not in FAULTS:
            raise ConfigError(f"unknown fault {self.fault!r}; choose from {sorted(FAULTS)}")
        for name in ("instances", "max_points", "max_dim", "samples", "tree_instances", "max_level"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.kappa < 2:
            raise ConfigError("kappa must be >= 2")
        try:
            ConstantLedger().override(self.ledger)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


# --- stand-alone checks ----------------------------------------------------


def concentration_check(T: PointSet, trials: int = 20_000, seed: int = 0, L1: float = 1.0,
                        exact_limit: int = EXACT_LIMIT) -> CheckResult:
    """Empirical P(|S - ES| >= u) at u = sigma, 2 sigma, 3 sigma for
    S = sup_t sum_i (t_i - t0_i) eps_i, with sigma = sup_t ||t - t0||_2 and t0
    the first point, against 2 exp(-u^2 / (L1 sigma^2)).  Measured only."""
    X = T.matrix - T.matrix[0:1]
    sigma = float(np.sqrt((X**2).sum(axis=1)).max())
    ES = bernoulli_sup_exact(T, exact_limit=exact_limit).value
    us = [sigma, 2 * sigma, 3 * sigma]
    if sigma == 0.0:
        tails = [0.0, 0.0, 0.0]
    else:
        draws = []
        for c, size in enumerate(rngmod.chunk_sizes(trials, 8192)):
            g = rngmod.stream(seed, c)
            eps = g.integers(0, 2, size=(size, X.shape[1])) * 2.0 - 1.0
            draws.append((eps @ X.T).max(axis=1))
        S = np.concatenate(draws)
        tails = [float(np.mean(np.abs(S - ES) >= u)) for u in us]
    bounds = [2 * math.exp(-(u * u) / (L1 * sigma * sigma)) if sigma > 0 else 0.0 for u in us]
    worst = max(range(3), key=lambda k: tails[k] - bounds[k])
    return CheckResult.measured(
        "concentration", f"|T|={len(T)}", tails[worst], bounds[worst], seed,
        tails=tails, bounds=bounds, sigma=sigma, ES=ES, trials=trials,
    )


def bernstein_chaining_bound(T: PointSet, delta: float, depth: int = 4) -> float:
    """sqrt(delta) gamma_2(T, d_2) + gamma_1(T, d_inf), both by greedy sequences."""
    if not 0.0 < delta <= 0.5:
        raise DomainError("delta must lie in (0, 1/2]")
    return math.sqrt(delta) * gamma_alpha_upper(T, "l2", 2.0, depth).value + gamma_alpha_upper(T, "linf", 1.0, depth).value


def corrupted_phi(u: float, v: float, x: float) -> float:
    """A chopping map scaled by (1 - 1e-6): still a contraction, no longer additive."""
    return (1 - 1e-6) * phi(u, v, x)


def corrupted_grid_levels(x: float, k: int, j: int, r: int) -> list[float]:
    """Drops the top level whenever j > k."""
    g = grid_levels(x, k, j, r)
    return g[:-1] if j > k else g


# --- sections --------------------------------------------------------------


def _tag(T: PointSet) -> str:
    return f"|T|={len(T)},d={len(T.ambient)}"


def _core_checks(cfg: SuiteConfig, rng: np.random.Generator) -> list[CheckResult]:
    out = []
    for idx in range(cfg.instances):
        T = random_small_instance(rng, cfg.max_points, cfg.max_dim)
        tag = _tag(T)
        s = cfg.seed * 1000 + idx
        b = bernoulli_sup_exact(T, exact_limit=cfg.exact_limit).value
        diam = float(pairwise_distances(T.matrix).max()) if len(T) > 1 else 0.0
        out.append(CheckResult.asserted("diameter_vs_b", tag, diam, 4 * b))
        sub = [i for i in T.ambient if rng.random() < 0.5]
        out.append(CheckResult.asserted("restriction_monotone", tag, bernoulli_sup_exact(T, sub).value, b))
        shift = T[int(rng.integers(len(T)))]
        shifted = PointSet(tuple(SparseVector((t - shift).entries, id=t.id) for t in T), T.ambient)
        out.append(CheckResult.asserted("translation_invariance", tag, abs(bernoulli_sup_exact(shifted).value - b), 0.0))
        for name, fn in (("clamp", clamp_map(0.5)), ("abs", abs_map()), ("soft", soft_threshold_map(0.3))):
            out.append(CheckResult.asserted("contraction", f"{tag},{name}", bernoulli_sup_exact(contracted(T, fn)).value, b))
        g = gaussian_sup_mc(T, cfg.samples, s)
        out.append(CheckResult.asserted("gaussian_domination", tag, math.sqrt(2 / math.pi) * b - 5 * g.stderr, g.value, seed=s))
        mc = bernoulli_sup_mc(T, None, cfg.samples, s)
        out.append(CheckResult.asserted("mc_consistency", tag, abs(mc.value - b), 4 * mc.stderr, seed=s))
        reps = list(T)
        out.append(CheckResult.asserted("converse_hull_bound", tag, b,
                                        converse_convex_hull_bound(hull_moment_bound(reps), len(reps))))
        t = T[int(rng.integers(len(T)))]
        if t.entries:
            out.append(CheckResult.measured("khintchine_ratio", tag, process_moment_norm(t, 4.0), 2 * t.norm()))
        if len(T) > 1:
            D = pairwise_distances(T.matrix)
            a = float(D[np.triu_indices(len(T), 1)].min())
            binf = float(pairwise_distances(T.matrix, p=math.inf).max())
            if a > 0:
                out.append(CheckResult.measured("sudakov_ratio", tag, sudakov_minoration_value(len(T), a, binf), b))
            gam = gamma_alpha_upper(T, "l2", 2.0, 4).value
            out.append(CheckResult.measured("gaussian_vs_gamma2", tag, g.value, gam, seed=s))
            out.append(CheckResult.measured("gamma2_vs_dudley", tag, gam, dudley_bound(T)))
            sel = selector_sup_mc(T, 0.25, cfg.samples, s)
            out.append(CheckResult.measured("selector_vs_bernstein", tag, sel.value, bernstein_chaining_bound(T, 0.25), seed=s))
        out.append(concentration_check(T, min(cfg.samples, 20_000), s, exact_limit=cfg.exact_limit))
    return out


def _random_params(rng, T: PointSet, r: int, max_k: int = 1, max_extra: int = 1) -> FunctionalParams:
    J = IndexSet(tuple(i for i in T.ambient if rng.random() < 0.7) or tuple(T.ambient)[:1])
    k = int(rng.integers(0, max_k + 1))
    j = k + int(rng.integers(0, max_extra + 1))
    u = T[int(rng.integers(len(T)))]
    return FunctionalParams(J, u, k, j, r)


def _chopping_checks(cfg: SuiteConfig, rng: np.random.Generator, phi_fn: Callable, grid_fn: Callable) -> list[CheckResult]:
    out = []
    for idx in range(cfg.instances * 4):
        k = int(rng.integers(2, 8))
        grid = np.sort(rng.uniform(-2, 2, size=k + 1))
        if np.any(np.diff(grid) <= 0):
            continue
        x, y = rng.uniform(-3, 3, size=2)
        parts_x = [phi_fn(a, c, x) for a, c in zip(grid[:-1], grid[1:])]
        parts_y = [phi_fn(a, c, y) for a, c in zip(grid[:-1], grid[1:])]
        whole_x, whole_y = phi(grid[0], grid[-1], x), phi(grid[0], grid[-1], y)
        l1 = sum(abs(p - q) for p, q in zip(parts_x, parts_y))
        tele = max(abs(math.fsum(parts_x) - whole_x), abs(l1 - abs(whole_x - whole_y)))
        tag = f"grid{idx}"
        out.append(CheckResult.asserted("chopping_telescoping", tag, tele, 0.0, tol=1e-12))
        out.append(CheckResult.asserted("chopping_l1_domination", tag, l1, abs(x - y), tol=1e-12))
        out.append(CheckResult.asserted("chopping_l2_domination", tag, math.fsum(p * p for p in parts_x), x * x, tol=1e-12))
    for idx in range(cfg.instances):
        x = float(rng.uniform(-2, 2))
        r = 2 ** int(rng.integers(2, 4))
        k = int(rng.integers(0, 3))
        j = k + int(rng.integers(0, 3))
        jp = j + int(rng.integers(1, 3))
        g, gp, g0 = grid_fn(x, k, j, r), grid_fn(x, k, jp, r), grid_fn(x, k, k, r)
        err = max(abs(g[0] - gp[0]), abs(g[-1] - gp[-1]), abs(len(g0) - 8))
        out.append(CheckResult.asserted("grid_endpoints", f"x={x:.4f},k={k},j={j}", err, 0.0))
    r = 2**cfg.kappa
    for idx in range(cfg.instances):
        T = random_small_instance(rng, min(cfg.max_points, 6), min(cfg.max_dim, 4))
        tag = _tag(T)
        p = _random_params(rng, T, r)
        b = bernoulli_sup_exact(T, p.J, cfg.exact_limit).value
        Jp = IndexSet(tuple(i for i in p.J if rng.random() < 0.7))
        kp = p.k + int(rng.integers(0, 2))
        jp = max(p.j, kp) + int(rng.integers(0, 2))
        p2 = FunctionalParams(Jp, p.u, kp, jp, r)
        try:
            F = chopped_sup(T, p, "exact", exact_limit=cfg.exact_limit).value
            F2 = chopped_sup(T, p2, "exact", exact_limit=cfg.exact_limit).value
        except ExactLimitExceeded:
            continue
        out.append(CheckResult.asserted("functional_le_b", tag, F, b))
        out.append(CheckResult.asserted("functional_monotone", tag, F2, F))
        diam = float(pairwise_distances(T.matrix).max()) if len(T) > 1 else 0.0
        out.append(CheckResult.asserted("chopped_diameter_le_l2", tag, functional_diameter(T, p), diam))
        s, t = T[int(rng.integers(len(T)))], T[int(rng.integers(len(T)))]
        d = chopped_distance(s, t, p)
        out.append(CheckResult.asserted("chopped_distance_le_restricted", tag, d, restricted_l2_distance(s, t, p.J)))
        out.append(CheckResult.asserted("chopped_distance_lower_bound", tag, chopped_distance_lower_bound(s, t, p), d * d))
        # explicit grids: a coarse family, a refinement with the same end points
        G = {i: np.sort(rng.choice(np.linspace(-2, 2, 17), size=4, replace=False)) for i in T.ambient}
        coarse = ChoppingGrid(G, r)
        fine_levels = {i: np.union1d(g, rng.uniform(g[0], g[-1], size=2)) for i, g in G.items()}
        fine = ChoppingGrid(fine_levels, r)
        q = max(int(np.max(np.diff(np.searchsorted(fine_levels[i], G[i])))) for i in G)
        dc, df = grid_distance(s, t, coarse), grid_distance(s, t, fine)
        out.append(CheckResult.asserted("grid_refinement_distance", tag, df, dc))
        out.append(CheckResult.asserted("grid_refinement_multiplicity", tag, dc, math.sqrt(q) * df))
        out.append(CheckResult.asserted("grid_process_le_b", tag, grid_sup(T, coarse, cfg.exact_limit),
                                        bernoulli_sup_exact(T, exact_limit=cfg.exact_limit).value))
    return out


def _tree_instances(cfg: SuiteConfig, rng: np.random.Generator) -> list[PointSet]:
    out = []
    families = ("cloud", "fan", "two_distance", "l1")
    for idx in range(cfg.tree_instances):
        fam = families[idx % len(families)]
        if fam == "cloud":
            T = sparse_gaussian_cloud(rng, int(rng.integers(3, 12)), int(rng.integers(2, 6)), 0.6)
        elif fam == "fan":
            T = lacunary_fan(int(rng.integers(3, 8)), 2.0, int(rng.integers(1, 3)))
        elif fam == "two_distance":
            T = two_distance_adversarial(rng, int(rng.integers(4, 10)), 2, 2)
        else:
            T = l1_vertices(int(rng.integers(2, 5)))
        out.append(normalize_diameter(T))
    return out


def normalize_diameter(T: PointSet) -> PointSet:
    """Rescale by a power of two so that Delta_2(T) <= 1."""
    diam = float(pairwise_distances(T.matrix).max()) if len(T) > 1 else 0.0
    if diam <= 1.0:
        return T
    e = -math.ceil(math.log2(diam))
    while math.ldexp(diam, e) > 1.0:
        e -= 1
    return PointSet(tuple(SparseVector({i: math.ldexp(v, e) for i, v in t.entries.items()}, id=t.id) for t in T), T.ambient)


def _p_group(cond: str) -> str:
    return cond if cond in P_NAMES else "structure"


def corrupt_p2(tree: PartitionTree) -> bool:
    """Lower j of one leaf below its parent's j; returns False if no leaf allows it."""
    for node, parent in tree.nodes():
        if parent is None or node.children or node.p != 0:
            continue
        if parent.j - 1 >= node.k:
            node.j = parent.j - 1
            return True
    return False


def corrupt_pi(tree: PartitionTree) -> bool:
    """Move pi of one freshly split block to a point of its parent outside it."""
    for node, parent in tree.nodes():
        if parent is None or node.p != 0 or node.j <= parent.j:
            continue
        outside = [x for x in parent.block if x not in node.block]
        if not outside:
            continue
        node.pi_row = outside[0]
        node.pi = tree.T[outside[0]]
        stack = [node]
        while stack:
            cur = stack.pop()
            for c in cur.children:
                if c.j == cur.j:
                    c.pi_row, c.pi = cur.pi_row, cur.pi
                stack.append(c)
        return True
    return False


def pi_rule_violations(tree: PartitionTree) -> int:
    bad = 0
    for node, parent in tree.nodes():
        if parent is None:
            bad += node.pi_row != node.u_row
        elif node.j == parent.j:
            bad += node.pi_row != parent.pi_row
        elif node.p == 1:
            bad += node.pi_row != node.u_row
        else:
            bad += node.pi_row not in node.block
    return int(bad)


def _aggregate(results: list[CheckResult], tag: str) -> list[CheckResult]:
    """Keep, per check name, the tightest result (any failure wins)."""
    best: dict[str, CheckResult] = {}
    for r in results:
        cur = best.get(r.name)
        if cur is None or (r.failed and not cur.failed) or (r.failed == cur.failed and r.margin < cur.margin):
            best[r.name] = r
    return [CheckResult(r.name, f"{tag}:{r.instance}", r.lhs, r.rhs, r.margin, r.status, r.seed, r.details)
            for r in best.values()]


def _partition_checks(cfg: SuiteConfig, rng: np.random.Generator, ledger: ConstantLedger) -> list[CheckResult]:
    out = []
    trees = []
    for idx, T in enumerate(_tree_instances(cfg, rng)):
        led = ConstantLedger(dict(ledger.constants))
        tree = build_partition_tree(T, 0, cfg.kappa, cfg.max_level, led)
        trees.append((f"tree{idx}:{_tag(T)}", tree))
    p2_target = None
    if cfg.fault == "p2_state":
        for tag, tree in trees:
            probe = copy.deepcopy(tree)
            if corrupt_p2(probe):
                p2_target = tag
                break
    for tag, tree in trees:
        ev = FunctionalEvaluator(tree.T, tree.r, exact_limit=cfg.exact_limit)
        checked = tree
        if tag == p2_target:
            checked = copy.deepcopy(tree)
            corrupt_p2(checked)
        viol = check_P_conditions(checked, ev if checked is tree else None)
        counts = {name: 0 for name in P_NAMES}
        for v in viol:
            counts[_p_group(v.condition)] += 1
        for name in P_NAMES:
            out.append(CheckResult.asserted(name, tag, counts[name], 0))
        for node, parent in tree.nodes():
            if parent is None or node.p == 1:
                continue
            proc = ev.process(node.block, node.J, node.u, node.k, node.j)
            pproc = ev.process(parent.block, parent.J, parent.u, parent.k, parent.j)
            if max(proc.compress().effective_coordinates, pproc.compress().effective_coordinates) > 16:
                continue
            Fa = exact_expectation(proc.compress())
            Fp = exact_expectation(pproc.compress())
            out.append(CheckResult.asserted("functional_path_monotone", f"{tag}:{node.path_str}", Fa, Fp))
        assign_pi(tree, check=False)
        if cfg.fault == "pi_assignment":
            if corrupt_pi(tree):
                cfg = _consumed(cfg)
        out.append(CheckResult.asserted("pi_assignment", tag, pi_rule_violations(tree), 0))
        out.extend(_aggregate(verify_theorem_part(tree), tag))
        for rec in tree.ledger.measured:
            if "lhs" in rec:
                out.append(CheckResult.measured(rec["name"], f"{tag}:{rec.get('node', '')}", rec["lhs"], rec["rhs"]))
    for idx in range(cfg.instances * 4):
        a = list(np.exp(rng.normal(size=int(rng.integers(1, 30)))))
        alpha = float(rng.choice([1.5, 2.0, 4.0]))
        V = smart_subsequence(a, alpha)
        out.append(CheckResult.asserted("smart_subsequence", f"seq{idx},alpha={alpha}", math.fsum(a),
                                        2 * alpha / (alpha - 1) * math.fsum(a[m] for m in V)))
    return out


def _consumed(cfg: SuiteConfig) -> SuiteConfig:
    """A copy with the fault cleared, so a corruption is injected only once."""
    c = copy.copy(cfg)
    c.fault = None
    return c


def run_inequality_suite(config: SuiteConfig | None = None, timestamp: str = "") -> Report:
    cfg = (config or SuiteConfig()).validate()
    ledger = ConstantLedger().override(cfg.ledger)
    results: list[CheckResult] = []
    rng = np.random.default_rng(cfg.seed)
    phi_fn = corrupted_phi if cfg.fault == "phi" else phi
    grid_fn = corrupted_grid_levels if cfg.fault == "grid_endpoint" else grid_levels
    if cfg.suite == "default":
        results += _core_checks(cfg, rng)
    if cfg.suite in ("default", "chopping"):
        results += _chopping_checks(cfg, rng, phi_fn, grid_fn)
    if cfg.suite in ("default", "partition"):
        results += _partition_checks(cfg, rng, ledger)
        checked = ledger.override({"L7": -1.0}) if cfg.fault == "ledger_constant" else ledger
        results.append(CheckResult.asserted("ledger_constants", "configured", len(checked.problems()), 0))
    results.sort(key=lambda r: r.name)
    conf = asdict(cfg)
    return Report(results, ledger.to_dict(), conf, timestamp)


__all__ = [
    "CheckResult",
    "Report",
    "SuiteConfig",
    "FAULTS",
    "SUITES",
    "run_inequality_suite",
    "concentration_check",
    "bernstein_chaining_bound",
    "summarize",
]
