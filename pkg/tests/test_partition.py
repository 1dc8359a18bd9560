import copy
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from bernoulli_decomp.chaining import capped_N
from bernoulli_decomp.chopping import FunctionalParams, chopped_distance, chopped_sup
from bernoulli_decomp.core import IndexSet, PointSet, SparseVector
from bernoulli_decomp.errors import CapacityExceeded, DomainError, PreconditionViolated
from bernoulli_decomp.instances import two_distance_adversarial
from bernoulli_decomp.partition import (
    ConstantLedger,
    FunctionalEvaluator,
    PartitionNode,
    build_partition_tree,
    check_P_conditions,
    functional_path_values,
    greedy_functional_split,
    smart_subsequence,
    trichotomy_split,
    two_distance_split,
)
from bernoulli_decomp.verify import corrupt_p2, normalize_diameter

ZERO = SparseVector({})


def _is_partition(blocks, rows):
    flat = [x for b in blocks for x in b]
    return sorted(flat) == sorted(rows) and len(flat) == len(set(flat))


def test_greedy_single_ball():
    T = PointSet.from_matrix([[0.0], [0.01], [0.02]])
    params = FunctionalParams(IndexSet((0,)), ZERO, 0, 2, 4)
    balls, rest = greedy_functional_split(T, params, 2, 0.1)
    assert balls == [[0, 1, 2]] and rest == []


def test_greedy_separated_points_leave_a_remainder_with_a_functional_drop():
    sigma = 1 / 16
    X = np.array([[3 * sigma * q] for q in range(5)])
    T = PointSet.from_matrix(X)
    params = FunctionalParams(IndexSet((0,)), ZERO, 0, 2, 4)
    m = 2
    balls, rest = greedy_functional_split(T, params, m, sigma)
    assert rest and _is_partition(balls + [rest], range(5))
    F_T = chopped_sup(T, params).value
    drop = sigma * math.sqrt(math.log(m))
    for size in range(1, len(rest) + 1):
        for D in itertools.combinations(rest, size):
            sub = T.subset(D)
            diam = max(chopped_distance(s, t, params) for s in sub for t in sub)
            if diam <= sigma:
                assert chopped_sup(sub, params).value <= F_T - drop + 1e-12


def test_greedy_precondition():
    T = PointSet.from_matrix([[0.0], [1.0]])
    with pytest.raises(PreconditionViolated):
        greedy_functional_split(T, FunctionalParams(IndexSet((0,)), ZERO, 0, 0, 4), 16, 0.01)


def _two_distance_instance():
    # coordinate 0 almost constant, coordinate 1 spread out
    X = np.array([[0.001 * (q % 2), 0.1 * q] for q in range(8)])
    return PointSet.from_matrix(X)


def test_two_distance_single_piece():
    T = PointSet.from_matrix([[0.0, 0.0], [0.001, 0.002]])
    J = IndexSet((0, 1))
    pieces, rest = two_distance_split(T, J, IndexSet((0,)), T[0], T[0], 0, 1, 4, 0.15)
    assert pieces == [[0, 1]] and rest == []


def test_two_distance_phenomenon():
    T = _two_distance_instance()
    J, Jp = IndexSet((0, 1)), IndexSet((0,))
    u = up = T[0]
    sigma, m = 0.15, 4
    ledger = ConstantLedger()
    pieces, rest = two_distance_split(T, J, Jp, u, up, 0, 1, m, sigma, 4, ledger)
    assert _is_partition(pieces + [rest], range(len(T)))
    assert len(pieces) == m and rest
    # the small distance (coordinate 0 only) sees no spread at all
    dJp = max(chopped_distance(s, t, FunctionalParams(Jp, u, 0, 2, 4)) for s in T for t in T)
    assert dJp <= 0.01
    # exact functional drop on the remainder
    F_rest = chopped_sup(T.subset(rest), FunctionalParams(Jp, up, 3, 3, 4)).value
    F_all = chopped_sup(T, FunctionalParams(J, u, 0, 2, 4)).value
    assert F_rest < F_all
    rec = [r for r in ledger.measured if r["name"] == "two_distance_drop"]
    assert rec and rec[0]["lhs"] == pytest.approx(F_rest, abs=1e-12)


def test_two_distance_preconditions():
    T = _two_distance_instance()
    J = IndexSet((0, 1))
    with pytest.raises(PreconditionViolated) as err:
        two_distance_split(T, IndexSet((0,)), J, T[0], T[0], 0, 1, 4, 0.15)
    assert any("subset" in v[0] for v in err.value.violations)
    with pytest.raises(PreconditionViolated):
        two_distance_split(T, J, IndexSet((0,)), T[0], T[0], 0, 1, 4, 0.01)


def _node(T, j=0, k=0, n=1):
    return PartitionNode(tuple(range(len(T))), n, j, k, 0, 0, T[0], T.ambient, "hold")


def test_trichotomy_trivial_cases():
    T = PointSet.from_matrix([[0.3, 0.1]])
    assert trichotomy_split(T, _node(T), 1) == [([0], "C3", {"j": 1})]
    T = PointSet.from_matrix([[0.0, 0.0], [1e-4, 0.0], [0.0, 2e-4]])
    out = trichotomy_split(T, _node(T), 1)
    assert [kind for _, kind, _ in out] == ["C3"]
    with pytest.raises(PreconditionViolated):
        bad = _node(T)
        bad.p = 1
        trichotomy_split(T, bad, 1)


def test_trichotomy_adversarial_split_has_a_positive_exact_drop():
    T = normalize_diameter(two_distance_adversarial(np.random.default_rng(3), 10, 1, 2))
    tree = build_partition_tree(T, 0, 2, 4)
    drops = []
    for node, parent in tree.nodes():
        if node.kind not in ("C1", "C2"):
            continue
        F_parent = chopped_sup(T.subset(parent.block), FunctionalParams(parent.J, parent.u, parent.k, parent.j, 4)).value
        F_node = chopped_sup(T.subset(node.block), FunctionalParams(node.J, node.u, node.k, node.j, 4)).value
        drops.append(F_parent - F_node)
    assert drops and max(drops) > 0


def test_build_examples():
    single = PointSet.from_matrix([[0.2, 0.1]])
    tree = build_partition_tree(single, 0, 2, 3)
    assert check_P_conditions(tree) == []
    assert all(node.kind in ("root", "hold", "C3") for node, _ in tree.nodes())
    T = PointSet.from_matrix([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    tree = build_partition_tree(T, 0, 2, 3)
    assert check_P_conditions(tree) == []
    for n in range(4):
        assert len(tree.level(n)) <= capped_N(n, len(T))


def test_build_errors():
    T = PointSet.from_matrix([[0.0], [0.5]])
    with pytest.raises(DomainError):
        build_partition_tree(T, 0, 1, 3)
    with pytest.raises(CapacityExceeded):
        build_partition_tree(T, 0, 2, 20)
    with pytest.raises(PreconditionViolated):
        build_partition_tree(PointSet.from_matrix([[0.0], [3.0]]), 0, 2, 3)
    with pytest.raises(PreconditionViolated):
        build_partition_tree(T, 0, 2, 3, ConstantLedger().override({"L3": 0.0}))
    with pytest.raises(DomainError):
        ConstantLedger().override({"L99": 1.0})


def _tree(seed=0, n=10):
    rng = np.random.default_rng(seed)
    T = normalize_diameter(PointSet.from_matrix(rng.normal(size=(n, 3)) * (rng.random((n, 3)) < 0.7)))
    return build_partition_tree(T, 0, 2, 4)


def test_corrupted_j_trips_exactly_p2():
    for seed in range(10):
        tree = copy.deepcopy(_tree(seed))
        if corrupt_p2(tree):
            break
    else:
        pytest.fail("no leaf admits the corruption")
    conds = {v.condition for v in check_P_conditions(tree)}
    assert conds == {"P2"}


def test_p1_node_with_foreign_u_trips_p6():
    tree = _tree(0, 12)
    T = tree.T
    for node, parent in tree.nodes():
        if parent is not None and parent.p == 0 and len(parent.block) < len(T):
            outside = next(x for x in range(len(T)) if x not in parent.block)
            node.p, node.u_row, node.u = 1, outside, T[outside]
            break
    else:
        pytest.fail("no node below a proper p = 0 block")
    assert "P6" in {v.condition for v in check_P_conditions(tree)}


def test_ledger_round_trip():
    led = ConstantLedger().override({"L5": 3.0})
    led.record("x", 1.0, 2.0, node="root")
    back = ConstantLedger.from_dict(led.to_dict())
    assert back.constants == led.constants and back.measured == led.measured
    assert back.summary() == {"x": {"count": 1, "holds": 1}}


def test_tree_serializes_ids():
    tree = _tree(1, 6)
    d = tree.to_dict()
    assert d["r"] == 4 and sorted(d["root"]["block"]) == sorted(tree.T.ids)


def test_functional_path_values_decrease_off_p1_edges():
    tree = _tree(2, 8)
    ev = FunctionalEvaluator(tree.T, tree.r, exact_limit=22)
    kinds = {node.path_str: node.p for node, _ in tree.nodes()}
    for path, F, F_parent in functional_path_values(tree, ev):
        if kinds[path] != 1:
            assert F <= F_parent + 1e-9


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(1, 14), st.integers(1, 4))
def test_random_trees_satisfy_every_condition(seed, n, d):
    rng = np.random.default_rng(seed)
    T = normalize_diameter(PointSet.from_matrix(rng.normal(size=(n, d))))
    tree = build_partition_tree(T, 0, 2, 4)
    assert check_P_conditions(tree) == []


def test_smart_subsequence_examples():
    assert tuple(smart_subsequence([1, 0.5, 0.25, 0.125], 2.0)) == (0,)
    assert tuple(smart_subsequence([3.0] * 5, 2.0)) == (0, 1, 2, 3, 4)
    assert tuple(smart_subsequence([7.0], 4.0)) == (0,)
    with pytest.raises(DomainError):
        smart_subsequence([1.0], 1.0)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=25), st.sampled_from([1.5, 2.0, 4.0]))
def test_smart_subsequence_bound(a, alpha):
    V = smart_subsequence(a, alpha)
    assert list(V) == oracles.smart_subsequence(a, alpha)
    assert math.fsum(a) <= 2 * alpha / (alpha - 1) * math.fsum(a[m] for m in V) * (1 + 1e-12)
