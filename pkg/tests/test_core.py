import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import small_matrices
from bernoulli_decomp.core import (
    IndexSet,
    PointSet,
    SparseVector,
    diameter,
    dump_point_set,
    l2_distance,
    linf_distance,
    parse_point_set,
    restricted_l2_distance,
)
from bernoulli_decomp.errors import DomainError, ParseError

e1, e2 = SparseVector.basis(1), SparseVector.basis(2)


def test_restricted_distance_examples():
    assert restricted_l2_distance(e1, -e1, [1]) == 2.0
    assert restricted_l2_distance(e1, -e1, [2]) == 0.0


def test_restricted_distance_matches_loop(rng):
    s, t = rng.normal(size=5), rng.normal(size=5)
    amb = IndexSet(tuple(range(5)))
    got = restricted_l2_distance(SparseVector.from_dense(s, amb), SparseVector.from_dense(t, amb), amb)
    assert abs(got - oracles.l2(list(s), list(t))) <= 1e-12


def test_diameter_examples(rng):
    assert diameter(PointSet((e1,))) == 0.0
    assert diameter(PointSet((e1, -e1))) == 2.0
    X = rng.normal(size=(8, 3))
    T = PointSet.from_matrix(X)
    assert diameter(T) == pytest.approx(oracles.diameter(X.tolist(), oracles.l2), abs=1e-12)


def test_linf_examples(rng):
    assert linf_distance(e1, e1) == 0.0
    assert linf_distance(e1 + e2, e1 - e2) == 2.0
    s, t = rng.normal(size=6), rng.normal(size=6)
    amb = IndexSet(tuple(range(6)))
    got = linf_distance(SparseVector.from_dense(s, amb), SparseVector.from_dense(t, amb))
    assert got == max(abs(a - b) for a, b in zip(s, t))


def test_sparse_vector_drops_zeros_and_support():
    v = SparseVector({3: 0.0, 1: 2.0})
    assert v.entries == {1: 2.0}
    w = v - SparseVector({1: 2.0})
    assert w.entries == {}
    assert (v + e2).support == IndexSet((1, 2))


def test_index_set_is_sorted_and_unique():
    J = IndexSet.of([3, 1, 3, 2])
    assert tuple(J) == (1, 2, 3)
    assert IndexSet.of([1]).issubset(J)


def test_point_set_rejects_bad_input():
    with pytest.raises(DomainError):
        PointSet(())
    with pytest.raises(DomainError):
        PointSet((e1, e2), IndexSet((1,)))


def test_file_round_trip():
    T = PointSet((SparseVector({0: 1.5}, "a"), SparseVector({2: -0.25}, "b")), IndexSet((0, 1, 2)))
    back = parse_point_set(dump_point_set(T).splitlines())
    assert back.ids == ["a", "b"] and tuple(back.ambient) == (0, 1, 2)
    assert np.array_equal(back.matrix, T.matrix)


@pytest.mark.parametrize("text", ["nope", '{"id": "a"}', '{"id": "a", "coords": {"0": "x"}}', ""])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_point_set([text])


@given(small_matrices(), st.data())
def test_restriction_is_monotone_and_a_pseudometric(X, data):
    T = PointSet.from_matrix(X)
    amb = list(T.ambient)
    J = data.draw(st.lists(st.sampled_from(amb), unique=True))
    for s in T:
        for t in T:
            assert restricted_l2_distance(s, t, J) <= l2_distance(s, t) + 1e-12
            for w in T:
                assert restricted_l2_distance(s, w, J) <= (
                    restricted_l2_distance(s, t, J) + restricted_l2_distance(t, w, J) + 1e-12
                )


@given(small_matrices())
def test_arithmetic_stays_on_operand_supports(X):
    T = PointSet.from_matrix(X)
    for s in T:
        for t in T:
            assert set((s - t).entries) <= set(s.entries) | set(t.entries)
            assert math.isclose((s - t).norm(), l2_distance(s, t), abs_tol=1e-12)
