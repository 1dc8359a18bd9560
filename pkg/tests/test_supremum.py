import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import small_matrices
from bernoulli_decomp.core import PointSet, SparseVector
from bernoulli_decomp.errors import DomainError, ExactLimitExceeded
from bernoulli_decomp.supremum import (
    SignProcess,
    SupEstimate,
    abs_map,
    bernoulli_sup,
    bernoulli_sup_exact,
    bernoulli_sup_mc,
    clamp_map,
    contracted,
    converse_convex_hull_bound,
    exact_expectation,
    gaussian_sup_mc,
    hull_moment_bound,
    mc_expectation,
    process_moment_norm,
    selector_sup_mc,
    soft_threshold_map,
)

e1, e2 = SparseVector.basis(0), SparseVector.basis(1)
PM = PointSet((e1, -e1))
E12 = PointSet((e1, e2))


def test_exact_examples():
    assert bernoulli_sup_exact(PointSet((SparseVector({0: 3.0}),))).value == 0.0
    assert bernoulli_sup_exact(PM).value == 1.0
    assert bernoulli_sup_exact(E12).value == 0.5


def test_mc_examples():
    est = bernoulli_sup_mc(PM, samples=1000, seed=3)
    assert est.value == 1.0 and est.stderr == 0.0
    est = bernoulli_sup_mc(E12, samples=100_000, seed=1)
    assert abs(est.value - 0.5) <= 4 * est.stderr
    again = bernoulli_sup_mc(E12, samples=100_000, seed=1)
    assert again == est


def test_mc_is_independent_of_chunking():
    proc = SignProcess.plain(np.array([[1.0, 0.5], [0.0, -1.0], [0.3, 0.3]]))
    a = mc_expectation(proc, 10_000, 5, chunk=10_000)
    b = mc_expectation(proc, 10_000, 5, chunk=10_000)
    assert a == b


def test_gaussian_examples():
    est = gaussian_sup_mc(PointSet((e1,)), 1000, 0)
    assert abs(est.value) <= 4 * est.stderr
    est = gaussian_sup_mc(PM, 100_000, 2)
    assert abs(est.value - math.sqrt(2 / math.pi)) <= 4 * est.stderr


def test_selector_examples():
    assert selector_sup_mc(PointSet((SparseVector({}),), ), 0.3, 1000, 0).value == 0.0
    est = selector_sup_mc(PointSet((e1,)), 0.5, 100_000, 4)
    assert abs(est.value - 0.5) <= 4 * est.stderr
    with pytest.raises(DomainError):
        selector_sup_mc(PM, 0.7, 10, 0)


def test_selector_half_is_half_bernoulli_of_symmetrized(rng):
    X = rng.normal(size=(4, 3))
    T = PointSet.from_matrix(X)
    sym = PointSet.from_matrix(np.vstack([X, -X]))
    est = selector_sup_mc(T, 0.5, 100_000, 9)
    assert abs(est.value - 0.5 * bernoulli_sup_exact(sym).value) <= 4 * est.stderr


def test_moment_norm_examples(rng):
    assert process_moment_norm(e1, 3.0) == pytest.approx(1.0, abs=1e-12)
    assert process_moment_norm(e1 + e2, 2.0) == pytest.approx(math.sqrt(2), abs=1e-12)
    t = rng.normal(size=5)
    v = SparseVector(dict(enumerate(t)))
    assert process_moment_norm(v, 4.0) == pytest.approx(oracles.moment_norm(list(t), 4.0), rel=1e-12)


def test_converse_hull_bound():
    assert converse_convex_hull_bound(0.0, 5) == 0.0
    assert converse_convex_hull_bound(2.0, 5) == pytest.approx(2 * converse_convex_hull_bound(1.0, 5), rel=1e-12)
    X = np.array([[1.0, 0.0, 0.5], [0.0, -1.0, 0.5], [0.3, 0.2, -0.7]])
    T = PointSet.from_matrix(X)
    assert converse_convex_hull_bound(hull_moment_bound(list(T)), len(T)) >= bernoulli_sup_exact(T).value


def test_exact_limit():
    T = PointSet.from_matrix(np.random.default_rng(0).normal(size=(3, 30)))
    with pytest.raises(ExactLimitExceeded):
        bernoulli_sup_exact(T)
    assert bernoulli_sup(T, samples=2000).method == "monte-carlo"


def test_multiplicity_enumeration_matches_expanded():
    cols = np.array([[1.0, 0.5], [0.0, -1.0], [0.3, 0.25]])
    merged = SignProcess(cols, np.array([3, 2]))
    expanded = SignProcess.plain(np.repeat(cols, [3, 2], axis=1))
    assert exact_expectation(merged) == pytest.approx(exact_expectation(expanded), abs=1e-12)


def test_sup_estimate_round_trip():
    est = SupEstimate(0.25, "monte-carlo", 10, 0.01, 3)
    assert SupEstimate.from_dict(est.to_dict()) == est
    with pytest.raises(ValueError):
        SupEstimate(0.1, "exact", 0, 0.5)


@given(small_matrices(max_points=5, max_dim=5))
def test_exact_matches_brute_force(X):
    got = bernoulli_sup_exact(PointSet.from_matrix(X)).value
    assert got == pytest.approx(oracles.bernoulli_sup(X.tolist()), abs=1e-9)


@given(small_matrices(), st.data())
def test_restriction_diameter_translation(X, data):
    T = PointSet.from_matrix(X)
    b = bernoulli_sup_exact(T).value
    J = data.draw(st.lists(st.sampled_from(list(T.ambient)), unique=True))
    assert bernoulli_sup_exact(T, J).value <= b + 1e-9
    diam = max(oracles.l2(a, c) for a in X.tolist() for c in X.tolist())
    assert diam <= 4 * b + 1e-9
    shift = X[data.draw(st.integers(0, len(X) - 1))]
    assert bernoulli_sup_exact(PointSet.from_matrix(X - shift)).value == pytest.approx(b, abs=1e-9)


@given(small_matrices(), st.sampled_from([clamp_map(0.7), abs_map(), soft_threshold_map(0.4)]))
def test_contraction_principle(X, phi):
    T = PointSet.from_matrix(X)
    assert bernoulli_sup_exact(contracted(T, phi)).value <= bernoulli_sup_exact(T).value + 1e-9
