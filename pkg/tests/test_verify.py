import math

import numpy as np
import pytest

from bernoulli_decomp.core import PointSet
from bernoulli_decomp.errors import ConfigError, DomainError
from bernoulli_decomp.results import CheckResult, Report, summarize
from bernoulli_decomp.verify import (
    FAULTS,
    SuiteConfig,
    bernstein_chaining_bound,
    concentration_check,
    run_inequality_suite,
)


@pytest.fixture(scope="module")
def default_report():
    return run_inequality_suite(SuiteConfig(seed=0))


def test_default_suite_passes(default_report):
    assert default_report.failures == []
    names = {r.name for r in default_report.results}
    for required in ("diameter_vs_b", "chopping_telescoping", "P2", "pi_assignment", "l1_37M", "ledger_constants"):
        assert required in names


def test_report_is_sorted_and_deterministic(default_report):
    names = [r.name for r in default_report.results]
    assert names == sorted(names)
    again = run_inequality_suite(SuiteConfig(seed=0))
    assert again.dumps() == default_report.dumps()


def test_report_round_trip(default_report):
    back = Report.loads(default_report.dumps())
    assert back.dumps() == default_report.dumps()
    assert set(default_report.plot_data()) >= {"concentration", "sudakov_ratio"}


@pytest.mark.parametrize("fault", sorted(FAULTS))
def test_each_fault_trips_exactly_its_check(fault):
    rep = run_inequality_suite(SuiteConfig(seed=1, fault=fault))
    assert {r.name for r in rep.failures} == {FAULTS[fault]}


@pytest.mark.parametrize("suite", ["chopping", "partition"])
def test_sub_suites(suite):
    rep = run_inequality_suite(SuiteConfig(suite=suite, seed=2, instances=4, tree_instances=3))
    assert rep.ok and rep.results


@pytest.mark.parametrize(
    "changes", [{"suite": "nope"}, {"fault": "nope"}, {"kappa": 1}, {"instances": 0}, {"ledger": {"L42": 1.0}}]
)
def test_config_validation(changes):
    with pytest.raises(ConfigError):
        SuiteConfig(**changes).validate()


def test_concentration_examples():
    res = concentration_check(PointSet.from_matrix([[1.0, 2.0]]), 1000, 0)
    assert res.details["tails"] == [0.0, 0.0, 0.0] and res.status == "measured"
    res = concentration_check(PointSet.from_matrix([[1.0, 0.0], [0.0, 1.0]]), 20_000, 3)
    # S = max(eps_1, eps_2) - eps_1 in {0, 2}, E S = 1/2, sigma = sqrt 2
    assert res.details["sigma"] == pytest.approx(math.sqrt(2))
    assert res.details["tails"][2] == 0.0
    tails = res.details["tails"]
    assert tails == sorted(tails, reverse=True)


def test_bernstein_bound():
    assert bernstein_chaining_bound(PointSet.from_matrix([[0.5]]), 0.25) == 0.0
    X = np.random.default_rng(0).normal(size=(6, 4))
    b1 = bernstein_chaining_bound(PointSet.from_matrix(X), 0.25)
    assert bernstein_chaining_bound(PointSet.from_matrix(3 * X), 0.25) == pytest.approx(3 * b1)
    with pytest.raises(DomainError):
        bernstein_chaining_bound(PointSet.from_matrix(X), 0.9)


def test_check_result_tolerance_and_serialization():
    ok = CheckResult.asserted("x", "i", 1.0 + 1e-12, 1.0)
    bad = CheckResult.asserted("x", "i", 1.1, 1.0)
    assert ok.status == "pass" and bad.failed
    m = CheckResult.measured("y", "i", math.inf, 1.0)
    assert CheckResult.from_dict(m.to_dict()).lhs == math.inf
    assert summarize([ok, bad, m]) == {"x": {"pass": 1, "fail": 1, "measured": 0}, "y": {"pass": 0, "fail": 0, "measured": 1}}
