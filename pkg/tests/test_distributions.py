import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatwalk.distributions import (
    CATALOG_LATTICE, BudgetExceeded, DistributionError, convolve_pmfs, convolve_power,
    make_step_distribution, moment_abs, sample_walk,
)


def test_rademacher():
    d = make_step_distribution("rademacher")
    assert sorted(d.support.ravel()) == [-1.0, 1.0]
    assert np.allclose(d.probs, 0.5)
    assert np.allclose(d.cov, [[1.0]])


def test_asym_lattice():
    d = make_step_distribution("asym_lattice")
    pmf = dict(zip(d.support.ravel(), d.probs))
    assert pmf == pytest.approx({-1.0: 2 / 3, 2.0: 1 / 3})
    assert abs(d.mean[0]) <= 1e-12
    assert d.cov[0, 0] == pytest.approx(2.0, abs=1e-14)


def test_pareto_flags_infinite_third_moment():
    d = make_step_distribution({"name": "pareto_sym", "params": {"alpha": 2.5}})
    assert not d.is_lattice
    assert np.isfinite(d.cov).all()
    assert moment_abs(d, 3.0) == math.inf
    assert moment_abs(d, 2.4) < math.inf


def test_lattice2d_corr_covariance():
    d = make_step_distribution("lattice2d_corr")
    assert d.dim == 2
    assert np.allclose(d.cov, [[1.0, 0.5], [0.5, 0.5]])
    assert np.all(np.linalg.eigvalsh(d.cov) > 0)


@pytest.mark.parametrize("spec", [
    "nope",
    {"name": "lattice", "params": {"points": [[0], [1]], "probs": [0.5, 0.5]}},  # mean 1/2
    {"name": "lattice", "params": {"points": [[1], [-1]], "probs": [0.5, 0.4]}},  # mass 0.9
    {"name": "lattice", "params": {"points": [[1, 1], [-1, -1]], "probs": [0.5, 0.5]}},  # singular
    {"name": "pareto_sym", "params": {"alpha": 2.0}},
])
def test_rejects_bad_specs(spec):
    with pytest.raises(DistributionError):
        make_step_distribution(spec)


def test_convolve_power_examples():
    rad = make_step_distribution("rademacher")
    assert convolve_power(rad, 2).as_dict() == pytest.approx({(-2.0,): 0.25, (0.0,): 0.5, (2.0,): 0.25})
    assert convolve_power(rad, 1).as_dict() == pytest.approx({(-1.0,): 0.5, (1.0,): 0.5})
    asym = make_step_distribution("asym_lattice")
    assert convolve_power(asym, 2).as_dict() == pytest.approx(
        {(-2.0,): 4 / 9, (1.0,): 4 / 9, (4.0,): 1 / 9}, abs=1e-15)


def test_convolve_power_rejects_continuous_and_budget():
    with pytest.raises(DistributionError):
        convolve_power(make_step_distribution("uniform"), 3)
    with pytest.raises(BudgetExceeded):
        convolve_power(make_step_distribution("lattice2d_corr"), 500, budget=10_000)


@pytest.mark.parametrize("name", CATALOG_LATTICE)
@pytest.mark.parametrize("k", [1, 7, 40])
def test_power_moments(name, k):
    d = make_step_distribution(name)
    pmf = convolve_power(d, k)
    assert float(pmf.masses.sum()) == pytest.approx(1.0, abs=1e-10)
    assert np.abs(pmf.mean()).max() <= 1e-10
    assert np.allclose(pmf.cov(), k * d.cov, atol=1e-8)
    assert len({tuple(p) for p in pmf.support}) == len(pmf.support)


@pytest.mark.parametrize("name", CATALOG_LATTICE)
@given(j=st.integers(1, 12), k=st.integers(1, 12))
def test_power_semigroup(name, j, k):
    d = make_step_distribution(name)
    lhs = convolve_power(d, j + k).as_dict()
    rhs = convolve_pmfs(convolve_power(d, j), convolve_power(d, k)).as_dict()
    assert lhs.keys() == rhs.keys()
    assert max(abs(lhs[p] - rhs[p]) for p in lhs) <= 1e-12


def test_sample_walk_examples():
    g = make_step_distribution({"name": "gaussian", "params": {"cov": [[1, 0], [0, 1]]}})
    S = sample_walk(g, 4, 10**5, seed=1)
    assert np.allclose(np.cov(S.T), 4 * np.eye(2), atol=0.2)
    assert not sample_walk(g, 0, 17, seed=1).any()
    r = make_step_distribution("rademacher")
    S = sample_walk(r, 1, 10**5, seed=2)
    assert abs((S == 1).mean() - 0.5) <= 3 / math.sqrt(1e5)


def test_sample_walk_reproducible():
    d = make_step_distribution("laplace")
    a = sample_walk(d, 5, 40_000, seed=9)
    b = sample_walk(d, 5, 40_000, seed=9)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_walk(d, 5, 40_000, seed=10))


@pytest.mark.parametrize("name", CATALOG_LATTICE)
def test_empirical_pmf_total_variation(name):
    d = make_step_distribution(name)
    k, N = 6, 50_000
    S = sample_walk(d, k, N, seed=3)
    exact = convolve_power(d, k).as_dict()
    keys, counts = np.unique(np.round(S, 9), axis=0, return_counts=True)
    emp = {tuple(p): c / N for p, c in zip(keys, counts)}
    tv = 0.5 * sum(abs(emp.get(p, 0.0) - exact.get(p, 0.0)) for p in set(emp) | set(exact))
    assert tv <= 5 * math.sqrt(len(exact) / N)


def test_moment_examples():
    assert moment_abs(make_step_distribution("rademacher"), 3) == 1.0
    assert moment_abs(make_step_distribution("asym_lattice"), 3) == pytest.approx(10 / 3, rel=1e-15)
    assert moment_abs(make_step_distribution("uniform"), 2) == pytest.approx(1.0, rel=1e-12)
    assert moment_abs(make_step_distribution("laplace"), 2) == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(ValueError):
        moment_abs(make_step_distribution("rademacher"), -1)
