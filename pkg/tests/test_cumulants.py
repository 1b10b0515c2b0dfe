import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import hermite_e

from chaoscum.cumulants import (
    CumulantReport,
    L_from_cum4,
    cumulant_bound,
    cumulant_report,
    empirical_cumulants,
    exact_cumulant,
    log_cumulant_bound,
    per_term_bound_check,
    quadratic_form_oracle,
)
from chaoscum.diagrams import CapExceededError, count_partitions, matching_lower_bound
from chaoscum.kernels import SymmetricKernel, compute_K, normalize


def quadrature_cumulants(h, max_m):
    """Cumulants of I_q(h) from exact Gauss-Hermite moments.

    I_q(h) is written directly as sum over multisets of multiplicity * h * prod He_c(Z_j)
    and integrated on a tensor grid that is exact for its polynomial degree.
    """
    q, n = h.order, h.dim
    nodes, weights = hermite_e.hermegauss(q * max_m // 2 + 2)
    weights = weights / weights.sum()
    grid = np.array(list(itertools.product(nodes, repeat=n)))
    w = np.prod(np.array(list(itertools.product(weights, repeat=n))), axis=1)
    F = np.zeros(len(grid))
    for key, value in h.items():
        counts = np.bincount(key, minlength=n)
        term = np.full(len(grid), float(value) * SymmetricKernel.multiplicity(key))
        for j, c in enumerate(counts):
            if c:
                term *= hermite_e.hermeval(grid[:, j], [0] * c + [1])
        F += term
    mu = [1.0] + [float(np.sum(w * F**k)) for k in range(1, max_m + 1)]
    kappa = [0.0] * (max_m + 1)
    for k in range(1, max_m + 1):
        kappa[k] = mu[k] - sum(math.comb(k - 1, j - 1) * kappa[j] * mu[k - j] for j in range(1, k))
    return kappa


@pytest.mark.parametrize("q,n,max_m", [(2, 3, 6), (3, 2, 6), (3, 3, 4), (4, 2, 5), (2, 4, 5), (5, 2, 4)])
def test_exact_cumulant_matches_quadrature(q, n, max_m):
    h = normalize(SymmetricKernel.random(q, n, np.random.default_rng(q * 10 + n)))
    kappa = quadrature_cumulants(h, max_m)
    for m in range(1, max_m + 1):
        assert exact_cumulant(h, m) == pytest.approx(kappa[m], rel=1e-8, abs=1e-9)


@given(st.integers(2, 5), st.integers(2, 6), st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_quadratic_form_oracle(n, m, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    A = A + A.T
    got = exact_cumulant(SymmetricKernel.from_matrix(A), m)
    ref = quadratic_form_oracle(A, m)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-10)


@given(st.integers(2, 3), st.integers(2, 3), st.integers(3, 5), st.floats(0.1, 3.0), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_homogeneity(q, n, m, c, seed):
    h = SymmetricKernel.random(q, n, np.random.default_rng(seed))
    assert exact_cumulant(h * c, m) == pytest.approx(c**m * exact_cumulant(h, m), rel=1e-9, abs=1e-9)


def test_atom_values():
    h = SymmetricKernel.atom(2)
    assert [exact_cumulant(h, m) for m in (1, 2, 3, 4)] == pytest.approx([0, 2, 8, 48])
    assert exact_cumulant(SymmetricKernel.atom(3), 2) == 6


def test_odd_total_vanishes():
    h = normalize(SymmetricKernel.random(3, 2, np.random.default_rng(0)))
    assert exact_cumulant(h, 3) == 0.0 and exact_cumulant(h, 5) == 0.0


def test_work_cap():
    h = normalize(SymmetricKernel.random(2, 6, np.random.default_rng(0)))
    with pytest.raises(CapExceededError):
        exact_cumulant(h, 6, work_cap=10)


@pytest.mark.parametrize("q,n,m", [(2, 3, 3), (2, 4, 4), (3, 3, 4), (4, 2, 3), (2, 3, 5)])
def test_per_term_bounds(q, n, m):
    h = normalize(SymmetricKernel.random(q, n, np.random.default_rng(7)))
    checks = per_term_bound_check(h, m)
    assert len(checks) == count_partitions(q, m)
    K = compute_K(h)
    assert all(c.bound == K ** matching_lower_bound(q, m) for c in checks)
    total = sum(c.term for c in checks)
    assert total == pytest.approx(exact_cumulant(h, m), rel=1e-9, abs=1e-12)


def test_cumulant_bound_domain_and_log():
    assert cumulant_bound(2, 3, 0.0) == 0.0
    assert cumulant_bound(2, 4, 1.0) == pytest.approx(math.factorial(4) * 8.0**2)
    assert cumulant_bound(3, 6, 0.3, log=True) == pytest.approx(log_cumulant_bound(3, 6, 0.3))
    with pytest.raises(ValueError):
        cumulant_bound(2, 2, 0.5)
    with pytest.raises(ValueError):
        cumulant_bound(2, 3, 1.5)


def test_L_from_cum4():
    assert L_from_cum4(2, 48.0) == pytest.approx(math.sqrt(48) / 4)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert L_from_cum4(2, -1e-12) == 0.0
    assert rec
    with pytest.raises(ValueError):
        L_from_cum4(2, -1.0)


def test_empirical_cumulants_gaussian():
    x = np.random.default_rng(3).standard_normal(50_000) * 2.0 + 1.0
    res = empirical_cumulants(x, max_m=6, n_boot=50, rng=1)
    assert abs(res.estimates[1] - 1.0) < 5 * res.standard_errors[1]
    assert abs(res.estimates[2] - 4.0) < 5 * res.standard_errors[2]
    for k in (3, 4, 5, 6):
        assert abs(res.estimates[k]) < 5 * res.standard_errors[k]
    assert res.biased == {1: False, 2: False, 3: False, 4: False, 5: True, 6: True}


def test_empirical_cumulants_validation():
    with pytest.raises(ValueError):
        empirical_cumulants(np.zeros(5), max_m=4)
    with pytest.raises(ValueError):
        empirical_cumulants(np.zeros(100), max_m=7)


def test_report_fields_and_json():
    h = SymmetricKernel.hermite_sum(2, 4)
    reps = cumulant_report(h, [2, 3, 4])
    assert [r.m for r in reps] == [2, 3, 4]
    assert reps[0].exact == pytest.approx(2.0) and reps[0].term_bound is None
    r3 = reps[1]
    assert r3.term_bound == pytest.approx(0.5 ** matching_lower_bound(2, 3))
    assert abs(r3.exact) <= r3.extra["count_bound"] <= r3.aggregate_bound
    d = CumulantReport(2, 3, exact=1.0, extra={"biased": True}).to_dict()
    assert d["biased"] is True and "extra" not in d
    assert '"exact": 1.0' in CumulantReport(2, 3, exact=1.0).to_json()
