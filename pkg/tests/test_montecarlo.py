import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import hermite_e

from chaoscum.applications import FbmModel
from chaoscum.kernels import SymmetricKernel, normalize
from chaoscum.montecarlo import (
    RngSpec,
    chaos_sampler,
    draw,
    estimate_tail,
    fbm_variation_sampler,
    gaussian_sampler,
    hermite,
    hermite_sum_sampler,
    hermite_table,
    mdp_curve,
    mdp_trend,
    run_batch,
    sample_fbm_increments,
    wick_evaluate,
    wick_self_test,
)


@pytest.mark.parametrize("k", range(0, 12))
def test_hermite_matches_numpy(k):
    x = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(hermite(k, x), hermite_e.hermeval(x, [0] * k + [1]), rtol=1e-12, atol=1e-9)
    assert hermite_table(k, x)[k] == pytest.approx(hermite(k, x))


def test_hermite_cap():
    with pytest.raises(ValueError):
        hermite(31, 0.5)
    with pytest.raises(ValueError):
        hermite(-1, 0.5)


def test_wick_self_test_and_quadratic_form():
    assert wick_self_test()
    A = np.array([[1.0, 0.5], [0.5, -2.0]])
    Z = np.random.default_rng(0).standard_normal((10, 2))
    ref = np.einsum("si,ij,sj->s", Z, A, Z) - np.trace(A)
    np.testing.assert_allclose(wick_evaluate(SymmetricKernel.from_matrix(A), Z), ref)


def test_wick_single_coordinate_is_hermite():
    Z = np.random.default_rng(1).standard_normal((20, 3))
    h = SymmetricKernel.atom(4, dim=3, index=2)
    np.testing.assert_allclose(wick_evaluate(h, Z), hermite(4, Z[:, 2]))


def test_wick_shape_check():
    with pytest.raises(ValueError):
        wick_evaluate(SymmetricKernel.atom(2, dim=3), np.zeros((4, 2)))


def test_chaos_sampler_moments():
    h = normalize(SymmetricKernel.random(3, 3, np.random.default_rng(2)))
    x = draw(chaos_sampler(h), 200_000, RngSpec(5))
    se_mean = math.sqrt(6 / x.size)
    assert abs(x.mean()) < 5 * se_mean
    assert abs(x.var() - 6.0) < 0.2


@pytest.mark.parametrize("q", [2, 3, 4])
def test_hermite_sum_variance(q):
    x = draw(hermite_sum_sampler(q, 20), 100_000, RngSpec(9, stream=q))
    assert x.var() == pytest.approx(math.factorial(q), rel=0.05)


def test_hermite_sum_q2_matches_direct_sum():
    # the chi-square shortcut and direct polynomial sums agree in law: compare quantiles
    x = draw(hermite_sum_sampler(2, 5), 100_000, RngSpec(1))
    rng = np.random.default_rng(4)
    y = hermite(2, rng.standard_normal((100_000, 5))).sum(axis=1) / math.sqrt(5)
    qs = [0.05, 0.25, 0.5, 0.75, 0.95]
    np.testing.assert_allclose(np.quantile(x, qs), np.quantile(y, qs), atol=0.05)


def test_fbm_increments_covariance():
    model = FbmModel(0.7, 8)
    X = sample_fbm_increments(model, RngSpec(2).generator(), 200_000)
    np.testing.assert_allclose(np.cov(X.T, bias=True), model.covariance(), atol=0.02)


@given(st.integers(0, 2**32), st.integers(1, 5), st.integers(100, 5000), st.integers(50, 2000))
@settings(max_examples=20, deadline=None)
def test_draw_independent_of_workers(seed, workers, n, chunk):
    rng = RngSpec(seed)
    a = draw(gaussian_sampler(), n, rng, workers=1, chunk_size=chunk)
    b = draw(gaussian_sampler(), n, rng, workers=workers, chunk_size=chunk)
    assert a.tobytes() == b.tobytes()


def test_fbm_draw_independent_of_workers():
    s = fbm_variation_sampler(FbmModel(0.3, 64))
    a = draw(s, 40_000, RngSpec(3), workers=1)
    b = draw(s, 40_000, RngSpec(3), workers=4)
    assert a.tobytes() == b.tobytes()


def test_streams_differ():
    a = draw(gaussian_sampler(), 100, RngSpec(1, stream=0))
    b = draw(gaussian_sampler(), 100, RngSpec(1, stream=1))
    assert not np.array_equal(a, b)


def test_rng_spec_validation():
    with pytest.raises(ValueError):
        RngSpec(-1)
    with pytest.raises(ValueError):
        RngSpec(0, algorithm="mt19937")
    assert RngSpec(4, 2).to_dict() == {"seed": 4, "stream": 2, "algorithm": "philox4x64-seedsequence"}


def test_tail_estimate_gaussian():
    est = estimate_tail(gaussian_sampler(), 1.0, 200_000, RngSpec(7))
    assert est.ci_low <= 0.158655 <= est.ci_high
    two = estimate_tail(gaussian_sampler(), 1.0, 200_000, RngSpec(7), two_sided=True, workers=3)
    assert two.ci_low <= 0.317311 <= two.ci_high
    assert estimate_tail(gaussian_sampler(), 1.0, 200_000, RngSpec(7), workers=3) == est


def test_tail_estimate_censored():
    est = estimate_tail(gaussian_sampler(), 50.0, 1000, RngSpec(0))
    assert est.censored and est.hits == 0 and est.ci_high == pytest.approx(3 / 1000)
    with pytest.raises(ValueError):
        estimate_tail(gaussian_sampler(), 1.0, 10, RngSpec(0))


def test_mdp_curve_and_trend():
    scales = {1: 1.0, 2: 2.0, 3: 3.0}
    cells = mdp_curve({k: gaussian_sampler(2.0) for k in scales}, scales, (0.5, 1.0), 200_000, 2, RngSpec(11))
    assert len(cells) == 6
    assert all(c.target == pytest.approx(-c.z**2 / 4) for c in cells)
    assert mdp_trend(cells) == {0.5: "toward", 1.0: "toward"}
    censored = mdp_curve({1: gaussian_sampler()}, {1: 1.0}, (40.0,), 1000, 2, RngSpec(0))
    assert censored[0].censored and censored[0].scaled is None
    assert mdp_trend(censored) == {40.0: "censored"}


def test_run_batch():
    tasks = {"b": (1, lambda g: float(g.standard_normal())), "a": (0, lambda g: float(g.standard_normal()))}
    r1 = run_batch(tasks, 1, RngSpec(5))
    r4 = run_batch(tasks, 4, RngSpec(5))
    assert r1 == r4 and list(r1) == ["a", "b"]
    with pytest.raises(ValueError):
        run_batch({"a": (0, lambda g: 0), "b": (0, lambda g: 1)}, 1, RngSpec(5))
