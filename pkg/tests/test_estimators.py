
import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from chaoscum.applications import FbmModel
from chaoscum.estimators import (
    ChaosTransformer,
    CumulantEstimator,
    HermiteVariationTransformer,
    HurstEstimator,
    check_samples,
)
from chaoscum.kernels import SymmetricKernel
from chaoscum.montecarlo import RngSpec, sample_fbm_increments


def test_check_samples():
    assert check_samples([[1.0], [2.0]]).shape == (2,)
    with pytest.raises(ValueError):
        check_samples(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        check_samples([1.0, np.nan])


def test_chaos_transformer():
    h = SymmetricKernel.hermite_sum(2, 4)
    Z = np.random.default_rng(0).standard_normal((50_000, 4))
    t = ChaosTransformer(h).fit(Z)
    y = t.transform(Z)
    assert y.shape == (50_000, 1)
    assert t.variance_ == pytest.approx(2.0)
    assert y.var() == pytest.approx(2.0, rel=0.05)
    with pytest.raises(ValueError):
        t.transform(Z[:, :3])
    with pytest.raises(TypeError):
        ChaosTransformer().fit(Z)


def test_params_and_clone():
    est = CumulantEstimator(max_order=3, n_boot=10, random_state=4)
    assert est.get_params() == {"max_order": 3, "n_boot": 10, "random_state": 4}
    c = clone(est.set_params(max_order=5))
    assert c.max_order == 5 and not hasattr(c, "cumulants_")
    assert clone(ChaosTransformer(SymmetricKernel.atom(2))).get_params()["kernel"] == SymmetricKernel.atom(2)


def test_pipeline_cumulants():
    h = SymmetricKernel.atom(2)
    Z = np.random.default_rng(1).standard_normal((100_000, 1))
    y = make_pipeline(ChaosTransformer(h)).fit_transform(Z)
    est = CumulantEstimator(max_order=4, n_boot=50, random_state=0).fit(y)
    z = est.z_scores([0.0, 2.0, 8.0, 48.0])
    assert np.all(np.abs(z) < 5)
    assert est.biased_.tolist() == [False] * 4


def test_hermite_variation_and_hurst():
    model = FbmModel(0.7, 256)
    X = sample_fbm_increments(model, RngSpec(3).generator(), 2000)
    t = HermiteVariationTransformer(hurst=0.7).fit(X)
    F = t.transform(X)[:, 0]
    assert t.sigma_ == pytest.approx(model.sigma)
    assert F.var() == pytest.approx(2.0, rel=0.15)
    # increments on the grid k/n of [0, 1] scale as n^{-H}
    paths = X / model.n ** model.H
    h_hat = HurstEstimator().fit(paths).predict(paths)
    assert abs(np.median(h_hat) - 0.7) < 0.01
    with pytest.raises(ValueError):
        HurstEstimator().fit(np.zeros((3, 1)))
