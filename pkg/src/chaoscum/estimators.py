"""scikit-learn compatible wrappers so the chaos machinery composes with pipelines.

* :class:`ChaosTransformer` maps rows of standard normal coordinates to ``I_q(h)``.
* :class:`HermiteVariationTransformer` maps rows of unit fBm increments to the
  normalised second Hermite variation.
* :class:`CumulantEstimator` fits sample cumulants with bootstrap errors.
* :class:`HurstEstimator` predicts the Hurst index of sampled paths.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .applications import fbm_sigma, hurst_estimate
from .cumulants import empirical_cumulants
from .kernels import SymmetricKernel
from .montecarlo import wick_evaluate

__all__ = [
    "ChaosTransformer",
    "HermiteVariationTransformer",
    "CumulantEstimator",
    "HurstEstimator",
    "check_samples",
]


def check_samples(X, min_samples: int = 1) -> np.ndarray:
    """Accept a 1-d sequence or an ``(n, 1)`` column; return a finite 1-d float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    X = check_array(X, ensure_2d=False, ensure_min_samples=min_samples)
    if X.ndim != 1:
        raise ValueError(f"expected 1-d samples, got shape {X.shape}")
    return X


class ChaosTransformer(TransformerMixin, BaseEstimator):
    """Evaluate ``I_q(h)`` row-wise on standard normal coordinates.

    Parameters
    ----------
    kernel : SymmetricKernel
        Chaos kernel over ``R^N``; rows of ``X`` must have ``N`` columns.
    """

    def __init__(self, kernel: SymmetricKernel | None = None):
        self.kernel = kernel

    def fit(self, X, y=None):
        if not isinstance(self.kernel, SymmetricKernel):
            raise TypeError("kernel must be a SymmetricKernel")
        X = check_array(X)
        if X.shape[1] != self.kernel.dim:
            raise ValueError(f"X has {X.shape[1]} columns, kernel dim is {self.kernel.dim}")
        self.n_features_in_ = X.shape[1]
        self.variance_ = math.factorial(self.kernel.order) * float(self.kernel.squared_norm())
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return wick_evaluate(self.kernel, X)[:, None]


class HermiteVariationTransformer(TransformerMixin, BaseEstimator):
    """``(1/sigma_n) sum_k He_2(x_k)`` per row of unit-variance fBm increments."""

    def __init__(self, hurst: float = 0.5):
        self.hurst = hurst

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.sigma_ = fbm_sigma(self.hurst, X.shape[1])
        return self

    def transform(self, X):
        check_is_fitted(self, "sigma_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return ((X * X - 1.0).sum(axis=1) / self.sigma_)[:, None]


class CumulantEstimator(BaseEstimator):
    """Sample cumulants up to ``max_order`` (k-statistics to order 4, plug-in above).

    Attributes
    ----------
    cumulants_ : ndarray of shape (max_order,)
    standard_errors_ : ndarray of shape (max_order,)
    biased_ : ndarray of bool
    """

    def __init__(self, max_order: int = 4, n_boot: int = 200, random_state=None):
        self.max_order = max_order
        self.n_boot = n_boot
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_samples(X, min_samples=10 * self.max_order)
        res = empirical_cumulants(x, self.max_order, self.n_boot, self.random_state)
        orders = range(1, self.max_order + 1)
        self.cumulants_ = np.array([res.estimates[k] for k in orders])
        self.standard_errors_ = np.array([res.standard_errors[k] for k in orders])
        self.biased_ = np.array([res.biased[k] for k in orders])
        self.n_samples_ = res.n_samples
        return self

    def z_scores(self, reference):
        """``(estimate - reference) / se`` for each fitted order."""
        check_is_fitted(self, "cumulants_")
        ref = np.asarray(reference, dtype=float)
        return (self.cumulants_[: ref.size] - ref) / self.standard_errors_[: ref.size]


class HurstEstimator(RegressorMixin, BaseEstimator):
    """Quadratic-variation Hurst estimator.

    Each row of ``X`` holds the ``n`` increments of a path on the grid
    ``k/n``, ``k = 0..n``, of ``[0, 1]``.  ``fit`` is stateless apart from
    recording the row length; ``predict`` returns one estimate per row.
    """

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] < 2:
            raise ValueError("need at least 2 increments per path")
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        n = X.shape[1]
        s = (X * X).sum(axis=1)
        return np.array([hurst_estimate(float(v), n) for v in s])
