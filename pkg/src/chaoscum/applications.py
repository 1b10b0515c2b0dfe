"""Three concrete chaos models: Brownian-sheet explosive integrals, the second
Hermite power variation of fractional Brownian motion, and the normalised
spherical bispectrum (parameters only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import toeplitz

from .deviations import DeviationParams, delta_from_L, _delta

__all__ = [
    "BrownianSheetModel",
    "FbmModel",
    "BispectrumModel",
    "sheet_kernel_value",
    "sheet_moments",
    "sheet_deviation",
    "sheet_variance_quadrature",
    "sheet_discretized_K",
    "kink_rule_1d",
    "kink_rule_2d",
    "fbm_increment_cov",
    "fbm_sigma",
    "fbm_sigma_squared",
    "fbm_rate",
    "fbm_deviation",
    "fbm_covariance_matrix",
    "hurst_estimate",
    "hurst_error",
    "bispectrum_variance_factor",
    "bispectrum_deviation",
]


# Brownian sheet ---------------------------------------------------------------


def sheet_kernel_value(d: int, n: int, t, s) -> float:
    """``prod_i (1 / max(t_i, s_i, 1/n) - 1)`` for ``t, s in [0, 1]^d``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if t.shape != (d,) or s.shape != (d,):
        raise ValueError(f"points must have {d} coordinates")
    if n < 2:
        raise ValueError("n must be >= 2")
    if np.any((t < 0) | (t > 1) | (s < 0) | (s > 1)):
        raise ValueError("coordinates must lie in [0, 1]")
    return float(np.prod(1.0 / np.maximum(np.maximum(t, s), 1.0 / n) - 1.0))


def _sheet_factor(t, s, n):
    return 1.0 / np.maximum(np.maximum(t, s), 1.0 / n) - 1.0


def sheet_moments(d: int, n: int) -> tuple[float, float]:
    """Mean ``(log n)^d`` and variance ``2 (2 log n - 2(1 - 1/n))^d`` of the cut-off integral."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if n < 2:
        raise ValueError("n must be >= 2")
    ln = math.log(n)
    return ln ** d, 2.0 * (2.0 * ln - 2.0 * (1.0 - 1.0 / n)) ** d


def kink_rule_1d(breaks, points: int = 16, grading: float = 2.0):
    """Gauss-Legendre nodes/weights on ``[0, 1]`` with panel edges at ``breaks``.

    Panels to the right of the smallest positive break are subdivided
    geometrically (ratio ``grading``) to follow ``1/x``-type growth near it.
    """
    x, w = np.polynomial.legendre.leggauss(points)
    edges = {0.0, 1.0}
    for b in breaks:
        if 0.0 < b < 1.0:
            edges.add(float(b))
    edges = sorted(edges)
    fine = [edges[0]]
    for lo, hi in zip(edges, edges[1:]):
        if lo > 0 and hi / lo > grading:
            k = math.ceil(math.log(hi / lo) / math.log(grading))
            fine.extend(lo * (hi / lo) ** (np.arange(1, k + 1) / k))
        else:
            fine.append(hi)
    fine = np.asarray(fine)
    a, b = fine[:-1, None], fine[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def kink_rule_2d(n: int, points: int = 16, grading: float = 2.0):
    """Product-type rule on ``[0,1]^2`` respecting kinks on ``t = s`` and at ``1/n``.

    The square is split into the triangles ``s <= t`` and ``t <= s``; each is
    mapped from ``[0,1]^2`` via ``(t, u) -> (t, t u)``.
    """
    tn, tw = kink_rule_1d([1.0 / n], points, grading)
    un, uw = np.polynomial.legendre.leggauss(points)
    un, uw = 0.5 * (un + 1.0), 0.5 * uw
    T = np.repeat(tn, un.size)
    U = np.tile(un, tn.size)
    W = np.repeat(tw, un.size) * np.tile(uw, tn.size) * T
    S = T * U
    return np.concatenate([T, S]), np.concatenate([S, T]), np.concatenate([W, W])


def sheet_variance_quadrature(d: int, n: int, points: int = 16) -> float:
    """``2 ||h_n^{(d)}||^2`` by tensor-product quadrature over ``([0,1]^2)^d``.

    The integrand is evaluated on the full ``d``-fold product grid (in chunks
    for ``d >= 2``), not factorised.
    """
    if d not in (1, 2):
        raise ValueError("quadrature check implemented for d in {1, 2}")
    t, s, w = kink_rule_2d(n, points)
    f2 = _sheet_factor(t, s, n) ** 2
    if d == 1:
        return 2.0 * math.fsum(w * f2)
    total = []
    step = max(1, 2_000_000 // t.size)
    for i in range(0, t.size, step):
        block = _sheet_factor(t[i:i + step, None], s[i:i + step, None], n) ** 2 * f2[None, :]
        total.append(float(np.sum(block * (w[i:i + step, None] * w[None, :]))))
    return 2.0 * math.fsum(total)


def sheet_discretized_K(n: int, points: int = 16) -> float:
    """``K`` of the normalised ``d = 1`` kernel from a Nystrom discretisation.

    With nodes ``x_i`` and weights ``w_i`` the matrix
    ``A_ij = sqrt(w_i w_j) h(x_i, x_j)`` is a finite kernel whose norm and first
    contraction approximate those of ``h``; ``K = ||A^2||_F / ||A||_F^2``.
    """
    x, w = kink_rule_1d([1.0 / n], points)
    sw = np.sqrt(w)
    A = sw[:, None] * _sheet_factor(x[:, None], x[None, :], n) * sw[None, :]
    fro2 = float(np.sum(A * A))
    return float(np.linalg.norm(A @ A)) / fro2


def sheet_deviation(d: int, n: int) -> DeviationParams:
    """``q = 2`` parameters with ``K <= 2 (120/log n)^{d/2}`` and
    ``delta = (log n / 120)^{d/4} / (8 sqrt 2)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    ln = math.log(n)
    k_bound = 2.0 * (120.0 / ln) ** (d / 2)
    delta = (ln / 120.0) ** (d / 4) / (8.0 * math.sqrt(2.0))
    generic = _delta(2, k_bound)
    return DeviationParams(q=2, delta=delta, K=k_bound, source="K-bound",
                           notes={"delta_generic": generic, "d": d, "n": n})


@dataclass(frozen=True)
class BrownianSheetModel:
    d: int
    n: int

    def __post_init__(self):
        if self.d < 1 or int(self.n) != self.n or self.n < 2:
            raise ValueError("need d >= 1 and integer n >= 2")

    @property
    def mean(self) -> float:
        return sheet_moments(self.d, self.n)[0]

    @property
    def variance(self) -> float:
        return sheet_moments(self.d, self.n)[1]

    def deviation(self) -> DeviationParams:
        return sheet_deviation(self.d, self.n)

    def table(self) -> dict:
        dev = self.deviation()
        return {"d": self.d, "n": self.n, "mean": self.mean, "variance": self.variance,
                "K_bound": dev.K, "delta": dev.delta}


# fractional Brownian motion ------------------------------------------------------


def _check_hurst(H: float, upper: float = 1.0, inclusive: bool = False) -> None:
    ok = 0.0 < H < upper or (inclusive and H == upper)
    if not ok:
        bracket = "]" if inclusive else ")"
        raise ValueError(f"Hurst index must lie in (0, {upper}{bracket}, got {H}")


def fbm_increment_cov(H: float, k) -> np.ndarray | float:
    """Correlation of unit-spaced fBm increments at lag ``k``."""
    _check_hurst(H)
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * H
    out = 0.5 * ((k + 1.0) ** two_h + np.abs(k - 1.0) ** two_h - 2.0 * k ** two_h)
    return float(out) if out.ndim == 0 else out


def fbm_sigma_squared(H: float, n: int) -> float:
    """``sum_{k,l < n} rho_H(k - l)^2``; exactly ``n`` when ``H = 1/2``."""
    _check_hurst(H, 0.75, inclusive=True)
    if n < 1:
        raise ValueError("n must be >= 1")
    lags = np.arange(1, n)
    rho2 = fbm_increment_cov(H, lags) ** 2 if n > 1 else np.zeros(0)
    return n + 2.0 * math.fsum((n - lags) * rho2)


def fbm_sigma(H: float, n: int) -> float:
    """Normaliser making ``(1/sigma) sum_k H_2(increment_k)`` have variance 2."""
    return math.sqrt(fbm_sigma_squared(H, n))


def fbm_covariance_matrix(H: float, n: int) -> np.ndarray:
    """Toeplitz covariance of ``n`` consecutive unit increments."""
    return toeplitz(np.atleast_1d(fbm_increment_cov(H, np.arange(n))))


def _near(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12


def fbm_rate(H: float, n: int, c_H: float = 1.0) -> float:
    """Total-variation rate ``A_n`` (up to the unspecified constant ``c_H``)."""
    _check_hurst(H, 0.75, inclusive=True)
    if n < 2:
        raise ValueError("n must be >= 2")
    if c_H <= 0:
        raise ValueError("c_H must be positive")
    ln = math.log(n)
    if _near(H, 0.75):
        base = 1.0 / ln
    elif _near(H, 0.625):
        base = ln ** 1.5 / math.sqrt(n)
    elif H < 0.625:
        base = 1.0 / math.sqrt(n)
    else:
        base = n ** (4.0 * H - 3.0)
    return c_H * base


def fbm_deviation(H: float, n: int, c_H: float = 1.0) -> DeviationParams:
    """``q = 2`` parameters with ``K <= A_n / (2 sqrt 2)`` and ``delta = 2^{-9/4} A_n^{-1/2}``."""
    A = fbm_rate(H, n, c_H)
    delta = 2.0 ** (-2.25) / math.sqrt(A)
    k_bound = A / (2.0 * math.sqrt(2.0))
    return DeviationParams(q=2, delta=delta, K=k_bound, source="K-bound",
                           notes={"A_n": A, "c_H": c_H, "constants_flagged": ["c_H"],
                                  "delta_generic": _delta(2, k_bound), "H": H, "n": n})


def hurst_estimate(s_n: float, n: int) -> float:
    """``1/2 - log(S_n) / (2 log n)`` from the discretised quadratic variation ``S_n``."""
    if not s_n > 0:
        raise ValueError("S_n must be positive")
    if n < 2:
        raise ValueError("n must be >= 2")
    return 0.5 - math.log(s_n) / (2.0 * math.log(n))


def hurst_error(f_n: float, sigma_n: float, n: int) -> float:
    """Estimation error ``-log(sigma_n F_n / n + 1) / (2 log n)`` expressed through ``F_n``."""
    arg = sigma_n * f_n / n + 1.0
    if not arg > 0:
        raise ValueError("sigma_n F_n / n + 1 must be positive")
    return -math.log(arg) / (2.0 * math.log(n))


@dataclass(frozen=True)
class FbmModel:
    H: float
    n: int
    c_H: float = 1.0

    def __post_init__(self):
        _check_hurst(self.H, 0.75, inclusive=True)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def sigma(self) -> float:
        return fbm_sigma(self.H, self.n)

    def covariance(self) -> np.ndarray:
        return fbm_covariance_matrix(self.H, self.n)

    def rate(self) -> float:
        return fbm_rate(self.H, self.n, self.c_H)

    def deviation(self) -> DeviationParams:
        return fbm_deviation(self.H, self.n, self.c_H)

    def table(self) -> dict:
        out = {"H": self.H, "n": self.n, "sigma_n": self.sigma}
        if self.n >= 2:
            dev = self.deviation()
            out.update({"A_n": dev.notes["A_n"], "c_H": self.c_H, "K_bound": dev.K,
                        "delta": dev.delta, "constants_flagged": ["c_H"]})
        return out


# spherical bispectrum ------------------------------------------------------------


def _check_triple(l1: int, l2: int, l3: int) -> None:
    if min(l1, l2, l3) < 0:
        raise ValueError("frequencies must be non-negative")
    if not l1 <= l2 <= l3:
        raise ValueError("frequencies must be ordered l1 <= l2 <= l3")
    if not l3 <= l1 + l2:
        raise ValueError("triangle condition violated")
    if (l1 + l2 + l3) % 2:
        raise ValueError("l1 + l2 + l3 must be even")


def bispectrum_variance_factor(l1: int, l2: int, l3: int) -> int:
    """Variance of the normalised sample bispectrum for an ordered admissible triple."""
    _check_triple(l1, l2, l3)
    return 1 + (l1 == l2) + (l2 == l3) + 3 * (l1 == l3)


def bispectrum_deviation(n: float) -> DeviationParams:
    """``q = 3`` parameters from ``L <= 2/sqrt(3n)``: ``delta = 3^{-9/2} (sqrt(3n)/2)^{5/12}``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    L = 2.0 / math.sqrt(3.0 * n)
    delta = 3.0 ** (-4.5) * (math.sqrt(3.0 * n) / 2.0) ** (5.0 / 12.0)
    return DeviationParams(q=3, delta=delta, L=L, source="L-bound",
                           notes={"delta_generic": delta_from_L(3, L), "n": n, "cum4_bound": 432.0 / n})


@dataclass(frozen=True)
class BispectrumModel:
    """Either an explicit triple or the sequence ``(n, u_n, v_n)`` with ``n <= u <= v <= 2n``."""

    l1: int
    l2: int
    l3: int

    def __post_init__(self):
        _check_triple(self.l1, self.l2, self.l3)

    @classmethod
    def from_sequence(cls, n: int, u: int, v: int) -> "BispectrumModel":
        if not n <= u <= v <= 2 * n:
            raise ValueError("need n <= u_n <= v_n <= 2n")
        return cls(n, u, v)

    @property
    def D(self) -> int:
        return bispectrum_variance_factor(self.l1, self.l2, self.l3)

    def deviation(self) -> DeviationParams:
        return bispectrum_deviation(self.l1)

    def table(self) -> dict:
        dev = self.deviation()
        return {"l": [self.l1, self.l2, self.l3], "D": self.D, "L_bound": dev.L,
                "delta": dev.delta, "gamma": dev.gamma, "alpha": str(Fraction(dev.alpha))}
