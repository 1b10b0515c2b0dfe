"""Exact cumulants of ``I_q(h)`` through the diagram formula, plus bounds and estimators."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .diagrams import (
    CapExceededError,
    DiagramMultigraph,
    GroupedIndexSet,
    PairPartition,
    alpha,
    count_partitions,
    enumerate_partitions,
    matching_lower_bound,
    multigraph_classes,
    partition_to_multigraph,
    ENUMERATION_CAP,
)
from .kernels import DENSE_CAP, SymmetricKernel, compute_K

__all__ = [
    "exact_cumulant",
    "diagram_term",
    "quadratic_form_oracle",
    "cumulant_bound",
    "log_cumulant_bound",
    "per_term_bound_check",
    "TermCheck",
    "L_from_cum4",
    "empirical_cumulants",
    "EmpiricalCumulants",
    "CumulantReport",
    "cumulant_report",
    "WORK_CAP",
]

#: Default cap on ``N**(q*m/2) * (#multigraph classes)`` for exact cumulants.
WORK_CAP = 10**12


def _einsum_operands(h_dense: np.ndarray, g: DiagramMultigraph):
    q = h_dense.ndim
    labels: list[list[int]] = [[] for _ in range(g.m)]
    nxt = 0
    for (i, j), mult in g.edges:
        for _ in range(mult):
            labels[i].append(nxt)
            labels[j].append(nxt)
            nxt += 1
    if any(len(lab) != q for lab in labels):
        raise ValueError("multigraph is not regular of the kernel's order")
    args = []
    for lab in labels:
        args += [h_dense, lab]
    return args


def diagram_term(h: SymmetricKernel | np.ndarray, g: DiagramMultigraph) -> float:
    """Value of one diagram: ``m`` copies of ``h`` with indices shared along edges.

    Because ``h`` is symmetric this equals the block-identified sum of every
    partition inducing ``g``.  Evaluated as a pairwise contraction sequence in
    greedy order.
    """
    h_dense = h.to_dense() if isinstance(h, SymmetricKernel) else np.asarray(h, dtype=float)
    args = _einsum_operands(h_dense, g)
    return float(np.einsum(*args, [], optimize="greedy"))


def exact_cumulant(h: SymmetricKernel, m: int, work_cap: int = WORK_CAP) -> float:
    """``cum_m(I_q(h))`` from the diagram formula.

    The sum over ``Pi(q[m])`` is regrouped by induced multigraph; each class
    contributes ``weight * diagram_term``.  Terms are summed with ``math.fsum``
    so the result does not depend on evaluation order.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    q = h.order
    if m == 1 or (q * m) % 2:
        return 0.0
    if m == 2:
        return float(math.factorial(q) * h.squared_norm())
    if h.dim ** q > DENSE_CAP:
        raise CapExceededError(f"dense kernel needs {h.dim ** q} entries (> {DENSE_CAP})")
    classes = list(multigraph_classes(q, m))
    work = h.dim ** (q * m // 2) * max(1, len(classes))
    if work > work_cap:
        raise CapExceededError(
            f"estimated work {work:.3g} exceeds cap {work_cap:.3g}; use a smaller N or m")
    h_dense = h.to_dense()
    return math.fsum(w * diagram_term(h_dense, g) for g, w in classes)


def quadratic_form_oracle(A, m: int) -> float:
    """``cum_m(Z^T A Z - tr A) = 2^{m-1} (m-1)! sum_i lambda_i^m`` for ``m >= 2``; 0 for ``m = 1``.

    Independent of the diagram machinery: uses only the spectrum of ``A``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise ValueError("A must be a symmetric matrix")
    if m < 1:
        raise ValueError("m must be >= 1")
    if m == 1:
        return 0.0
    lam = np.linalg.eigvalsh(A)
    return float(2 ** (m - 1) * math.factorial(m - 1) * math.fsum(lam ** m))


def _check_bound_domain(q, m, K):
    if q < 2 or m < 3:
        raise ValueError("bound is stated for q >= 2 and m >= 3")
    if not 0.0 <= K <= 1.0:
        raise ValueError(f"K must lie in [0, 1], got {K}")


def log_cumulant_bound(q: int, m: int, K: float) -> float:
    """Natural log of ``(m!)^{q/2} (q^{3q/2})^{m-2} K^{alpha(q)(m-2)}`` (``-inf`` at K=0)."""
    _check_bound_domain(q, m, K)
    a = float(alpha(q))
    log_k = -math.inf if K == 0 else math.log(K)
    return 0.5 * q * math.lgamma(m + 1) + 1.5 * q * (m - 2) * math.log(q) + a * (m - 2) * log_k


def cumulant_bound(q: int, m: int, K: float, log: bool = False) -> float:
    """Aggregate bound on ``|cum_m|`` for a unit-norm kernel with contraction level ``K``."""
    val = log_cumulant_bound(q, m, K)
    if log:
        return val
    return math.exp(val) if val < 709 else math.inf


@dataclass(frozen=True)
class TermCheck:
    sigma: PairPartition
    term: float
    bound: float

    @property
    def holds(self) -> bool:
        return abs(self.term) <= self.bound + 1e-12


def per_term_bound_check(h: SymmetricKernel, m: int, cap: int = ENUMERATION_CAP,
                         strict: bool = True) -> list[TermCheck]:
    """Each partition's term against ``K^{L(q,m)}``.

    Raises ``AssertionError`` on a violation when ``strict``.
    """
    q = h.order
    if m < 3:
        raise ValueError("per-term bound is stated for m >= 3")
    K = compute_K(h)
    bound = K ** matching_lower_bound(q, m)
    h_dense = h.to_dense()
    cache: dict[DiagramMultigraph, float] = {}
    out = []
    for sigma in enumerate_partitions(GroupedIndexSet.uniform(q, m), cap=cap):
        g = partition_to_multigraph(sigma)
        if g not in cache:
            cache[g] = diagram_term(h_dense, g)
        rec = TermCheck(sigma, cache[g], bound)
        if strict and not rec.holds:
            raise AssertionError(f"term {rec.term!r} for {sigma} exceeds K^L = {bound!r}")
        out.append(rec)
    return out


def L_from_cum4(q: int, cum4: float, tol: float = 1e-9) -> float:
    """``sqrt(cum_4) / (q q!)``.  Negatives within ``tol`` are clamped to 0 with a warning."""
    if cum4 < 0:
        if cum4 < -tol:
            raise ValueError(f"negative fourth cumulant {cum4!r}")
        warnings.warn(f"clamping slightly negative cum4={cum4!r} to 0", RuntimeWarning, stacklevel=2)
        cum4 = 0.0
    return math.sqrt(cum4) / (q * math.factorial(q))


# empirical ----------------------------------------------------------------------


@dataclass
class EmpiricalCumulants:
    """Sample cumulants ``cum_1..cum_max`` with bootstrap standard errors.

    Orders up to 4 are unbiased k-statistics; orders 5 and 6 are plug-in
    values from central moments and carry ``biased=True``.
    """

    estimates: dict[int, float]
    standard_errors: dict[int, float]
    biased: dict[int, bool]
    n_samples: int


def _plugin_cumulants(x: np.ndarray, max_m: int) -> dict[int, float]:
    mean = x.mean()
    d = x - mean
    mu = {k: float(np.mean(d ** k)) for k in range(2, max_m + 1)}
    out = {1: float(mean), 2: mu[2]}
    if max_m >= 3:
        out[3] = mu[3]
    if max_m >= 4:
        out[4] = mu[4] - 3 * mu[2] ** 2
    if max_m >= 5:
        out[5] = mu[5] - 10 * mu[3] * mu[2]
    if max_m >= 6:
        out[6] = mu[6] - 15 * mu[4] * mu[2] - 10 * mu[3] ** 2 + 30 * mu[2] ** 3
    return out


def _cumulant_estimates(x: np.ndarray, max_m: int) -> dict[int, float]:
    plug = _plugin_cumulants(x, max_m) if max_m > 4 else {}
    out = {}
    for k in range(1, max_m + 1):
        out[k] = float(stats.kstat(x, k)) if k <= 4 else plug[k]
    return out


def empirical_cumulants(samples: Sequence[float], max_m: int = 4, n_boot: int = 200,
                        rng=None) -> EmpiricalCumulants:
    x = np.asarray(samples, dtype=float).ravel()
    if not 1 <= max_m <= 6:
        raise ValueError("max_m must be in 1..6")
    if x.size < 10 * max_m:
        raise ValueError(f"need at least {10 * max_m} samples, got {x.size}")
    est = _cumulant_estimates(x, max_m)
    rng = np.random.default_rng(rng)
    boots = np.empty((n_boot, max_m))
    for b in range(n_boot):
        xb = x[rng.integers(0, x.size, x.size)]
        e = _cumulant_estimates(xb, max_m)
        boots[b] = [e[k] for k in range(1, max_m + 1)]
    se = boots.std(axis=0, ddof=1) if n_boot > 1 else np.full(max_m, math.nan)
    return EmpiricalCumulants(
        estimates=est,
        standard_errors={k: float(se[k - 1]) for k in range(1, max_m + 1)},
        biased={k: k > 4 for k in range(1, max_m + 1)},
        n_samples=int(x.size),
    )


# reports ------------------------------------------------------------------------


@dataclass
class CumulantReport:
    """Per-order cumulant record; serialises to the documented JSON schema."""

    q: int
    m: int
    exact: float | None = None
    empirical: float | None = None
    se: float | None = None
    term_bound: float | None = None
    aggregate_bound: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def cumulant_report(h: SymmetricKernel, orders: Sequence[int], samples=None,
                    n_boot: int = 200, rng=None, exact: bool = True) -> list[CumulantReport]:
    """Exact and/or empirical cumulants of ``I_q(h)`` with bound values for each order."""
    q = h.order
    K = compute_K(h) if q >= 2 and h.is_normalized(1e-9) else None
    emp = None
    if samples is not None:
        emp = empirical_cumulants(samples, max_m=max(orders), n_boot=n_boot, rng=rng)
    out = []
    for m in orders:
        rep = CumulantReport(q=q, m=m)
        if exact:
            rep.exact = exact_cumulant(h, m)
        if emp is not None:
            rep.empirical = emp.estimates[m]
            rep.se = emp.standard_errors[m]
            if emp.biased[m]:
                rep.extra["biased"] = True
        if K is not None and m >= 3:
            rep.term_bound = K ** matching_lower_bound(q, m)
            rep.extra["count_bound"] = count_partitions(q, m) * rep.term_bound
            rep.aggregate_bound = cumulant_bound(q, m, min(K, 1.0))
        out.append(rep)
    return out
