"""Sampling chaos elements and estimating tails, cumulants and MDP curves.

Reproducibility contract: every random draw comes from a Philox generator
keyed by ``(seed, stream, chunk)``.  Work is cut into fixed-size chunks whose
boundaries do not depend on the number of workers, and results are merged in
chunk order, so outputs are bit-identical for any ``workers`` value.

A sampler is any callable ``sampler(gen, size) -> ndarray`` drawing ``size``
independent realisations from a ``numpy.random.Generator``.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .applications import FbmModel
from .kernels import SymmetricKernel

log = logging.getLogger(__name__)

__all__ = [
    "RngSpec",
    "TailEstimate",
    "MdpCell",
    "hermite",
    "hermite_table",
    "wick_evaluate",
    "sample_chaos",
    "chaos_sampler",
    "gaussian_sampler",
    "hermite_sum_sampler",
    "fbm_variation_sampler",
    "sample_fbm_variation",
    "sample_fbm_increments",
    "draw",
    "estimate_tail",
    "mdp_curve",
    "mdp_trend",
    "run_batch",
    "wick_self_test",
    "HERMITE_CAP",
    "CHUNK_SIZE",
]

HERMITE_CAP = 30
CHUNK_SIZE = 1 << 14
ALGORITHM = "philox4x64-seedsequence"

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream index; ``generator(*sub)`` derives independent substreams."""

    seed: int
    stream: int = 0
    algorithm: str = ALGORITHM

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream < 0:
            raise ValueError("stream must be non-negative")
        if self.algorithm != ALGORITHM:
            raise ValueError(f"unsupported algorithm {self.algorithm!r}")

    def generator(self, *sub: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *sub))
        return np.random.Generator(np.random.Philox(ss))

    def with_stream(self, stream: int) -> "RngSpec":
        return RngSpec(self.seed, stream, self.algorithm)

    def to_dict(self) -> dict:
        return asdict(self)


# Hermite / Wick evaluation ---------------------------------------------------------


def hermite(k: int, x):
    """Probabilists' Hermite polynomial ``He_k(x)`` by the three-term recurrence."""
    if int(k) != k or k < 0:
        raise ValueError("k must be a non-negative integer")
    if k > HERMITE_CAP:
        raise ValueError(f"k={k} above the stability cap {HERMITE_CAP}")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if k == 0:
        out = prev
    else:
        for j in range(1, k):
            prev, cur = cur, x * cur - j * prev
        out = cur
    return float(out) if out.ndim == 0 else out


def hermite_table(kmax: int, x: np.ndarray) -> np.ndarray:
    """``He_0..He_kmax`` stacked along a new leading axis."""
    if kmax > HERMITE_CAP:
        raise ValueError(f"kmax={kmax} above the stability cap {HERMITE_CAP}")
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for j in range(1, kmax):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def wick_evaluate(h: SymmetricKernel, Z: np.ndarray) -> np.ndarray:
    """``I_q(h)`` evaluated at standard normal coordinates ``Z`` (shape ``(size, N)``).

    Each canonical multiset contributes ``coeff * multiplicity * prod_j He_{c_j}(Z_j)``
    with ``c_j`` the multiplicity of basis index ``j`` in the multiset.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != h.dim:
        raise ValueError(f"Z must have shape (size, {h.dim})")
    table = hermite_table(h.order, Z)  # (q+1, size, N)
    out = np.zeros(Z.shape[0])
    for key, value in h.items():
        term = np.full(Z.shape[0], float(value) * SymmetricKernel.multiplicity(key))
        j0, run = key[0], 0
        for j in key:
            if j == j0:
                run += 1
            else:
                term *= table[run, :, j0]
                j0, run = j, 1
        term *= table[run, :, j0]
        out += term
    return out


@lru_cache(maxsize=1)
def wick_self_test(trials: int = 8, tol: float = 1e-10) -> bool:
    """Check ``I_2(A) = Z^T A Z - tr A`` sample by sample on random symmetric ``A``."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(20240917)))
    for _ in range(trials):
        n = int(gen.integers(1, 7))
        B = gen.standard_normal((n, n))
        A = (B + B.T) / 2
        Z = gen.standard_normal((64, n))
        lhs = wick_evaluate(SymmetricKernel.from_matrix(A), Z)
        rhs = np.einsum("si,ij,sj->s", Z, A, Z) - np.trace(A)
        if not np.allclose(lhs, rhs, rtol=tol, atol=tol * max(1.0, float(np.abs(rhs).max()))):
            raise RuntimeError("Wick evaluation failed the quadratic-form self-test")
    return True


def sample_chaos(h: SymmetricKernel, gen: np.random.Generator, size: int = 1) -> np.ndarray:
    """``size`` independent realisations of ``I_q(h)``."""
    wick_self_test()
    return wick_evaluate(h, gen.standard_normal((size, h.dim)))


def chaos_sampler(h: SymmetricKernel) -> Sampler:
    def sampler(gen, size):
        return sample_chaos(h, gen, size)
    return sampler


def gaussian_sampler(var: float = 1.0) -> Sampler:
    sd = math.sqrt(var)

    def sampler(gen, size):
        return sd * gen.standard_normal(size)
    return sampler


def hermite_sum_sampler(q: int, n: int) -> Sampler:
    """``n^{-1/2} sum_{k<n} He_q(Z_k)``.

    For ``q = 2`` the sum of ``He_2`` is ``chi^2_n - n`` in law and is drawn that
    way; other orders sum the polynomials directly.
    """
    if q < 1 or n < 1:
        raise ValueError("need q >= 1 and n >= 1")
    root = math.sqrt(n)

    if q == 2:
        def sampler(gen, size):
            return (gen.chisquare(n, size) - n) / root
        return sampler

    def sampler(gen, size):
        out = np.zeros(size)
        block = max(1, (1 << 22) // max(size, 1))
        for start in range(0, n, block):
            k = min(block, n - start)
            out += hermite(q, gen.standard_normal((size, k))).sum(axis=1)
        return out / root
    return sampler


@lru_cache(maxsize=16)
def _fbm_factor(H: float, n: int) -> np.ndarray:
    C = FbmModel(H, n).covariance()
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        warnings.warn("increment covariance not numerically PD; adding ridge 1e-12", RuntimeWarning)
        return np.linalg.cholesky(C + 1e-12 * np.eye(n))


def sample_fbm_variation(model: FbmModel, gen: np.random.Generator, size: int = 1) -> np.ndarray:
    """``(1/sigma_n) sum_k He_2(B_{k+1} - B_k)`` from exactly correlated unit increments."""
    L = _fbm_factor(float(model.H), int(model.n))
    sigma = model.sigma
    out = np.empty(size)
    block = max(1, (1 << 21) // model.n)
    for start in range(0, size, block):
        k = min(block, size - start)
        X = gen.standard_normal((k, model.n)) @ L.T
        out[start:start + k] = (X * X - 1.0).sum(axis=1) / sigma
    return out


def fbm_variation_sampler(model: FbmModel) -> Sampler:
    def sampler(gen, size):
        return sample_fbm_variation(model, gen, size)
    return sampler


def sample_fbm_increments(model: FbmModel, gen: np.random.Generator, size: int = 1) -> np.ndarray:
    """Unit-spaced fBm increments, shape ``(size, n)``."""
    L = _fbm_factor(float(model.H), int(model.n))
    return gen.standard_normal((size, model.n)) @ L.T


# batched drawing ---------------------------------------------------------------


def _map_ordered(fn, items: Sequence, workers: int) -> list:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def draw(sampler: Sampler, n_samples: int, rng: RngSpec, workers: int = 1,
         chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    """``n_samples`` draws; chunk ``c`` always uses substream ``c``."""
    if n_samples < 0:
        raise ValueError("n_samples must be non-negative")
    starts = list(range(0, n_samples, chunk_size))

    def one(c_start):
        c, start = c_start
        return sampler(rng.generator(c), min(chunk_size, n_samples - start))

    parts = _map_ordered(one, list(enumerate(starts)), workers)
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo tail probability with an exact (Clopper-Pearson) 95% interval.

    With zero hits the interval is one-sided ``[0, 3/n]`` and ``censored`` is set.
    """

    z: float
    n_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    two_sided: bool
    censored: bool
    rng: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _binomial_ci(hits: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if hits == 0 else float(stats.beta.ppf(a / 2, hits, n - hits + 1))
    hi = 1.0 if hits == n else float(stats.beta.ppf(1 - a / 2, hits + 1, n - hits))
    return lo, hi


def estimate_tail(sampler: Sampler, z: float, n_samples: int, rng: RngSpec, two_sided: bool = False,
                  workers: int = 1, chunk_size: int = CHUNK_SIZE, scale: float = 1.0) -> TailEstimate:
    """Estimate ``P(F/scale >= z)`` (or ``P(|F|/scale >= z)`` when ``two_sided``)."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    starts = list(range(0, n_samples, chunk_size))

    def one(c_start):
        c, start = c_start
        x = sampler(rng.generator(c), min(chunk_size, n_samples - start)) / scale
        return int(np.count_nonzero((np.abs(x) if two_sided else x) >= z))

    hits = sum(_map_ordered(one, list(enumerate(starts)), workers))
    p_hat = hits / n_samples
    if hits == 0:
        lo, hi, censored = 0.0, min(1.0, 3.0 / n_samples), True
    else:
        (lo, hi), censored = _binomial_ci(hits, n_samples), False
    return TailEstimate(float(z), n_samples, hits, p_hat, lo, hi, two_sided, censored, rng.to_dict())


# MDP curves --------------------------------------------------------------------------


@dataclass(frozen=True)
class MdpCell:
    n: float
    a: float
    z: float
    hits: int
    n_samples: int
    p_hat: float
    scaled: float | None  # a^{-2} log p_hat, None when censored
    target: float  # -z^2 / (2 q!)
    censored: bool

    def to_dict(self) -> dict:
        return asdict(self)


def mdp_curve(samplers: Mapping[Any, Sampler], scales: Mapping[Any, float], z_grid: Sequence[float],
              n_samples: int, q: int, rng: RngSpec, workers: int = 1,
              chunk_size: int = CHUNK_SIZE) -> list[MdpCell]:
    """Table of ``a_n^{-2} log P(F_n / a_n >= z)`` beside ``-z^2/(2 q!)``.

    Model ``i`` (in mapping order) uses stream ``rng.stream + i``; all ``z``
    values for a model share one set of draws.
    """
    var = math.factorial(q)
    cells = []
    for i, (key, sampler) in enumerate(samplers.items()):
        a = float(scales[key])
        x = draw(sampler, n_samples, rng.with_stream(rng.stream + i), workers, chunk_size) / a
        for z in z_grid:
            hits = int(np.count_nonzero(x >= z))
            p = hits / n_samples
            censored = hits == 0
            scaled = None if censored else math.log(p) / (a * a)
            cells.append(MdpCell(float(key), a, float(z), hits, n_samples, p, scaled,
                                 -z * z / (2 * var), censored))
    return cells


def mdp_trend(cells: Iterable[MdpCell]) -> dict[float, str]:
    """Per ``z``: ``"toward"`` if ``|scaled - target|`` strictly decreases with ``a``,
    ``"censored"`` if any cell has no hits, otherwise ``"not-monotone"``."""
    by_z: dict[float, list[MdpCell]] = {}
    for c in cells:
        by_z.setdefault(c.z, []).append(c)
    out = {}
    for z, row in by_z.items():
        row = sorted(row, key=lambda c: c.a)
        if any(c.censored for c in row):
            out[z] = "censored"
            continue
        gaps = [abs(c.scaled - c.target) for c in row]
        out[z] = "toward" if all(b < a for a, b in zip(gaps, gaps[1:])) else "not-monotone"
    return out


# generic batches -------------------------------------------------------------------


def run_batch(tasks: Mapping[Any, tuple[int, Callable[[np.random.Generator], Any]]] | Sequence,
              workers: int, rng: RngSpec) -> dict:
    """Run ``{task_id: (stream, fn)}``; ``fn`` receives the generator for its stream.

    Results are keyed by task id in sorted order and do not depend on
    ``workers``.  Reusing a stream index raises ``ValueError``.
    """
    items = list(tasks.items()) if isinstance(tasks, Mapping) else list(tasks)
    streams = [s for _, (s, _) in items]
    if len(set(streams)) != len(streams):
        raise ValueError("stream indices must be distinct across tasks")

    def one(item):
        task_id, (stream, fn) = item
        return task_id, fn(rng.with_stream(stream).generator())

    results = _map_ordered(one, items, workers)
    return dict(sorted(results, key=lambda kv: kv[0]))
