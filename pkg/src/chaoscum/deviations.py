"""Deviation parameters, Gaussian rate function and tail inequalities for chaos elements.

Constants that the underlying results only assert to exist (``c``, ``C``,
``c_0..c_2`` and the ``c`` of the hypercontractivity bound) are explicit
arguments defaulting to 1; every :class:`BoundRecord` built from one lists it
in ``constants_flagged``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .diagrams import alpha

__all__ = [
    "DeviationParams",
    "BoundRecord",
    "ScaleVerdict",
    "delta_from_K",
    "delta_from_L",
    "rate_function",
    "tail_bound",
    "major_bound",
    "tail_beats_major",
    "improvement_grid",
    "ratio_diagnostic",
    "gaussian_tail",
    "mdp_scale_check",
    "hermite_sum_tail_lower",
    "berry_esseen_shape",
]


def _delta(q: int, x: float) -> float:
    # (q^{3q/2} x^{alpha(q)})^{-1}
    if x == 0:
        return math.inf
    return 1.0 / (q ** (1.5 * q) * x ** float(alpha(q)))


def delta_from_K(q: int, K: float) -> float:
    """Deviation scale from the maximal contraction norm ``K in [0, 1]``.

    ``K = 0`` returns ``math.inf`` (no finite scale).
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    if not 0.0 <= K <= 1.0:
        raise ValueError(f"K must lie in [0, 1], got {K}")
    return _delta(q, K)


def delta_from_L(q: int, L: float) -> float:
    """Same formula with the fourth-cumulant proxy ``L >= 0`` (may exceed 1)."""
    if q < 2:
        raise ValueError("q must be >= 2")
    if L < 0:
        raise ValueError(f"L must be non-negative, got {L}")
    return _delta(q, L)


@dataclass(frozen=True)
class DeviationParams:
    """Everything the deviation bounds need for one chaos element."""

    q: int
    delta: float
    K: float | None = None
    L: float | None = None
    source: str = "K"
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be >= 2")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @classmethod
    def from_K(cls, q: int, K: float) -> "DeviationParams":
        return cls(q=q, delta=delta_from_K(q, K), K=K, source="K")

    @classmethod
    def from_L(cls, q: int, L: float) -> "DeviationParams":
        return cls(q=q, delta=delta_from_L(q, L), L=L, source="L")

    @property
    def gamma(self) -> float:
        return self.q / 2 - 1

    @property
    def alpha(self) -> Fraction:
        return alpha(self.q)

    @property
    def mdp_exponent(self) -> float:
        """``1/(1+2 gamma)``, which equals ``1/(q-1)``."""
        return 1.0 / (1.0 + 2.0 * self.gamma)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "gamma": self.gamma,
            "K": self.K,
            "L": self.L,
            "alpha": str(self.alpha),
            "delta": self.delta,
            "source": self.source,
            **self.notes,
        }


@dataclass(frozen=True)
class BoundRecord:
    name: str
    inputs: dict
    value: float
    constants_flagged: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"name": self.name, "inputs": self.inputs, "value": self.value,
                "constants_flagged": list(self.constants_flagged)}


def rate_function(z: float, q: int) -> float:
    """Gaussian rate ``z^2 / (2 q!)``."""
    if q < 2:
        raise ValueError("q must be >= 2")
    return z * z / (2 * math.factorial(q))


def tail_bound(z: float, q: int, delta: float) -> float:
    """Upper bound on ``P(|F| >= z)``: ``2 exp(-min(z^2/2^{q/2}, (z delta)^{2/q}) / 4)``."""
    if z < 0:
        raise ValueError("z must be non-negative")
    if not delta > 0:
        raise ValueError("delta must be positive")
    first = z * z / 2 ** (q / 2)
    second = math.inf if math.isinf(delta) and z > 0 else (z * delta) ** (2 / q)
    return 2.0 * math.exp(-0.25 * min(first, second))


def major_bound(z: float, q: int, c: float = 1.0) -> float:
    """Hypercontractivity-type tail bound ``c exp(-(z/sqrt(q!))^{2/q} / 2)``; ``c`` unspecified."""
    if c <= 0:
        raise ValueError("c must be positive")
    if z < 0:
        raise ValueError("z must be non-negative")
    return c * math.exp(-0.5 * (z / math.sqrt(math.factorial(q))) ** (2 / q))


def tail_beats_major(z: float, q: int, delta: float, c: float = 1.0) -> bool:
    return tail_bound(z, q, delta) < major_bound(z, q, c)


#: ``(q, z, delta)`` points where the contraction-based bound is strictly
#: smaller than the hypercontractivity bound with ``c = 1``.
improvement_grid = tuple(
    (q, z, d)
    for q in (2, 3)
    for z in (8.0, 12.0, 20.0)
    for d in (100.0, 1000.0)
)


def gaussian_tail(z: float, var: float = 1.0) -> float:
    """``1 - Phi_var(z)`` via the complementary error function."""
    if not var > 0:
        raise ValueError("variance must be positive")
    return 0.5 * math.erfc(z / math.sqrt(2.0 * var))


def ratio_diagnostic(p_tail: float, z: float, q: int, delta: float, c2: float = 1.0) -> BoundRecord:
    """``|log(p_tail / (1 - Phi_{q!}(z)))|`` beside the constant-free shape
    ``(1 + (z/sqrt(q!))^3) / delta^{1/(q-1)}``.

    A shape comparison only: the multiplying constant is unknown, so no
    pass/fail verdict is attached.
    """
    if not 0 < p_tail < 1:
        raise ValueError("p_tail must lie in (0, 1)")
    if z < 0:
        raise ValueError("z must be non-negative")
    var = math.factorial(q)
    log_ratio = abs(math.log(p_tail / gaussian_tail(z, var)))
    shape = (1 + (z / math.sqrt(var)) ** 3) / delta ** (1 / (q - 1))
    return BoundRecord(
        "ratio",
        {"p_tail": p_tail, "z": z, "q": q, "delta": delta, "c2": c2, "log_ratio": log_ratio},
        c2 * shape,
        ("c2",),
    )


def hermite_sum_tail_lower(n: int, z: float, q: int, C: float = 1.0, c: float = 1.0,
                           z0: float = 0.0) -> float:
    """Lower-bound shape ``C exp(-c n^{1/q} z^{2/q})`` for normalised Hermite sums.

    The bound only applies beyond an unspecified threshold; ``z0`` sets it and
    ``z < z0`` raises ``ValueError``.
    """
    if C <= 0 or c <= 0:
        raise ValueError("constants must be positive")
    if z < 0 or n < 1:
        raise ValueError("need z >= 0 and n >= 1")
    if z < z0:
        raise ValueError(f"z={z} below the threshold z0={z0}")
    return C * math.exp(-c * n ** (1 / q) * z ** (2 / q))


def berry_esseen_shape(delta: float, gamma: float) -> float:
    """``delta^{-1/(1+2 gamma)}`` (Kolmogorov-distance rate up to a constant)."""
    if not delta > 0 or gamma < 0:
        raise ValueError("need delta > 0 and gamma >= 0")
    return delta ** (-1.0 / (1.0 + 2.0 * gamma))


@dataclass(frozen=True)
class ScaleVerdict:
    """Trend classification of a scale sequence against a deviation sequence."""

    verdict: str  # "mdp-window", "no-mdp-window" or "indeterminate"
    ratio_slope: float
    no_mdp_slope: float
    scale_slope: float
    note: str = "log-log slope trend on a finite grid; not a limit statement"


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def mdp_scale_check(n: Sequence[float], a: Sequence[float], delta: Sequence[float], q: int,
                    dead_band: float = 0.02, no_mdp_exponent: float | None = None) -> ScaleVerdict:
    """Classify ``(a_n)`` by log-log slopes over the grid ``n``.

    * ``a_n / delta_n^{1/(q-1)}`` trending down: inside the MDP range.
    * ``a_n / n^{1/(2q-2)}`` trending up: the range where normalised Hermite
      sums provably fail an MDP (``no_mdp_exponent`` overrides ``1/(2q-2)``).
    * neither: the gap the cumulant method cannot decide.
    """
    n, a, delta = (np.asarray(v, dtype=float) for v in (n, a, delta))
    if not (n.shape == a.shape == delta.shape) or n.ndim != 1:
        raise ValueError("n, a and delta must be 1-d sequences of equal length")
    if n.size < 4:
        raise ValueError("need at least 4 grid points")
    if np.any(n <= 0) or np.any(a <= 0) or np.any(delta <= 0):
        raise ValueError("grid values must be positive")
    expo = 1.0 / (2 * q - 2) if no_mdp_exponent is None else no_mdp_exponent
    scale_slope = _slope(n, a)
    ratio_slope = _slope(n, a / delta ** (1.0 / (q - 1)))
    no_mdp_slope = _slope(n, a / n ** expo)
    if scale_slope > dead_band and ratio_slope < -dead_band:
        verdict = "mdp-window"
    elif no_mdp_slope > dead_band:
        verdict = "no-mdp-window"
    else:
        verdict = "indeterminate"
    return ScaleVerdict(verdict, ratio_slope, no_mdp_slope, scale_slope)
