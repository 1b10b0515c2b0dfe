"""Pair partitions of grouped index sets, their multigraphs and matching numbers.

Elements are 0-based internally; :meth:`PairPartition.__str__` prints them
1-based as ``(1,4)(2,5)(3,6)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

__all__ = [
    "CapExceededError",
    "GroupedIndexSet",
    "PairPartition",
    "DiagramMultigraph",
    "CountBounds",
    "enumerate_partitions",
    "count_partitions",
    "partition_to_multigraph",
    "multigraph_classes",
    "matching_number",
    "matching_lower_bound",
    "alpha",
    "count_bounds",
    "ENUMERATION_CAP",
]

#: Default bound on the total number of elements for explicit enumeration.
ENUMERATION_CAP = 20


class CapExceededError(RuntimeError):
    """A configured resource cap would be exceeded."""


@dataclass(frozen=True)
class GroupedIndexSet:
    """Index set ``{0..total-1}`` split into consecutive groups of the given sizes."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"group sizes must be positive, got {self.sizes!r}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def uniform(cls, q: int, m: int) -> "GroupedIndexSet":
        return cls((q,) * m)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def blocks(self) -> tuple[range, ...]:
        out, start = [], 0
        for s in self.sizes:
            out.append(range(start, start + s))
            start += s
        return tuple(out)

    @property
    def group_of(self) -> tuple[int, ...]:
        return tuple(g for g, s in enumerate(self.sizes) for _ in range(s))


@dataclass(frozen=True)
class PairPartition:
    """A partition of a grouped index set into cross-group pairs."""

    pairs: tuple[tuple[int, int], ...]
    groups: GroupedIndexSet

    def __str__(self) -> str:
        return "".join(f"({i + 1},{j + 1})" for i, j in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def validate(self) -> None:
        """Raise ``ValueError`` unless every defining constraint holds."""
        gof = self.groups.group_of
        seen = sorted(x for p in self.pairs for x in p)
        if seen != list(range(self.groups.total)):
            raise ValueError("pairs do not cover the index set exactly once")
        for i, j in self.pairs:
            if gof[i] == gof[j]:
                raise ValueError(f"pair ({i},{j}) lies inside one group")
        if not _groups_connected(len(self.groups.sizes), ((gof[i], gof[j]) for i, j in self.pairs)):
            raise ValueError("partition does not connect all groups")


def _groups_connected(n_groups: int, edges) -> bool:
    parent = list(range(n_groups))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n_groups
    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            components -= 1
    return components == 1


def enumerate_partitions(groups: GroupedIndexSet | Sequence[int], cap: int = ENUMERATION_CAP) -> Iterator[PairPartition]:
    """Yield every partition in the class defined by ``groups`` exactly once.

    Backtracking pairs the smallest unpaired element with a later unpaired
    element from another group; connectivity over groups is checked once a
    pairing is complete.  The yield order is deterministic (lexicographic in
    the pair list).
    """
    if not isinstance(groups, GroupedIndexSet):
        groups = GroupedIndexSet(tuple(groups))
    total = groups.total
    if total > cap:
        raise CapExceededError(f"{total} elements exceed the enumeration cap {cap}")
    if total % 2:
        return
    gof = groups.group_of
    n_groups = len(groups.sizes)
    used = [False] * total
    pairs: list[tuple[int, int]] = []

    def rec(start: int):
        i = start
        while i < total and used[i]:
            i += 1
        if i == total:
            if _groups_connected(n_groups, ((gof[a], gof[b]) for a, b in pairs)):
                yield PairPartition(tuple(pairs), groups)
            return
        used[i] = True
        for j in range(i + 1, total):
            if used[j] or gof[j] == gof[i]:
                continue
            used[j] = True
            pairs.append((i, j))
            yield from rec(i + 1)
            pairs.pop()
            used[j] = False
        used[i] = False

    yield from rec(0)


# exact counting ---------------------------------------------------------------


def _double_factorial_odd(n: int) -> int:
    # (n-1)!! for even n >= 0: number of perfect matchings of n points
    out = 1
    for k in range(n - 1, 0, -2):
        out *= k
    return out


@lru_cache(maxsize=None)
def _loopless_matchings(q: int, k: int) -> int:
    """Perfect matchings of ``k`` groups of size ``q`` with no pair inside a group.

    Inclusion-exclusion over the set of forced intra-group pairs.
    """
    weights = [(-1) ** j * math.factorial(q) // (math.factorial(j) * 2**j * math.factorial(q - 2 * j))
               for j in range(q // 2 + 1)]
    poly = [1]
    for _ in range(k):
        nxt = [0] * (len(poly) + len(weights) - 1)
        for a, x in enumerate(poly):
            for b, y in enumerate(weights):
                nxt[a + b] += x * y
        poly = nxt
    total = 0
    for j, c in enumerate(poly):
        rest = k * q - 2 * j
        if rest % 2 == 0:
            total += c * _double_factorial_odd(rest)
    return total


@lru_cache(maxsize=None)
def _connected_count(q: int, m: int) -> int:
    # connected objects from all objects: split off the component of group 0
    if m == 0:
        return 0
    total = _loopless_matchings(q, m)
    for j in range(1, m):
        total -= math.comb(m - 1, j - 1) * _connected_count(q, j) * _loopless_matchings(q, m - j)
    return total


def count_partitions(q: int, m: int, method: str = "formula", cap: int = ENUMERATION_CAP) -> int:
    """``|Pi(q[m])|``.

    ``method="formula"`` uses exact integer inclusion-exclusion plus the
    connected-component recursion and has no size limit.  ``"enumerate"``
    counts by explicit backtracking and honours ``cap``.
    """
    if q < 1 or m < 1:
        raise ValueError("q and m must be positive")
    if method == "formula":
        return _connected_count(q, m)
    if method == "enumerate":
        return sum(1 for _ in enumerate_partitions(GroupedIndexSet.uniform(q, m), cap=cap))
    raise ValueError(f"unknown method {method!r}")


# multigraphs ------------------------------------------------------------------


@dataclass(frozen=True)
class DiagramMultigraph:
    """Loop-free multigraph on vertices ``0..m-1``; ``edges`` maps ``(i, j), i < j`` to multiplicity."""

    m: int
    edges: tuple[tuple[tuple[int, int], int], ...] = field(default=())

    def __post_init__(self):
        canon: dict[tuple[int, int], int] = {}
        for (i, j), mult in self.edges:
            if i == j:
                raise ValueError("loops are not allowed")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise ValueError(f"edge ({i},{j}) out of range")
            key = (min(i, j), max(i, j))
            canon[key] = canon.get(key, 0) + int(mult)
        object.__setattr__(self, "edges", tuple(sorted((k, v) for k, v in canon.items() if v > 0)))

    @classmethod
    def from_edge_list(cls, m: int, edge_list) -> "DiagramMultigraph":
        return cls(m, tuple(((i, j), 1) for i, j in edge_list))

    @property
    def multiplicities(self) -> dict[tuple[int, int], int]:
        return dict(self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.m
        for (i, j), mult in self.edges:
            deg[i] += mult
            deg[j] += mult
        return deg

    def simple_edges(self) -> list[tuple[int, int]]:
        return [e for e, _ in self.edges]

    def is_connected(self) -> bool:
        if self.m == 0:
            return True
        return _groups_connected(self.m, self.simple_edges())

    def partition_weight(self) -> int:
        """Number of pair partitions of ``Pi(q[m])`` inducing this multigraph (regular case)."""
        deg = self.degrees()
        if len(set(deg)) != 1:
            raise ValueError("weight is defined for regular multigraphs")
        out = math.factorial(deg[0]) ** self.m
        for _, mult in self.edges:
            out //= math.factorial(mult)
        return out


def partition_to_multigraph(sigma: PairPartition) -> DiagramMultigraph:
    """One vertex per group, one edge per pair joining the two groups it touches."""
    gof = sigma.groups.group_of
    mult: dict[tuple[int, int], int] = {}
    for i, j in sigma.pairs:
        a, b = sorted((gof[i], gof[j]))
        if a == b:
            raise ValueError("pair inside a single group")
        mult[(a, b)] = mult.get((a, b), 0) + 1
    return DiagramMultigraph(len(sigma.groups.sizes), tuple(mult.items()))


def multigraph_classes(q: int, m: int) -> Iterator[tuple[DiagramMultigraph, int]]:
    """Yield each connected ``q``-regular loop-free multigraph on ``m`` labelled
    vertices together with the number of partitions in ``Pi(q[m])`` inducing it.

    The weights sum to ``count_partitions(q, m)``; cumulant terms and matching
    numbers depend on a partition only through its multigraph.
    """
    if q < 1 or m < 1:
        raise ValueError("q and m must be positive")
    if (q * m) % 2:
        return
    slots = [(i, j) for i in range(m) for j in range(i + 1, m)]
    remaining = [q] * m
    chosen: list[int] = [0] * len(slots)

    def rec(k: int):
        if k == len(slots):
            if any(remaining):
                return
            g = DiagramMultigraph(m, tuple((slots[t], chosen[t]) for t in range(len(slots)) if chosen[t]))
            if g.is_connected():
                yield g, g.partition_weight()
            return
        i, j = slots[k]
        # vertex i sees no further slots after its last pair (i, m-1)
        if j == m - 1:
            lo = hi = remaining[i]
            if hi > remaining[j]:
                return
        else:
            lo, hi = 0, min(remaining[i], remaining[j])
        for mult in range(lo, hi + 1):
            chosen[k] = mult
            remaining[i] -= mult
            remaining[j] -= mult
            yield from rec(k + 1)
            remaining[i] += mult
            remaining[j] += mult
        chosen[k] = 0

    if m == 1:
        return
    yield from rec(0)


#: Largest vertex count handled by the subset dynamic programme.
MATCHING_VERTEX_CAP = 22


def matching_number(g: DiagramMultigraph) -> int:
    """Size of a maximum matching; parallel edges count once.

    Exact dynamic programme over vertex subsets: the lowest vertex of a subset
    is either left unmatched or matched to one of its neighbours.
    """
    m = g.m
    if m > MATCHING_VERTEX_CAP:
        raise CapExceededError(f"{m} vertices exceed the matching cap {MATCHING_VERTEX_CAP}")
    nbr = [0] * m
    for i, j in g.simple_edges():
        nbr[i] |= 1 << j
        nbr[j] |= 1 << i

    @lru_cache(maxsize=None)
    def best(mask: int) -> int:
        if mask == 0:
            return 0
        v = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << v)
        out = best(rest)
        cand = nbr[v] & rest
        while cand:
            u_bit = cand & -cand
            out = max(out, 1 + best(rest & ~u_bit))
            cand &= ~u_bit
        return out

    return best((1 << m) - 1)


def alpha(q: int) -> Fraction:
    """Exponent of ``K`` per cumulant order beyond the second."""
    if q < 2:
        raise ValueError("alpha(q) is defined for q >= 2")
    if q % 2 == 0:
        return Fraction(q + 2, 3 * q + 2)
    return Fraction(q * q - q - 1, q * (3 * q - 5))


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def matching_lower_bound(q: int, m: int) -> int:
    """Guaranteed matching number of any multigraph induced by ``Pi(q[m])``."""
    if q < 2 or m < 3:
        raise ValueError("defined for q >= 2 and m >= 3")
    if q % 2:
        return _ceil_div((q * q - q - 1) * m - (q - 1), q * (3 * q - 5))
    return min(m // 2, _ceil_div((q + 2) * m, 3 * q + 2))


@dataclass(frozen=True)
class CountBounds:
    """Lower and upper bounds on ``|Pi(q[m])|``.

    ``lower = (m!)^{q/2} 2^{m/2} / 8`` and ``upper = (m!)^{q/2} q^{qm/2}``.
    Float values overflow to ``inf``; ``log_*`` are natural logarithms and the
    ``*_holds`` methods compare exactly through squared integers.
    """

    q: int
    m: int
    lower: float
    upper: float
    log_lower: float
    log_upper: float

    def upper_holds(self, count: int) -> bool:
        # count <= (m!)^{q/2} q^{qm/2}  <=>  count^2 <= (m!)^q q^{qm}
        return count * count <= math.factorial(self.m) ** self.q * self.q ** (self.q * self.m)

    def lower_holds(self, count: int) -> bool:
        # (m!)^{q/2} 2^{m/2} / 8 <= count  <=>  (m!)^q 2^m <= 64 count^2
        return math.factorial(self.m) ** self.q * 2**self.m <= 64 * count * count


def count_bounds(q: int, m: int) -> CountBounds:
    if q < 2 or m < 3:
        raise ValueError("defined for q >= 2 and m >= 3")
    log_mf = math.lgamma(m + 1)
    log_upper = 0.5 * q * log_mf + 0.5 * q * m * math.log(q)
    log_lower = 0.5 * q * log_mf + 0.5 * m * math.log(2) - math.log(8)

    def safe_exp(x):
        return math.exp(x) if x < 709 else math.inf

    return CountBounds(q, m, safe_exp(log_lower), safe_exp(log_upper), log_lower, log_upper)
