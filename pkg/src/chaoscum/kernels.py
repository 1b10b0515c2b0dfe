"""Symmetric tensors standing in for chaos kernels on a finite orthonormal basis.

A kernel of order ``q`` over ``R^N`` is stored canonically: one coefficient per
non-decreasing index tuple (0-based).  The full tensor value at any permutation
of a stored key equals the stored coefficient.

Coefficients may be ``float`` or any exact numeric type closed under ``+`` and
``*`` (``int``, ``fractions.Fraction``); the dict-based contraction keeps them
exact, which is what :func:`compute_K_squared` relies on.
"""
from __future__ import annotations

import io
import math
from collections import defaultdict
from fractions import Fraction
from itertools import permutations
from numbers import Real
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SymmetricKernel",
    "GeneralTensor",
    "KernelParseError",
    "contract",
    "tensor_norm",
    "normalize",
    "compute_K",
    "compute_K_squared",
    "contraction_norms",
    "read_kernel",
    "write_kernel",
    "DENSE_CAP",
]

#: Largest ``N**order`` for which a dense array is materialised.
DENSE_CAP = 10**6


class KernelParseError(ValueError):
    """Raised when a kernel text file cannot be parsed."""


def _multiplicity(key: tuple[int, ...]) -> int:
    # number of distinct orderings of the multiset ``key``
    out = math.factorial(len(key))
    run = 1
    for a, b in zip(key, key[1:]):
        if a == b:
            run += 1
        else:
            out //= math.factorial(run)
            run = 1
    return out // math.factorial(run)


def _distinct_permutations(key: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    if len(key) <= 1:
        yield key
        return
    seen = set()
    for i, v in enumerate(key):
        if v in seen:
            continue
        seen.add(v)
        for rest in _distinct_permutations(key[:i] + key[i + 1:]):
            yield (v,) + rest


class SymmetricKernel:
    """Order-``q`` symmetric tensor over ``R^N`` with canonical multiset storage.

    Parameters
    ----------
    order : int
        Tensor order ``q >= 1``.
    dim : int
        Dimension ``N`` of the underlying space.
    coeffs : mapping
        Index tuple -> coefficient.  Keys are sorted on construction; two keys
        that sort to the same multiset are rejected rather than summed.
    """

    __slots__ = ("_order", "_dim", "_coeffs")

    def __init__(self, order: int, dim: int, coeffs: Mapping[tuple[int, ...], Real]):
        if int(order) != order or order < 1:
            raise ValueError(f"order must be a positive integer, got {order!r}")
        if int(dim) != dim or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        order, dim = int(order), int(dim)
        canon: dict[tuple[int, ...], Real] = {}
        for key, value in coeffs.items():
            key = tuple(sorted(int(i) for i in key))
            if len(key) != order:
                raise ValueError(f"index {key} has length {len(key)}, expected {order}")
            if key[0] < 0 or key[-1] >= dim:
                raise ValueError(f"index {key} out of range for dim={dim}")
            if key in canon:
                raise ValueError(f"duplicate canonical index {key}")
            if isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"non-finite coefficient at {key}")
            if value != 0:
                canon[key] = value
        self._order = order
        self._dim = dim
        self._coeffs = dict(sorted(canon.items()))

    # construction helpers -------------------------------------------------

    @classmethod
    def from_dense(cls, array, atol: float = 0.0) -> "SymmetricKernel":
        """Build from a full ``N x ... x N`` array, checking symmetry to ``atol``."""
        arr = np.asarray(array)
        if arr.ndim < 1 or len(set(arr.shape)) != 1:
            raise ValueError(f"expected a cubical array, got shape {arr.shape}")
        q, n = arr.ndim, arr.shape[0]
        for perm in permutations(range(q)):
            if not np.allclose(arr, arr.transpose(perm), rtol=0.0, atol=atol):
                raise ValueError("array is not symmetric under index permutation")
        coeffs = {}
        for idx in zip(*np.nonzero(arr)):
            key = tuple(int(i) for i in idx)
            if list(key) == sorted(key):
                coeffs[key] = arr[idx].item()
        return cls(q, n, coeffs)

    @classmethod
    def from_matrix(cls, matrix) -> "SymmetricKernel":
        """Order-2 kernel with coefficient ``A[i, j]`` at ``(i, j)``."""
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        if not np.array_equal(A, A.T):
            raise ValueError("matrix must be exactly symmetric")
        return cls.from_dense(A)

    @classmethod
    def atom(cls, order: int, dim: int = 1, index: int = 0, value: Real = 1.0) -> "SymmetricKernel":
        """``value * e_index^{(x) order}``."""
        return cls(order, dim, {(index,) * order: value})

    @classmethod
    def hermite_sum(cls, order: int, n: int, normalized: bool = True) -> "SymmetricKernel":
        """``sum_{k<n} e_k^{(x) order}``, scaled by ``1/sqrt(n)`` when normalized.

        With ``normalized=False`` the coefficients are the integer 1, so exact
        arithmetic downstream stays exact.
        """
        value: Real = 1.0 / math.sqrt(n) if normalized else 1
        return cls(order, n, {(k,) * order: value for k in range(n)})

    @classmethod
    def random(cls, order: int, dim: int, rng=None, density: float = 1.0) -> "SymmetricKernel":
        """Kernel with i.i.d. standard normal canonical coefficients (not normalized)."""
        rng = np.random.default_rng(rng)
        coeffs = {}
        for key in _canonical_keys(order, dim):
            if density >= 1.0 or rng.random() < density:
                coeffs[key] = float(rng.standard_normal())
        return cls(order, dim, coeffs)

    # accessors ------------------------------------------------------------

    @property
    def order(self) -> int:
        return self._order

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def coeffs(self) -> Mapping[tuple[int, ...], Real]:
        return dict(self._coeffs)

    def items(self) -> Iterable[tuple[tuple[int, ...], Real]]:
        return self._coeffs.items()

    def __len__(self) -> int:
        return len(self._coeffs)

    def __getitem__(self, index: tuple[int, ...]) -> Real:
        key = tuple(sorted(index))
        if len(key) != self._order:
            raise IndexError(f"expected {self._order} indices")
        return self._coeffs.get(key, 0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymmetricKernel):
            return NotImplemented
        return (self._order, self._dim, self._coeffs) == (other._order, other._dim, other._coeffs)

    def __hash__(self) -> int:
        return hash((self._order, self._dim, tuple(self._coeffs.items())))

    def __repr__(self) -> str:
        return f"SymmetricKernel(order={self._order}, dim={self._dim}, nnz={len(self._coeffs)})"

    def __mul__(self, c: Real) -> "SymmetricKernel":
        return SymmetricKernel(self._order, self._dim, {k: c * v for k, v in self._coeffs.items()})

    __rmul__ = __mul__

    @staticmethod
    def multiplicity(key: tuple[int, ...]) -> int:
        """Number of full-tensor positions represented by a canonical key."""
        return _multiplicity(tuple(sorted(key)))

    def squared_norm(self) -> Real:
        """Squared Euclidean norm of the full symmetric tensor (exact for exact types)."""
        return sum((_multiplicity(k) * v * v for k, v in self._coeffs.items()), 0)

    def norm(self) -> float:
        return math.sqrt(self.squared_norm())

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(float(self.squared_norm()) - 1.0) <= tol

    def expanded(self) -> Iterator[tuple[tuple[int, ...], Real]]:
        """All full-tensor positions with non-zero value."""
        for key, value in self._coeffs.items():
            for perm in _distinct_permutations(key):
                yield perm, value

    def to_dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        size = self._dim ** self._order
        if size > cap:
            raise MemoryError(f"dense expansion needs {size} entries (> cap {cap})")
        arr = np.zeros((self._dim,) * self._order)
        for idx, value in self.expanded():
            arr[idx] = float(value)
        return arr


def _canonical_keys(order: int, dim: int) -> Iterator[tuple[int, ...]]:
    from itertools import combinations_with_replacement

    return combinations_with_replacement(range(dim), order)


class GeneralTensor:
    """Sparse tensor without symmetry assumptions (result of a contraction)."""

    __slots__ = ("order", "dim", "entries")

    def __init__(self, order: int, dim: int, entries: Mapping[tuple[int, ...], Real] | None = None):
        if order < 0 or dim < 1:
            raise ValueError("order must be >= 0 and dim >= 1")
        self.order = int(order)
        self.dim = int(dim)
        self.entries = {}
        for idx, v in (entries or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.order or any(i < 0 or i >= self.dim for i in idx):
                raise ValueError(f"index {idx} inconsistent with order={order}, dim={dim}")
            if v != 0:
                self.entries[idx] = v

    def __getitem__(self, idx: tuple[int, ...]) -> Real:
        return self.entries.get(tuple(idx), 0)

    def __repr__(self) -> str:
        return f"GeneralTensor(order={self.order}, dim={self.dim}, nnz={len(self.entries)})"

    def scalar(self) -> Real:
        if self.order != 0:
            raise ValueError("only order-0 tensors are scalars")
        return self.entries.get((), 0)

    def squared_norm(self) -> Real:
        return sum((v * v for v in self.entries.values()), 0)

    def to_dense(self, cap: int = DENSE_CAP) -> np.ndarray:
        if self.dim ** self.order > cap:
            raise MemoryError("dense expansion exceeds cap")
        arr = np.zeros((self.dim,) * self.order)
        for idx, v in self.entries.items():
            arr[idx] = float(v)
        return arr


def _group_by_prefix(h: SymmetricKernel, r: int) -> dict[tuple[int, ...], list]:
    groups: dict[tuple[int, ...], list] = defaultdict(list)
    for idx, value in h.expanded():
        groups[idx[:r]].append((idx[r:], value))
    return groups


def contract(f: SymmetricKernel, g: SymmetricKernel, r: int) -> GeneralTensor:
    """``r``-th contraction: identify ``r`` slots of ``f`` and ``g`` and sum them out.

    Entries are grouped on the shared index block, so the cost is
    ``sum_x |f_x| * |g_x|`` over shared blocks ``x`` rather than ``N**(p+q-r)``.
    """
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} != {g.dim}")
    if not 1 <= r <= min(f.order, g.order):
        raise ValueError(f"r={r} out of range 1..{min(f.order, g.order)}")
    fg = _group_by_prefix(f, r)
    gg = fg if g is f else _group_by_prefix(g, r)
    out: dict[tuple[int, ...], Real] = defaultdict(int)
    for x, f_rows in fg.items():
        g_rows = gg.get(x)
        if not g_rows:
            continue
        for a, fv in f_rows:
            for b, gv in g_rows:
                out[a + b] += fv * gv
    return GeneralTensor(f.order + g.order - 2 * r, f.dim, out)


def tensor_norm(t: SymmetricKernel | GeneralTensor) -> float:
    """Euclidean norm of the full coefficient array."""
    return math.sqrt(t.squared_norm())


def normalize(h: SymmetricKernel) -> SymmetricKernel:
    """Rescale to unit norm.  Already-normalised kernels are returned unchanged."""
    sq = float(h.squared_norm())
    if sq == 0.0:
        raise ValueError("cannot normalize the zero kernel")
    if sq == 1.0:
        return h
    scale = 1.0 / math.sqrt(sq)
    return SymmetricKernel(h.order, h.dim, {k: float(v) * scale for k, v in h.items()})


def _matricize(h: SymmetricKernel, r: int) -> sp.csr_matrix:
    n = h.dim
    rows, cols, vals = [], [], []
    for idx, value in h.expanded():
        ri = 0
        for i in idx[:r]:
            ri = ri * n + i
        ci = 0
        for i in idx[r:]:
            ci = ci * n + i
        rows.append(ri)
        cols.append(ci)
        vals.append(float(value))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n ** r, n ** (h.order - r)))


def contraction_norms(h: SymmetricKernel) -> dict[int, float]:
    """``{r: ||h (x)_r h||}`` for ``r = 1..q-1``, evaluated without dense tensors.

    With ``M`` the ``N^r x N^(q-r)`` unfolding of ``h``, ``h (x)_r h = M^T M`` and
    its Frobenius norm equals that of the smaller Gram matrix ``M M^T``.
    """
    q = h.order
    if q < 2:
        raise ValueError("contraction norms need order >= 2")
    if h.dim ** max(1, q - 1) >= 2**62:
        raise OverflowError("index space too large for the sparse unfolding")
    out = {}
    for r in range(1, q):
        s = min(r, q - r)
        if s in out:
            out[r] = out[s]
            continue
        M = _matricize(h, s)
        G = (M @ M.T) if M.shape[0] <= M.shape[1] else (M.T @ M)
        out[r] = math.sqrt(float(np.sum(G.data ** 2)))
    return out


def compute_K(h: SymmetricKernel, tol: float = 1e-9) -> float:
    """``max_{1 <= r < q} ||h (x)_r h||`` for a unit-norm kernel.

    ``tol`` bounds the accepted deviation of ``||h||^2`` from 1.
    """
    if h.order < 2:
        raise ValueError("K is defined for order >= 2")
    if not h.is_normalized(tol):
        raise ValueError(f"kernel must be normalized (||h||^2 = {float(h.squared_norm())!r})")
    return max(contraction_norms(h).values())


def compute_K_squared(h: SymmetricKernel) -> Real:
    """Exact ``K^2 = max_r ||h (x)_r h||^2 / ||h||^4``, scale invariant.

    With integer or ``Fraction`` coefficients the result is a ``Fraction``; the
    kernel need not be normalised.
    """
    if h.order < 2:
        raise ValueError("K is defined for order >= 2")
    sq = h.squared_norm()
    if sq == 0:
        raise ValueError("zero kernel")
    best = max(contract(h, h, r).squared_norm() for r in range(1, h.order // 2 + 1))
    if isinstance(best, (int, Fraction)) and isinstance(sq, (int, Fraction)):
        return Fraction(best) / (Fraction(sq) ** 2)
    return best / (sq * sq)


# text exchange format -------------------------------------------------------


def _format_value(v: Real) -> str:
    if isinstance(v, bool):
        raise TypeError("boolean coefficient")
    if isinstance(v, (int, Fraction)):
        return str(v)
    return repr(float(v))


def _parse_value(tok: str) -> Real:
    if "/" in tok:
        return Fraction(tok)
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def write_kernel(h: SymmetricKernel, fh=None) -> str | None:
    """Write ``h`` as ``order q dim N`` followed by ``i1 .. iq value`` lines (1-based).

    Floats are written with ``repr`` so reading back is bit-exact.  Returns the
    text when ``fh`` is None.
    """
    buf = io.StringIO() if fh is None else fh
    buf.write(f"order {h.order} dim {h.dim}\n")
    for key, value in h.items():
        buf.write(" ".join(str(i + 1) for i in key) + " " + _format_value(value) + "\n")
    return buf.getvalue() if fh is None else None


def read_kernel(source) -> SymmetricKernel:
    """Parse the text format written by :func:`write_kernel`.

    ``source`` is a path, an open text file, or the text itself (detected by a
    leading ``order`` header).
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and source.lstrip().startswith("order"):
        text = source
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise KernelParseError(f"cannot read kernel file: {exc}") from exc
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise KernelParseError("empty kernel file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "order" or head[2] != "dim":
        raise KernelParseError(f"bad header {lines[0]!r}; expected 'order q dim N'")
    try:
        q, n = int(head[1]), int(head[3])
    except ValueError as exc:
        raise KernelParseError(f"bad header {lines[0]!r}") from exc
    coeffs = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        toks = ln.split()
        if len(toks) != q + 1:
            raise KernelParseError(f"line {lineno}: expected {q} indices and a value")
        try:
            key = tuple(int(t) - 1 for t in toks[:q])
            value = _parse_value(toks[q])
        except ValueError as exc:
            raise KernelParseError(f"line {lineno}: {exc}") from exc
        if tuple(sorted(key)) != key:
            raise KernelParseError(f"line {lineno}: indices must be non-decreasing")
        if key in coeffs:
            raise KernelParseError(f"line {lineno}: duplicate index")
        coeffs[key] = value
    try:
        return SymmetricKernel(q, n, coeffs)
    except ValueError as exc:
        raise KernelParseError(str(exc)) from exc
