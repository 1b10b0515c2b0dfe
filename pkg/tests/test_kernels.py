import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaoscum.kernels import (
    KernelParseError,
    SymmetricKernel,
    compute_K,
    compute_K_squared,
    contract,
    contraction_norms,
    normalize,
    read_kernel,
    tensor_norm,
    write_kernel,
)


def dense_contraction(a, b, r):
    """Reference contraction on full arrays: sum the last r axes of a with the first r of b."""
    return np.tensordot(a, b, axes=(list(range(a.ndim - r, a.ndim)), list(range(r))))


def random_kernel(q, n, seed):
    h = SymmetricKernel.random(q, n, np.random.default_rng(seed))
    return normalize(h)


kernel_params = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))


def test_canonical_storage_and_multiplicity():
    h = SymmetricKernel(3, 3, {(2, 0, 1): 1.5, (1, 1, 0): -2})
    assert list(h.coeffs) == [(0, 1, 1), (0, 1, 2)]
    assert h[(2, 1, 0)] == 1.5 and h[(0, 2, 2)] == 0
    assert SymmetricKernel.multiplicity((0, 1, 1)) == 3
    assert SymmetricKernel.multiplicity((0, 1, 2)) == 6
    assert h.squared_norm() == pytest.approx(6 * 1.5**2 + 3 * 4)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        SymmetricKernel(2, 2, {(0, 2): 1.0})
    with pytest.raises(ValueError):
        SymmetricKernel(2, 2, {(0, 1): 1.0, (1, 0): 2.0})
    with pytest.raises(ValueError):
        SymmetricKernel(0, 2, {})
    with pytest.raises(ValueError):
        SymmetricKernel.from_dense(np.array([[0.0, 1.0], [2.0, 0.0]]))


@given(kernel_params)
@settings(max_examples=40, deadline=None)
def test_dense_round_trip(params):
    q, n, seed = params
    h = SymmetricKernel.random(q, n, np.random.default_rng(seed))
    arr = h.to_dense()
    assert SymmetricKernel.from_dense(arr) == h
    assert math.isclose(float(np.sum(arr * arr)), float(h.squared_norm()), rel_tol=1e-12)


@given(kernel_params, st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_contraction_matches_dense(params, r):
    q, n, seed = params
    if r > q:
        return
    h = SymmetricKernel.random(q, n, np.random.default_rng(seed))
    g = SymmetricKernel.random(q, n, np.random.default_rng(seed + 1))
    got = contract(h, g, r)
    ref = dense_contraction(h.to_dense(), g.to_dense(), r)
    np.testing.assert_allclose(got.to_dense(), ref, atol=1e-10)


@given(st.tuples(st.integers(2, 4), st.integers(1, 4), st.integers(0, 10_000)))
@settings(max_examples=40, deadline=None)
def test_K_properties(params):
    q, n, seed = params
    h = random_kernel(q, n, seed)
    K = compute_K(h)
    # Cauchy-Schwarz keeps every contraction norm in [0, 1] for a unit kernel
    assert 0.0 <= K <= 1.0 + 1e-12
    dense = h.to_dense()
    for r, value in contraction_norms(h).items():
        ref = np.linalg.norm(dense_contraction(dense, dense, r))
        assert value == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert compute_K_squared(h) == pytest.approx(K * K, rel=1e-9)


def test_contraction_norms_symmetric_in_r():
    h = random_kernel(4, 3, 5)
    norms = contraction_norms(h)
    assert norms[1] == norms[3]


def test_atom_kernel_has_K_one():
    assert compute_K(SymmetricKernel.atom(3)) == 1.0


def test_K_requires_normalisation():
    with pytest.raises(ValueError):
        compute_K(SymmetricKernel.hermite_sum(2, 4, normalized=False))


def test_exact_K_squared_hermite_sum():
    for q in (2, 3, 4):
        for n in (1, 2, 7, 30):
            val = compute_K_squared(SymmetricKernel.hermite_sum(q, n, normalized=False))
            assert isinstance(val, Fraction) and val == Fraction(1, n)


def test_tensor_norm_and_normalize():
    h = SymmetricKernel.hermite_sum(2, 4, normalized=False)
    assert tensor_norm(h) == 2.0
    assert normalize(h).is_normalized()
    with pytest.raises(ValueError):
        normalize(SymmetricKernel(2, 2, {}))


@given(kernel_params)
@settings(max_examples=30, deadline=None)
def test_file_round_trip_is_exact(params):
    q, n, seed = params
    h = SymmetricKernel.random(q, n, np.random.default_rng(seed))
    assert read_kernel(write_kernel(h)) == h


def test_fraction_round_trip(tmp_path):
    h = SymmetricKernel(2, 3, {(0, 0): Fraction(1, 3), (1, 2): 5})
    path = tmp_path / "k.txt"
    with open(path, "w") as fh:
        write_kernel(h, fh)
    back = read_kernel(str(path))
    assert back == h and isinstance(back[(0, 0)], Fraction)


@pytest.mark.parametrize("text", [
    "",
    "order two dim 3\n",
    "order 2 dim 3\n1 2\n",
    "order 2 dim 3\n1 x 1.0\n",
    "order 2 dim 3\n1 4 1.0\n",
])
def test_parse_errors(text):
    with pytest.raises(KernelParseError):
        read_kernel(io.StringIO(text))


def test_missing_file():
    with pytest.raises(KernelParseError):
        read_kernel("/nonexistent/kernel.txt")
