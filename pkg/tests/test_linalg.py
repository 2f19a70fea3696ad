from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import random_hermitian, random_tuple
from hypothesis import given
from hypothesis import strategies as st

from topfree.linalg import (
    HermitianError,
    HermitianMatrix,
    MatrixTuple,
    ShapeError,
    block_diag,
    eigenvalues,
    eigh,
    eigvalsh,
    hs_metric,
    jacobi_eigh,
    normalized_trace,
    opnorm,
    uniform_metric,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 7)


def test_eigenvalue_examples():
    np.testing.assert_allclose(eigenvalues(HermitianMatrix.identity(3)), [1, 1, 1], atol=1e-14)
    np.testing.assert_allclose(eigenvalues(HermitianMatrix.diag([1, -3])), [-3, 1], atol=1e-14)
    np.testing.assert_allclose(eigenvalues(HermitianMatrix(np.array([[0, 1], [1, 0]]))), [-1, 1], atol=1e-14)


@pytest.mark.parametrize("method", ["jacobi", "lapack", "auto"])
@pytest.mark.parametrize("k", [1, 2, 3, 8, 17])
def test_reconstruction_residual(rng, method, k):
    for _ in range(5):
        a = random_hermitian(rng, k, 3.0)
        lam, U = eigh(HermitianMatrix(a), method=method)
        assert np.all(np.diff(lam) >= 0)
        resid = np.linalg.norm(a - (U * lam) @ U.conj().T)
        assert resid <= 1e-10 * (1 + np.linalg.norm(a))


def test_jacobi_matches_lapack_batched(rng):
    a = np.stack([random_hermitian(rng, 9) for _ in range(50)])
    np.testing.assert_allclose(jacobi_eigh(a), np.linalg.eigvalsh(a), atol=1e-11)


def test_jacobi_above_auto_threshold(rng):
    a = random_hermitian(rng, 70)
    np.testing.assert_allclose(eigvalsh(a, "jacobi"), np.linalg.eigvalsh(a), atol=1e-10)


def test_two_by_two_closed_form_matches_jacobi(rng):
    a = np.stack([random_hermitian(rng, 2) for _ in range(200)])
    np.testing.assert_allclose(eigvalsh(a, "auto"), eigvalsh(a, "jacobi"), atol=1e-13)


def test_non_hermitian_rejected():
    with pytest.raises(HermitianError):
        HermitianMatrix(np.array([[0, 1], [0, 0]]))
    with pytest.raises(HermitianError):
        HermitianMatrix(np.array([[1j, 0], [0, 0]]))


def test_tiny_asymmetry_is_symmetrized():
    a = np.array([[1.0, 2.0 + 1e-14], [2.0, 3.0]])
    m = HermitianMatrix(a)
    assert m.entries[0, 1] == m.entries[1, 0]


def test_literal_round_trip(rng):
    m = HermitianMatrix(random_hermitian(rng, 3))
    assert HermitianMatrix.from_literal(m.to_literal()) == m


def test_opnorm_examples():
    assert opnorm(HermitianMatrix.identity(3)) == pytest.approx(1.0, abs=1e-14)
    assert opnorm(HermitianMatrix.diag([1, -3])) == pytest.approx(3.0, abs=1e-14)


def power_iteration_norm(a: np.ndarray, steps: int = 200, seed: int = 0) -> float:
    # Rayleigh quotient of A^2 on the iterate of A^2
    v = np.random.default_rng(seed).normal(size=a.shape[0]) + 0j
    a2 = a @ a
    for _ in range(steps):
        v = a2 @ v
        v /= np.linalg.norm(v)
    return math.sqrt((v.conj() @ a2 @ v).real)


def test_opnorm_matches_power_iteration(rng):
    for _ in range(10):
        a = random_hermitian(rng, 8)
        assert opnorm(HermitianMatrix(a)) == pytest.approx(power_iteration_norm(a), abs=1e-8)


def test_normalized_trace_examples(rng):
    assert normalized_trace(HermitianMatrix.identity(5)) == pytest.approx(1.0)
    assert normalized_trace(HermitianMatrix.diag([1, -3])) == pytest.approx(-1.0)
    a, b = random_hermitian(rng, 6), random_hermitian(rng, 6)
    comm = 1j * (a @ b - b @ a)  # i[A,B] is Hermitian
    assert abs(normalized_trace(HermitianMatrix(comm))) <= 1e-12


def test_metric_examples(rng):
    t = MatrixTuple(random_tuple(rng, 2, 3))
    assert hs_metric(t, t) == 0.0
    assert uniform_metric(t, t) == 0.0
    assert hs_metric(MatrixTuple.scalars(3.0), MatrixTuple.scalars(1.0)) == pytest.approx(2.0)
    one = MatrixTuple.of(HermitianMatrix.identity(2))
    zero = MatrixTuple.of(HermitianMatrix.zeros(2))
    assert hs_metric(one, zero) == pytest.approx(1.0)
    assert uniform_metric(MatrixTuple.scalars(1, 0), MatrixTuple.scalars(0, 2)) == pytest.approx(2.0)


def test_uniform_dominates_scaled_hs_on_random_pairs(rng):
    for _ in range(100):
        n, k = rng.integers(1, 4), rng.integers(1, 6)
        t1, t2 = MatrixTuple(random_tuple(rng, n, k)), MatrixTuple(random_tuple(rng, n, k))
        assert uniform_metric(t1, t2) >= hs_metric(t1, t2) / math.sqrt(n) - 1e-12


def test_metric_shape_mismatch(rng):
    with pytest.raises(ShapeError):
        hs_metric(MatrixTuple(random_tuple(rng, 2, 3)), MatrixTuple(random_tuple(rng, 2, 4)))
    with pytest.raises(ShapeError):
        uniform_metric(MatrixTuple(random_tuple(rng, 1, 3)), MatrixTuple(random_tuple(rng, 2, 3)))


def test_tuple_needs_common_dim():
    with pytest.raises(ShapeError):
        MatrixTuple.of(HermitianMatrix.identity(2), HermitianMatrix.identity(3))


@given(seeds, dims, st.floats(-5, 5))
def test_opnorm_is_a_norm(seed, k, c):
    r = np.random.default_rng(seed)
    a, b = random_hermitian(r, k), random_hermitian(r, k)
    na, nb = opnorm(HermitianMatrix(a)), opnorm(HermitianMatrix(b))
    assert opnorm(HermitianMatrix(a + b)) <= na + nb + 1e-10
    assert opnorm(HermitianMatrix(c * a)) == pytest.approx(abs(c) * na, abs=1e-10)


@given(seeds, st.integers(1, 3), dims)
def test_metric_comparison(seed, n, k):
    r = np.random.default_rng(seed)
    t1, t2 = MatrixTuple(random_tuple(r, n, k)), MatrixTuple(random_tuple(r, n, k))
    hs, un = hs_metric(t1, t2), uniform_metric(t1, t2)
    assert hs <= math.sqrt(n) * un + 1e-10
    assert un <= math.sqrt(k) * hs + 1e-10


@given(seeds, dims, dims)
def test_direct_sum_spectrum_is_union(seed, k1, k2):
    r = np.random.default_rng(seed)
    a, b = random_hermitian(r, k1), random_hermitian(r, k2)
    lam = eigvalsh(block_diag(a, b))
    np.testing.assert_allclose(lam, np.sort(np.concatenate([eigvalsh(a), eigvalsh(b)])), atol=1e-10)
