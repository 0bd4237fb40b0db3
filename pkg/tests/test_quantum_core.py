import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from modules.errors import ValidationError
from modules.quantum_core import (
    FIRST,
    SECOND,
    DensityMatrix,
    HermitianObservable,
    UnitaryOperator,
    eigendecompose,
    expectation,
    matrix_exponential_hermitian,
    partial_trace,
    random_density_matrix,
    random_unitary,
    spectral_projectors,
    tensor_product,
    trace_distance,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_density_matrix_rejects_invalid_inputs():
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.ones((2, 3)) / 2)


def test_density_matrix_is_read_only():
    rho = DensityMatrix.maximally_mixed(2)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1.0


def test_unitary_and_observable_validation():
    with pytest.raises(ValidationError):
        UnitaryOperator(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        HermitianObservable(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert UnitaryOperator(np.eye(3)).dim == 3


def test_tensor_product_index_convention():
    a = np.diag([1.0, 2.0])
    b = np.diag([1.0, 10.0, 100.0])
    ab = tensor_product(a, b)
    # index i_first * dim_second + i_second
    assert ab[1 * 3 + 2, 1 * 3 + 2] == pytest.approx(200.0)


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_partial_trace_of_product_state_returns_factors(seed):
    a = random_density_matrix(2, seed)
    b = random_density_matrix(3, seed + 1)
    ab = tensor_product(a, b)
    np.testing.assert_allclose(partial_trace(ab, (2, 3), keep=FIRST), a.matrix, atol=1e-12)
    np.testing.assert_allclose(partial_trace(ab, (2, 3), keep=SECOND), b.matrix, atol=1e-12)


def test_partial_trace_rejects_wrong_dims():
    with pytest.raises(ValidationError):
        partial_trace(np.eye(6) / 6, (2, 2))
    with pytest.raises(ValidationError):
        partial_trace(np.eye(4) / 4, (2, 2), keep="third")


def test_trace_distance_orthogonal_and_identical():
    zero, one = DensityMatrix.basis(2, 0), DensityMatrix.basis(2, 1)
    assert trace_distance(zero, one) == pytest.approx(1.0)
    assert trace_distance(zero, zero) == 0.0
    with pytest.raises(ValidationError):
        trace_distance(zero, DensityMatrix.basis(3, 0))


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_trace_distance_is_unitarily_invariant(seed):
    a, b = random_density_matrix(4, seed), random_density_matrix(4, seed + 1)
    u = random_unitary(4, seed + 2)
    assert trace_distance(u.conjugate(a), u.conjugate(b)) == pytest.approx(trace_distance(a, b), abs=1e-12)


def test_expectation_rejects_non_hermitian():
    rho = DensityMatrix.maximally_mixed(2)
    assert expectation(np.diag([1.0, -1.0]), rho) == pytest.approx(0.0)
    with pytest.raises(ValidationError):
        expectation(np.array([[0.0, 1.0j], [1.0j, 0.0]]) + np.eye(2) * 1j, rho)


def test_random_generators_are_seeded():
    np.testing.assert_array_equal(random_density_matrix(3, 5).matrix, random_density_matrix(3, 5).matrix)
    np.testing.assert_array_equal(random_unitary(3, 5).matrix, random_unitary(3, 5).matrix)
    assert not np.allclose(random_density_matrix(3, 5).matrix, random_density_matrix(3, 6).matrix)


def test_eigendecompose_and_projectors():
    h = np.diag([1.0, 1.0, -2.0])
    values, vectors = eigendecompose(h)
    np.testing.assert_allclose(values, [-2.0, 1.0, 1.0])
    np.testing.assert_allclose(vectors @ np.diag(values) @ vectors.conj().T, h, atol=1e-12)
    groups = spectral_projectors(h)
    assert [round(e, 12) for e, _ in groups] == [-2.0, 1.0]
    np.testing.assert_allclose(groups[1][1], np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    with pytest.raises(ValidationError):
        eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))


@settings(max_examples=20, deadline=None)
@given(seed=seeds, t=st.floats(min_value=-3.0, max_value=3.0))
def test_matrix_exponential_matches_expm(seed, t):
    h = random_density_matrix(3, seed).matrix - np.eye(3) / 3
    np.testing.assert_allclose(matrix_exponential_hermitian(h, t), scipy.linalg.expm(-1j * t * h), atol=1e-12)


@pytest.mark.parametrize("value", [np.nan, np.inf])
def test_non_finite_entries_rejected(value):
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[value, 0.0], [0.0, value]]))
    with pytest.raises(ValidationError):
        HermitianObservable(np.array([[0.0, value], [value, 0.0]]))


PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.diag([1.0, -1.0])


def test_tensor_product_matches_double_loop():
    xz = tensor_product(PAULI_X, PAULI_Z)
    expected = np.zeros((4, 4))
    for i1 in range(2):
        for j1 in range(2):
            for i2 in range(2):
                for j2 in range(2):
                    expected[i1 * 2 + i2, j1 * 2 + j2] = PAULI_X[i1, j1] * PAULI_Z[i2, j2]
    np.testing.assert_array_equal(xz, expected)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_tensor_product_is_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for n in (2, 3, 2))
    np.testing.assert_allclose(
        tensor_product(tensor_product(a, b), c), tensor_product(a, tensor_product(b, c)), atol=1e-12
    )


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_partial_trace_matches_index_summation(seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    keep_first = np.zeros((2, 2), dtype=complex)
    keep_second = np.zeros((3, 3), dtype=complex)
    for i in range(2):
        for j in range(2):
            keep_first[i, j] = sum(m[i * 3 + k, j * 3 + k] for k in range(3))
    for i in range(3):
        for j in range(3):
            keep_second[i, j] = sum(m[k * 3 + i, k * 3 + j] for k in range(2))
    np.testing.assert_allclose(partial_trace(m, (2, 3), keep=FIRST), keep_first, atol=1e-12)
    np.testing.assert_allclose(partial_trace(m, (2, 3), keep=SECOND), keep_second, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, dim=st.integers(min_value=2, max_value=4))
def test_trace_distance_triangle_inequality(seed, dim):
    a, b, c = (random_density_matrix(dim, seed + k) for k in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_trace_distance_matches_singular_values(seed):
    a, b = random_density_matrix(3, seed), random_density_matrix(3, seed + 1)
    oracle = 0.5 * np.sum(np.linalg.svd(a.matrix - b.matrix, compute_uv=False))
    assert trace_distance(a, b) == pytest.approx(oracle, abs=1e-12)


def test_random_density_matrix_edge_dimensions():
    np.testing.assert_allclose(random_density_matrix(1, 3).matrix, [[1.0]], atol=1e-15)
    rho = random_density_matrix(4, 3).matrix
    assert rho.shape == (4, 4)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-12
    with pytest.raises(ValidationError):
        random_density_matrix(0, 3)


def test_eigendecompose_pauli_x():
    values, vectors = eigendecompose(PAULI_X)
    np.testing.assert_allclose(values, [-1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(vectors.conj().T @ vectors, np.eye(2), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_eigendecompose_random_hermitian_residual(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    h = (g + g.conj().T) / 2
    values, vectors = eigendecompose(h)
    assert np.all(np.diff(values) >= 0)
    assert np.max(np.abs(vectors @ np.diag(values) @ vectors.conj().T - h)) < 1e-10
