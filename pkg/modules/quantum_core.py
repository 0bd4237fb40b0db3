"""Dense quantum-state primitives shared by every other module.

Matrices are plain ``numpy`` complex arrays. The typed wrappers below
(:class:`DensityMatrix`, :class:`UnitaryOperator`, :class:`HermitianObservable`)
validate their invariants once at construction and hold a read-only copy, so
they can be shared freely between threads.

Composite index convention: for ``a ⊗ b`` the basis index is
``i_first * dim_second + i_second`` (``numpy.kron`` order).
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from config.settings import ProtocolDefaults
from modules.errors import ValidationError

logger = logging.getLogger(__name__)

FIRST = "first"
SECOND = "second"


def _frozen(matrix):
    array = np.array(matrix, dtype=np.complex128, copy=True)
    if not np.all(np.isfinite(array)):
        raise ValidationError("matrix has non-finite entries")
    array.setflags(write=False)
    return array


def as_matrix(value):
    """Return the ndarray behind a wrapper, or the value itself as a complex array"""
    if isinstance(value, (DensityMatrix, UnitaryOperator, HermitianObservable)):
        return value.matrix
    array = np.asarray(value, dtype=np.complex128)
    if array.ndim != 2:
        raise ValidationError(f"expected a 2-d matrix, got shape {array.shape}")
    return array


def hermiticity_residual(m):
    m = as_matrix(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def _require_square(m, what):
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"{what} must be square, got shape {m.shape}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one positive-semidefinite matrix"""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        _require_square(m, "density matrix")
        herm = hermiticity_residual(m)
        if herm > ProtocolDefaults.TOL_HERM:
            raise ValidationError(f"density matrix not Hermitian (residual {herm:.3e})")
        trace = np.trace(m).real
        if abs(trace - 1.0) > ProtocolDefaults.TOL_TRACE:
            raise ValidationError(f"density matrix trace is {trace!r}, expected 1")
        lowest = float(np.linalg.eigvalsh(m)[0])
        if lowest < -ProtocolDefaults.TOL_PSD:
            raise ValidationError(f"density matrix has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, vector):
        vector = np.asarray(vector, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValidationError("cannot build a state from the zero vector")
        vector = vector / norm
        return cls(np.outer(vector, vector.conj()))

    @classmethod
    def basis(cls, dim, index):
        return cls(projector(dim, index))

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    """Square matrix with U†U = I"""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        _require_square(m, "unitary")
        residual = float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))
        if residual > ProtocolDefaults.TOL_UNITARY:
            raise ValidationError(f"matrix is not unitary (residual {residual:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def adjoint(self):
        return UnitaryOperator(self.matrix.conj().T)

    def conjugate(self, state):
        """Return U ρ U† as a DensityMatrix"""
        rho = as_matrix(state)
        return DensityMatrix(self.matrix @ rho @ self.matrix.conj().T)


@dataclass(frozen=True, eq=False)
class HermitianObservable:
    """Square matrix equal to its own conjugate transpose"""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        _require_square(m, "observable")
        herm = hermiticity_residual(m)
        if herm > ProtocolDefaults.TOL_HERM:
            raise ValidationError(f"observable not Hermitian (residual {herm:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))

    def spectral_diameter(self):
        eigenvalues = np.linalg.eigvalsh(self.matrix)
        return float(eigenvalues[-1] - eigenvalues[0])


def projector(dim, index):
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[index, index] = 1.0
    return m


def basis_vector(dim, index):
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def tensor_product(a, b):
    """Kronecker product, composite index = i_first * dim_second + i_second"""
    return np.kron(as_matrix(a), as_matrix(b))


def _keep_index(keep):
    if keep in (0, FIRST):
        return 0
    if keep in (1, SECOND):
        return 1
    raise ValidationError(f"keep must be 'first' or 'second', got {keep!r}")


def partial_trace(m, dims, keep=FIRST):
    """Trace out one factor of a bipartite matrix and return the kept factor"""
    m = as_matrix(m)
    d1, d2 = (int(x) for x in dims)
    if d1 < 1 or d2 < 1:
        raise ValidationError(f"factor dimensions must be positive, got {dims}")
    if m.shape != (d1 * d2, d1 * d2):
        raise ValidationError(f"matrix shape {m.shape} does not match dims {d1}x{d2}")
    blocks = m.reshape(d1, d2, d1, d2)
    if _keep_index(keep) == 0:
        return np.einsum("ikjk->ij", blocks)
    return np.einsum("kikj->ij", blocks)


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")


def trace_distance(a, b):
    """Half the Schatten-1 norm of the difference, clipped to [0, 1]"""
    a, b = as_matrix(a), as_matrix(b)
    _check_same_shape(a, b)
    diff = a - b
    diff = (diff + diff.conj().T) / 2
    value = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
    return min(max(value, 0.0), 1.0)


def expectation(obs, state):
    """Real expectation value Tr[ρ Q]"""
    q, rho = as_matrix(obs), as_matrix(state)
    _check_same_shape(q, rho)
    value = np.trace(rho @ q)
    if abs(value.imag) > ProtocolDefaults.TOL_HERM:
        raise ValidationError(
            f"expectation has imaginary part {value.imag:.3e}; observable is not Hermitian"
        )
    return float(value.real)


def random_density_matrix(dim, seed):
    """Seeded state from the normalized G·G† ensemble"""
    if dim < 1:
        raise ValidationError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real)


def random_unitary(dim, seed):
    """Seeded Haar-random unitary"""
    return UnitaryOperator(unitary_group.rvs(dim, random_state=np.random.default_rng(seed)))


def eigendecompose(m):
    """Eigenvalues (ascending) and unitary eigenvector matrix of a Hermitian matrix"""
    m = as_matrix(m)
    _require_square(m, "observable")
    herm = hermiticity_residual(m)
    if herm > ProtocolDefaults.TOL_HERM:
        raise ValidationError(f"cannot eigendecompose non-Hermitian matrix (residual {herm:.3e})")
    eigenvalues, eigenvectors = scipy.linalg.eigh((m + m.conj().T) / 2)
    residual = float(np.max(np.abs(eigenvectors @ np.diag(eigenvalues) @ eigenvectors.conj().T - m)))
    if residual > ProtocolDefaults.TOL_EIG:
        logger.warning("eigendecomposition residual %.3e exceeds tolerance", residual)
    return eigenvalues, eigenvectors


def spectral_projectors(m, atol=1e-9):
    """Group the spectrum into (eigenvalue, projector) pairs.

    Eigenvalues closer than ``atol`` are merged, so the projectors do not
    depend on the basis chosen inside a degenerate eigenspace.
    """
    eigenvalues, eigenvectors = eigendecompose(m)
    groups = []
    start = 0
    for i in range(1, len(eigenvalues) + 1):
        if i == len(eigenvalues) or eigenvalues[i] - eigenvalues[i - 1] > atol:
            vecs = eigenvectors[:, start:i]
            groups.append((float(np.mean(eigenvalues[start:i])), vecs @ vecs.conj().T))
            start = i
    return groups


def matrix_exponential_hermitian(h, t):
    """e^{-i t H} for Hermitian H, via its eigendecomposition"""
    eigenvalues, eigenvectors = eigendecompose(h)
    return (eigenvectors * np.exp(-1j * t * eigenvalues)) @ eigenvectors.conj().T
