"""Channel characterization through the Choi state and the work-cost protocol.

A channel E on a d-dimensional system S is mapped to its normalized Choi state
ρ_BS = (I ⊗ E)(|ψ⟩⟨ψ|) with |ψ⟩ = Σ_k |kk⟩/√d. The Choi state is an ordinary
D = d² dimensional density matrix, so the state protocol reconstructs it.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.stats import unitary_group

from config.settings import ProtocolDefaults
from modules.battery import run_protocol
from modules.errors import ValidationError
from modules.quantum_core import (
    FIRST,
    DensityMatrix,
    as_matrix,
    basis_vector,
    eigendecompose,
    partial_trace,
    trace_distance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Trace-preserving channel on a d-dimensional system, in Kraus form"""

    kraus: Tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.array(as_matrix(k), dtype=np.complex128) for k in self.kraus)
        if not ops:
            raise ValidationError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise ValidationError(f"Kraus operator shape {k.shape}, expected {(d, d)}")
            k.setflags(write=False)
        completeness = sum(k.conj().T @ k for k in ops)
        residual = float(np.max(np.abs(completeness - np.eye(d))))
        if residual > ProtocolDefaults.TOL_UNITARY:
            raise ValidationError(f"Kraus operators are not complete (residual {residual:.3e})")
        object.__setattr__(self, "kraus", ops)

    @property
    def d(self):
        return self.kraus[0].shape[0]

    @property
    def rank(self):
        return len(self.kraus)

    def apply(self, rho):
        m = as_matrix(rho)
        return DensityMatrix(sum(k @ m @ k.conj().T for k in self.kraus))


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Trace-one Choi state on B⊗S"""

    d: int
    matrix: DensityMatrix
    warning: Optional[str] = None

    def __post_init__(self):
        matrix = self.matrix if isinstance(self.matrix, DensityMatrix) else DensityMatrix(self.matrix)
        if matrix.dim != self.d * self.d:
            raise ValidationError(f"Choi matrix of dimension {matrix.dim} does not match d={self.d}")
        object.__setattr__(self, "matrix", matrix)

    def marginal_deviation(self):
        """Largest entry of Tr_S[ρ_BS] − I/d"""
        marginal = partial_trace(self.matrix, (self.d, self.d), keep=FIRST)
        return float(np.max(np.abs(marginal - np.eye(self.d) / self.d)))


def maximally_entangled_state(d):
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
        raise ValidationError(f"maximally entangled state needs d >= 2, got {d!r}")
    d = int(d)
    psi = sum(basis_vector(d * d, k * d + k) for k in range(d)) / np.sqrt(d)
    return DensityMatrix.from_pure(psi)


def apply_channel_to_subsystem(channel, state):
    """(I ⊗ E)(ρ) with E acting on the second factor"""
    rho = as_matrix(state)
    n, d = rho.shape[0], channel.d
    if n % d:
        raise ValidationError(f"state dimension {n} is not a multiple of channel dimension {d}")
    identity = np.eye(n // d)
    out = np.zeros_like(rho)
    for k in channel.kraus:
        lifted = np.kron(identity, k)
        out += lifted @ rho @ lifted.conj().T
    return DensityMatrix(out)


def exact_choi(channel):
    return ChoiMatrix(channel.d, apply_channel_to_subsystem(channel, maximally_entangled_state(channel.d)))


def choi_distance(a, b):
    if a.d != b.d:
        raise ValidationError(f"cannot compare Choi matrices of d={a.d} and d={b.d}")
    return trace_distance(a.matrix, b.matrix)


def kraus_from_choi(choi, cutoff=1e-12):
    """One Kraus decomposition of the channel behind a Choi state"""
    d = choi.d
    eigenvalues, eigenvectors = eigendecompose(d * as_matrix(choi.matrix))
    kraus = [
        np.sqrt(value) * eigenvectors[:, i].reshape(d, d).T
        for i, value in enumerate(eigenvalues)
        if value > cutoff
    ]
    return QuantumChannel(tuple(kraus))


def identity_channel(d):
    return QuantumChannel((np.eye(d, dtype=np.complex128),))


def unitary_channel(U):
    return QuantumChannel((as_matrix(U),))


def _check_probability(p, what):
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"{what} must lie in [0, 1], got {p!r}")


def bit_flip_channel(p):
    _check_probability(p, "flip probability")
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    return QuantumChannel((np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * x))


def _weyl_operators(d):
    shift = np.roll(np.eye(d, dtype=np.complex128), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(d)
        for b in range(d)
    ]


def depolarizing_channel(d, p):
    """ρ → (1 − p)ρ + p·I/d, Kraus operators from the Weyl basis"""
    _check_probability(p, "depolarizing probability")
    weyl = _weyl_operators(d)
    weights = [1 - p + p / d**2] + [p / d**2] * (len(weyl) - 1)
    return QuantumChannel(tuple(np.sqrt(w) * op for w, op in zip(weights, weyl) if w > 0))


def amplitude_damping_channel(probability):
    _check_probability(probability, "damping probability")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - probability)]], dtype=np.complex128)
    k1 = np.array([[0, np.sqrt(probability)], [0, 0]], dtype=np.complex128)
    return QuantumChannel((k0, k1))


def random_channel(d, rank, seed):
    """Kraus operators cut from the first d columns of a Haar unitary of size rank·d"""
    if rank < 1:
        raise ValidationError(f"Kraus rank must be >= 1, got {rank}")
    isometry = unitary_group.rvs(rank * d, random_state=np.random.default_rng(seed))[:, :d]
    return QuantumChannel(tuple(isometry[i * d:(i + 1) * d, :] for i in range(rank)))


def tomograph_channel(channel, config):
    """Reconstruct the Choi state of ``channel`` with the state protocol at D = d²"""
    d = channel.d
    if d > ProtocolDefaults.MAX_CHANNEL_DIM:
        raise ValidationError(f"channel tomography supports d <= {ProtocolDefaults.MAX_CHANNEL_DIM}, got {d}")
    if config.d != d * d:
        raise ValidationError(f"channel tomography at d={d} needs a protocol config for D={d * d}, got {config.d}")
    rho_bs = apply_channel_to_subsystem(channel, maximally_entangled_state(d))
    _, reconstructed, _ = run_protocol(rho_bs, config)
    choi = ChoiMatrix(d, reconstructed)
    deviation = choi.marginal_deviation()
    if deviation > ProtocolDefaults.TOL_MARGINAL_WARN:
        message = f"Choi marginal deviates from I/d by {deviation:.3e}"
        logger.warning(message)
        choi = replace(choi, warning=message)
    return choi


class ChannelTomographer:
    """Tomography of one channel with an optional reference for the distance report"""

    def __init__(self, config):
        self.config = config

    def analyze_channel(self, channel, reference=None):
        choi = tomograph_channel(channel, self.config)
        results = {
            'd': channel.d,
            'mode': self.config.mode,
            'choi': choi,
            'marginal_deviation': choi.marginal_deviation(),
            'warning': choi.warning,
            'distance': None,
        }
        if reference is not None:
            results['distance'] = choi_distance(choi, exact_choi(reference))
        return results
