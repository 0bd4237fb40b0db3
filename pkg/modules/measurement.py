"""Ideal measurement layer: U_SA, exact charge deltas, state reconstruction, recovery"""
import logging
from dataclasses import dataclass

import numpy as np

from config.settings import ProtocolDefaults
from modules.charges import ChargeLabel, build_charge_set, canonical_labels, charge_by_label, z_prefactor
from modules.errors import ValidationError
from modules.quantum_core import (
    FIRST,
    SECOND,
    DensityMatrix,
    UnitaryOperator,
    as_matrix,
    expectation,
    partial_trace,
    projector,
    tensor_product,
    trace_distance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChargeDeltaRecord:
    label: ChargeLabel
    delta: float

    def to_dict(self):
        return {"label": str(self.label), "delta": self.delta}

    @classmethod
    def from_dict(cls, data):
        return cls(ChargeLabel.parse(data["label"]), float(data["delta"]))


def system_dim(state):
    """d for a state on S, checking it is a valid system state"""
    rho = state if isinstance(state, DensityMatrix) else DensityMatrix(as_matrix(state))
    if rho.dim < 2:
        raise ValidationError(f"system dimension must be >= 2, got {rho.dim}")
    return rho.dim


def _sa_dim(state):
    n = as_matrix(state).shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValidationError(f"SA state dimension {n} is not a perfect square")
    return d


def build_measurement_unitary(d):
    """U_SA = Σ_m |m⟩⟨m|_S ⊗ V_A^{0→m}, V_A^{0→m}|n⟩ = |(m+n) mod d⟩"""
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
        raise ValidationError(f"measurement unitary needs d >= 2, got {d!r}")
    d = int(d)
    u = np.zeros((d * d, d * d), dtype=np.complex128)
    for m in range(d):
        for n in range(d):
            u[m * d + (m + n) % d, m * d + n] = 1.0
    return UnitaryOperator(u)


def initial_sa_state(rho_S):
    """ρ_S ⊗ |0⟩⟨0|_A"""
    d = system_dim(rho_S)
    return DensityMatrix(tensor_product(rho_S, projector(d, 0)))


def ideal_measure(rho_S):
    """U_SA (ρ_S ⊗ |0⟩⟨0|) U_SA†"""
    d = system_dim(rho_S)
    return build_measurement_unitary(d).conjugate(initial_sa_state(rho_S))


def recover(sigma_SA):
    """Undo the measurement: U_SA† σ U_SA"""
    d = _sa_dim(sigma_SA)
    return build_measurement_unitary(d).adjoint().conjugate(sigma_SA)


def observable_label(label):
    return label if isinstance(label, ChargeLabel) else ChargeLabel.parse(label)


def _check_delta_bound(label, delta, observable):
    bound = 2.0 * observable.spectral_radius()
    if abs(delta) > bound + ProtocolDefaults.TOL_HERM:
        raise ValidationError(f"delta {delta} for {label} exceeds spectral bound {bound}")


def charge_delta(rho_S, label, charge_set=None):
    """Δq = Tr[ρ_f Q] − Tr[ρ_i Q] by direct trace"""
    d = system_dim(rho_S)
    label = observable_label(label)
    observable = charge_by_label(charge_set or build_charge_set(d), label)
    rho_i = initial_sa_state(rho_S)
    rho_f = ideal_measure(rho_S)
    delta = expectation(observable, rho_f) - expectation(observable, rho_i)
    _check_delta_bound(label, delta, observable)
    return ChargeDeltaRecord(label, delta)


def charge_delta_closed_form(rho_S, label):
    """Δq from the closed-form expressions in the density-matrix elements p_mn"""
    d = system_dim(rho_S)
    label = observable_label(label).validate(d)
    p = as_matrix(rho_S)
    m, n = label.m, label.n
    if label.alpha == "z":
        lower = sum(p[k, k].real for k in range(1, m))
        delta = z_prefactor(m) * (lower - m * p[m, m].real)
    elif label.alpha == "x":
        delta = (p[m, n] + p[n, m]).real
    else:
        delta = (1j * p[m, n] - 1j * p[n, m]).real
    return ChargeDeltaRecord(label, float(delta))


def all_charge_deltas(rho_S):
    """Exact deltas for every charge, canonical order"""
    d = system_dim(rho_S)
    charge_set = build_charge_set(d)
    return [charge_delta(rho_S, label, charge_set) for label in charge_set.labels]


def qubit_state(r11, r01):
    """Qubit state from its independent elements r₁₁ (real) and r₀₁ (complex)"""
    return DensityMatrix(np.array([[1 - r11, r01], [np.conj(r01), r11]], dtype=np.complex128))


def _project_to_state(matrix, tol):
    """Clip marginally negative eigenvalues and renormalize"""
    matrix = (matrix + matrix.conj().T) / 2
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    lowest = float(eigenvalues[0])
    if lowest < -tol:
        raise ValidationError(
            f"reconstructed matrix is not positive semidefinite (eigenvalue {lowest:.3e})"
        )
    if lowest < 0:
        if lowest < -ProtocolDefaults.TOL_PSD:
            logger.warning("clipping reconstruction eigenvalue %.3e to zero", lowest)
        eigenvalues = np.clip(eigenvalues, 0.0, None)
        matrix = (eigenvectors * eigenvalues) @ eigenvectors.conj().T
        matrix = (matrix + matrix.conj().T) / 2
    return DensityMatrix(matrix / np.trace(matrix).real)


def reconstruct_state(deltas, tol=ProtocolDefaults.TOL_RECONSTRUCT):
    """Invert a full set of d²−1 charge deltas into ρ_S"""
    records = {}
    for record in deltas:
        label = observable_label(record.label)
        if label in records:
            raise ValidationError(f"duplicate delta for {label}")
        records[label] = float(record.delta)
    d = int(round(np.sqrt(len(records) + 1)))
    if d < 2 or d * d - 1 != len(records):
        raise ValidationError(f"{len(records)} deltas is not d²−1 for any d >= 2")
    missing = [str(label) for label in canonical_labels(d) if label not in records]
    if missing:
        raise ValidationError(f"missing charge deltas: {missing}")

    p = np.zeros((d, d), dtype=np.complex128)
    for m in range(1, d):
        lower = sum(p[k, k].real for k in range(1, m))
        delta = records[ChargeLabel("z", m, m)]
        p[m, m] = (lower - delta / z_prefactor(m)) / m
    p[0, 0] = 1.0 - sum(p[k, k].real for k in range(1, d))
    for m in range(d):
        for n in range(m + 1, d):
            dx = records[ChargeLabel("x", m, n)]
            dy = records[ChargeLabel("y", m, n)]
            p[m, n] = (dx - 1j * dy) / 2
            p[n, m] = np.conj(p[m, n])
    return _project_to_state(p, tol)


def system_marginal(sigma_SA):
    """Reduced state of S from an SA matrix"""
    d = _sa_dim(sigma_SA)
    return partial_trace(sigma_SA, (d, d), keep=FIRST)


def apparatus_marginal(sigma_SA):
    d = _sa_dim(sigma_SA)
    return partial_trace(sigma_SA, (d, d), keep=SECOND)


class MeasurementAnalyzer:
    """Ideal-layer report for one system state: deltas, closed-form agreement, reconstruction, recovery"""

    def __init__(self, tol=ProtocolDefaults.TOL_RECONSTRUCT):
        self.tol = tol

    def analyze_state(self, rho_S):
        d = system_dim(rho_S)
        charge_set = build_charge_set(d)
        deltas = [charge_delta(rho_S, label, charge_set) for label in charge_set.labels]
        closed_form_gap = max(
            abs(record.delta - charge_delta_closed_form(rho_S, record.label).delta) for record in deltas
        )
        reconstructed = reconstruct_state(deltas, self.tol)
        recovered = recover(ideal_measure(rho_S))
        results = {
            'd': d,
            'deltas': [record.to_dict() for record in deltas],
            'closed_form_gap': float(closed_form_gap),
            'reconstruction_error': trace_distance(reconstructed, rho_S),
            'recovery_error': trace_distance(recovered, initial_sa_state(rho_S)),
        }
        logger.debug("ideal analysis d=%d reconstruction error %.3e", d, results['reconstruction_error'])
        return results
