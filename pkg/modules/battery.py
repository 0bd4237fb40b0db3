"""Battery-mediated, strictly conserving implementation of the measurement unitary.

A battery W with charge operator γx̂ is attached to SA for one charge H at a
time. The global unitary commutes with H + γx̂ and with battery translations,
and in the momentum representation it reads ∫dp V(p) ⊗ |p⟩⟨p| with

    V(p) = e^{-ipH/γ} U e^{ipH/γ}.

Tracing out the battery gives the mixture of unitaries
σ = ∫dp μ(p) V(p) ρ V(p)†, with μ the battery momentum distribution.

Position convention: ⟨x|p⟩ = e^{-ipx}/√(2π). Under it a branch whose SA energy
changes by ΔE displaces the battery by −ΔE/γ, so ΔE_SA + γΔ⟨x̂⟩ = 0.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
import pandas as pd

from config.settings import ProtocolDefaults
from modules.charges import ChargeLabel, build_charge_set, charge_by_label
from modules.errors import ContainmentError, ValidationError
from modules.measurement import (
    ChargeDeltaRecord,
    build_measurement_unitary,
    ideal_measure,
    initial_sa_state,
    reconstruct_state,
    recover,
    system_dim,
    system_marginal,
)
from modules.quantum_core import (
    DensityMatrix,
    UnitaryOperator,
    as_matrix,
    eigendecompose,
    expectation,
    matrix_exponential_hermitian,
    spectral_projectors,
    trace_distance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform grid p_k = −p_max + k·Δp, k = 0..L−1, Δp = 2·p_max/L"""

    p_max: float
    L: int

    def __post_init__(self):
        if not self.p_max > 0:
            raise ValidationError(f"p_max must be positive, got {self.p_max!r}")
        if self.L < 2 or self.L & (self.L - 1):
            raise ValidationError(f"grid size must be a power of two >= 2, got {self.L!r}")

    @classmethod
    def for_width(cls, s, L=ProtocolDefaults.GRID_L):
        """Default grid for a battery of momentum width s"""
        return cls(p_max=ProtocolDefaults.default_p_max(s), L=L)

    @property
    def dp(self):
        return 2.0 * self.p_max / self.L

    @property
    def points(self):
        return -self.p_max + self.dp * np.arange(self.L)

    @property
    def dx(self):
        return np.pi / self.p_max

    @property
    def positions(self):
        return (np.arange(self.L) - self.L // 2) * self.dx


@dataclass(frozen=True, eq=False)
class BatteryWavefunction:
    grid: MomentumGrid
    amplitudes: np.ndarray
    gamma: float
    s: float

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128, copy=True)
        if amplitudes.shape != (self.grid.L,):
            raise ValidationError(f"expected {self.grid.L} amplitudes, got shape {amplitudes.shape}")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma!r}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        norm = self.weight()
        if abs(norm - 1.0) > ProtocolDefaults.TOL_HERM:
            raise ContainmentError(f"battery wavefunction norm is {norm!r}, expected 1")
        edge = (abs(amplitudes[0]) ** 2 + abs(amplitudes[-1]) ** 2) * self.grid.dp
        if edge >= ProtocolDefaults.TOL_BOUNDARY:
            raise ContainmentError(f"battery boundary mass {edge:.3e} is not contained in the grid")

    def momentum_distribution(self):
        """μ(p_k) = |ψ(p_k)|²"""
        return np.abs(self.amplitudes) ** 2

    def weight(self):
        return float(np.sum(self.momentum_distribution()) * self.grid.dp)

    def momentum_moments(self):
        mu = self.momentum_distribution() * self.grid.dp
        p = self.grid.points
        mean = float(np.sum(mu * p))
        return mean, float(np.sum(mu * (p - mean) ** 2))

    def shifted(self, a):
        """Battery translated by a in position: ψ(p) → e^{-iap} ψ(p)"""
        return replace(self, amplitudes=np.exp(-1j * a * self.grid.points) * self.amplitudes)

    def characteristic(self, omegas):
        """χ(ω) = Σ_k μ(p_k) e^{-ip_k ω} Δp for each ω"""
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        phases = np.exp(-1j * np.outer(omegas, self.grid.points))
        return phases @ (self.momentum_distribution() * self.grid.dp)


def gaussian_battery(grid, s, gamma=ProtocolDefaults.GAMMA):
    """ψ(p) ∝ exp(−p²/(4s²)), normalized on the grid"""
    if not s > 0:
        raise ValidationError(f"battery width s must be positive, got {s!r}")
    if not s < grid.p_max / ProtocolDefaults.CONTAINMENT_RATIO:
        raise ContainmentError(
            f"battery width s={s} not contained: need s < p_max/{ProtocolDefaults.CONTAINMENT_RATIO:g}"
            f" = {grid.p_max / ProtocolDefaults.CONTAINMENT_RATIO}"
        )
    psi = np.exp(-grid.points ** 2 / (4.0 * s ** 2)).astype(np.complex128)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dp)
    return BatteryWavefunction(grid=grid, amplitudes=psi, gamma=float(gamma), s=float(s))


def _check_pair(U, H):
    u, h = as_matrix(U), as_matrix(H)
    if u.shape != h.shape:
        raise ValidationError(f"dimension mismatch: unitary {u.shape} vs observable {h.shape}")
    return u, h


def conjugated_unitary(U, H, gamma, p):
    """V(p) = e^{-ipH/γ} U e^{ipH/γ}"""
    u, h = _check_pair(U, H)
    if p == 0:
        return UnitaryOperator(u)
    left = matrix_exponential_hermitian(h, p / gamma)
    return UnitaryOperator(left @ u @ left.conj().T)


def _transition_blocks(U, H):
    """Energies and the blocks P_e U P_f of U between eigenspaces of H"""
    u, h = _check_pair(U, H)
    groups = spectral_projectors(h)
    energies = np.array([energy for energy, _ in groups])
    blocks = [[pe @ u @ pf for _, pf in groups] for _, pe in groups]
    return energies, blocks


def reduced_channel(rho_SA, U, H, battery):
    """σ = Σ_k μ(p_k) V(p_k) ρ V(p_k)† Δp, evaluated through the eigenspaces of H"""
    rho = as_matrix(rho_SA)
    u, _ = _check_pair(U, H)
    if rho.shape != u.shape:
        raise ValidationError(f"dimension mismatch: state {rho.shape} vs unitary {u.shape}")
    weight = battery.weight()
    if abs(weight - 1.0) > ProtocolDefaults.TOL_WEIGHT:
        raise ContainmentError(f"battery quadrature weight deficit {1.0 - weight:.3e}")

    groups = spectral_projectors(H)
    energies = np.array([energy for energy, _ in groups])
    projectors = [proj for _, proj in groups]
    k = len(groups)
    # R[f][f'] = U P_f ρ P_f' U†
    rotated = [[u @ projectors[f] @ rho @ projectors[g] @ u.conj().T for g in range(k)] for f in range(k)]
    gaps = (energies[:, None] - energies[None, :]) / battery.gamma
    sigma = np.zeros_like(rho)
    for e in range(k):
        for e2 in range(k):
            omegas = (gaps[e][:, None] - gaps[e2][None, :]).ravel()
            chi = battery.characteristic(omegas).reshape(k, k)
            inner = sum(chi[f, g] * rotated[f][g] for f in range(k) for g in range(k))
            sigma += projectors[e] @ inner @ projectors[e2]

    trace = np.trace(sigma).real
    if abs(trace - 1.0) > ProtocolDefaults.TOL_WEIGHT:
        raise ContainmentError(f"reduced channel trace {trace!r} deviates from 1")
    sigma = (sigma + sigma.conj().T) / 2
    return DensityMatrix(sigma / trace)


def channel_epsilon(sigma_SA, rho_S):
    """Trace distance of the realized SA state to the ideal measurement output"""
    return trace_distance(sigma_SA, ideal_measure(rho_S))


def work_cost(rho_SA_initial, sigma_SA, H):
    """Battery-side work −(Tr[σH] − Tr[ρH])"""
    return -(expectation(H, sigma_SA) - expectation(H, rho_SA_initial))


@dataclass(frozen=True, eq=False)
class PositionDistribution:
    positions: np.ndarray
    probabilities: np.ndarray

    def mean(self):
        return float(np.sum(self.positions * self.probabilities))

    def total(self):
        return float(np.sum(self.probabilities))


def _position_distribution(grid, amplitudes, edge_fraction=16):
    """Pr(x_j) = ‖Φ(x_j)‖² Δx for momentum amplitudes of shape (L, n)"""
    signs = (-1.0) ** np.arange(grid.L)
    transformed = np.fft.fft(signs[:, None] * amplitudes, axis=0) * grid.dp / np.sqrt(2.0 * np.pi)
    probabilities = np.sum(np.abs(transformed) ** 2, axis=1) * grid.dx
    total = float(np.sum(probabilities))
    if abs(total - 1.0) > ProtocolDefaults.TOL_DISTRIBUTION:
        raise ContainmentError(f"position distribution sums to {total!r}")
    band = max(grid.L // edge_fraction, 1)
    edge = float(np.sum(probabilities[:band]) + np.sum(probabilities[-band:]))
    if edge > ProtocolDefaults.TOL_DISTRIBUTION:
        raise ContainmentError(f"battery position mass {edge:.3e} reaches the grid edge")
    return PositionDistribution(grid.positions, probabilities)


def initial_position_distribution(battery):
    return _position_distribution(battery.grid, battery.amplitudes[:, None])


def _pure_vector(phi_SA):
    if isinstance(phi_SA, DensityMatrix):
        eigenvalues, eigenvectors = eigendecompose(phi_SA)
        if eigenvalues[-1] < 1.0 - ProtocolDefaults.TOL_TRACE:
            raise ValidationError("position distribution needs a pure SA state")
        return eigenvectors[:, -1]
    vector = np.asarray(phi_SA, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(vector)
    if abs(norm - 1.0) > ProtocolDefaults.TOL_TRACE:
        raise ValidationError(f"SA state vector has norm {norm!r}")
    return vector


def battery_position_distribution(phi_SA, battery, U, H):
    """Final battery position distribution for a pure SA input"""
    vector = _pure_vector(phi_SA)
    energies, blocks = _transition_blocks(U, H)
    if vector.shape[0] != as_matrix(U).shape[0]:
        raise ValidationError(f"SA vector of length {vector.shape[0]} does not match U")
    p = battery.grid.points
    amplitudes = np.zeros((battery.grid.L, vector.shape[0]), dtype=np.complex128)
    for e, row in enumerate(blocks):
        for f, block in enumerate(row):
            branch = block @ vector
            if not np.any(branch):
                continue
            phase = np.exp(-1j * p * (energies[e] - energies[f]) / battery.gamma)
            amplitudes += phase[:, None] * branch[None, :]
    amplitudes *= battery.amplitudes[:, None]
    return _position_distribution(battery.grid, amplitudes)


def mixed_position_distribution(rho_SA, battery, U, H, cutoff=1e-14):
    """Eigenvalue-weighted mixture of pure-branch position distributions"""
    eigenvalues, eigenvectors = eigendecompose(rho_SA)
    probabilities = np.zeros(battery.grid.L)
    for weight, vector in zip(eigenvalues, eigenvectors.T):
        if weight > cutoff:
            probabilities += weight * battery_position_distribution(vector, battery, U, H).probabilities
    probabilities /= np.sum(probabilities)
    return PositionDistribution(battery.grid.positions, probabilities)


def sample_work_estimate(distribution, N, seed, gamma, initial_mean):
    """γ·(sample mean − initial mean) and its standard error over N i.i.d. positions"""
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    weights = np.clip(distribution.probabilities, 0.0, None)
    samples = rng.choice(distribution.positions, size=int(N), p=weights / weights.sum())
    estimate = gamma * (float(np.mean(samples)) - initial_mean)
    stderr = gamma * float(np.std(samples, ddof=1)) / np.sqrt(N) if N > 1 else 0.0
    return estimate, stderr


@dataclass(frozen=True)
class ProtocolConfig:
    d: int
    gamma: float = ProtocolDefaults.GAMMA
    s: float = ProtocolDefaults.S
    seed: int = ProtocolDefaults.SEED
    mode: str = ProtocolDefaults.DEFAULT_MODE
    workers: int = ProtocolDefaults.WORKERS
    p_max: Optional[float] = None
    grid_l: int = ProtocolDefaults.GRID_L

    def __post_init__(self):
        if self.d < 2:
            raise ValidationError(f"d must be >= 2, got {self.d}")
        if not self.s > 0:
            raise ValidationError(f"s must be positive, got {self.s!r}")
        if self.mode not in ProtocolDefaults.MODES:
            raise ValidationError(f"mode must be one of {ProtocolDefaults.MODES}, got {self.mode!r}")
        if self.p_max is not None and not self.p_max > 0:
            raise ValidationError(f"p_max must be positive, got {self.p_max!r}")
        self.grid  # rejects a bad grid size

    @property
    def grid(self):
        """Explicit p_max if one was given, else the default cutoff for this width"""
        if self.p_max is None:
            return MomentumGrid.for_width(self.s, self.grid_l)
        return MomentumGrid(p_max=self.p_max, L=self.grid_l)

    def with_width(self, s):
        """Same run at another battery width; an explicit p_max is kept"""
        return replace(self, s=s)


@dataclass
class WorkEntry:
    label: ChargeLabel
    work: float
    epsilon: float
    n_samples: Optional[int] = None
    stderr: Optional[float] = None
    disturbance: Optional[float] = None

    def to_dict(self):
        return {
            "label": str(self.label),
            "work": self.work,
            "epsilon": self.epsilon,
            "n_samples": self.n_samples,
            "stderr": self.stderr,
        }


@dataclass
class WorkLedger:
    d: int
    mode: str
    s: float
    gamma: float
    entries: List[WorkEntry] = field(default_factory=list)

    def to_dict(self):
        return {
            "d": self.d,
            "mode": self.mode,
            "s": self.s,
            "gamma": self.gamma,
            "entries": [entry.to_dict() for entry in self.entries],
        }

    @classmethod
    def from_dict(cls, data):
        entries = [
            WorkEntry(
                label=ChargeLabel.parse(item["label"]),
                work=float(item["work"]),
                epsilon=float(item["epsilon"]),
                n_samples=item.get("n_samples"),
                stderr=item.get("stderr"),
            )
            for item in data["entries"]
        ]
        return cls(int(data["d"]), data["mode"], float(data["s"]), float(data["gamma"]), entries)

    def work_by_label(self):
        return {str(entry.label): entry.work for entry in self.entries}

    def max_epsilon(self):
        return max((entry.epsilon for entry in self.entries), default=0.0)

    def charge_deltas(self):
        """Charge deltas on SA implied by the recorded work (Δq = −work)"""
        return [ChargeDeltaRecord(entry.label, -entry.work) for entry in self.entries]


@dataclass
class RoundResult:
    entry: WorkEntry
    sigma: DensityMatrix
    recovered: DensityMatrix


class BatteryProtocol:
    """Runs the per-charge measurement rounds for one configuration"""

    def __init__(self, config):
        self.config = config
        self.unitary = build_measurement_unitary(config.d)
        self.charges = build_charge_set(config.d)
        self.battery = None
        if config.mode == "battery":
            self.battery = gaussian_battery(config.grid, config.s, config.gamma)

    def run_round(self, rho_S, label, observable):
        logger.debug("round %s (mode=%s, s=%g)", label, self.config.mode, self.config.s)
        rho_i = initial_sa_state(rho_S)
        if self.battery is None:
            sigma = ideal_measure(rho_S)
        else:
            sigma = reduced_channel(rho_i, self.unitary, observable, self.battery)
        recovered = recover(sigma)
        entry = WorkEntry(
            label=label,
            work=work_cost(rho_i, sigma, observable),
            epsilon=channel_epsilon(sigma, rho_S),
            disturbance=trace_distance(system_marginal(recovered), rho_S),
        )
        return RoundResult(entry, sigma, recovered)

    def run(self, rho_S):
        d = system_dim(rho_S)
        if d != self.config.d:
            raise ValidationError(f"state dimension {d} does not match config d={self.config.d}")
        rounds = list(self.charges)
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
                results = list(executor.map(lambda item: self.run_round(rho_S, *item), rounds))
        else:
            results = [self.run_round(rho_S, label, observable) for label, observable in rounds]
        ledger = WorkLedger(
            d=d,
            mode=self.config.mode,
            s=self.config.s,
            gamma=self.config.gamma,
            entries=[result.entry for result in results],
        )
        reconstructed = reconstruct_state(ledger.charge_deltas())
        logger.info(
            "protocol d=%d mode=%s: max epsilon %.3e, reconstruction error %.3e",
            d, self.config.mode, ledger.max_epsilon(), trace_distance(reconstructed, rho_S),
        )
        return ledger, reconstructed, results[-1].recovered, results

    def sample_round(self, rho_S, label, n_samples, seed=None):
        """Sampled battery readout for one charge, with the exact work it estimates"""
        battery = self.battery or gaussian_battery(self.config.grid, self.config.s, self.config.gamma)
        label = label if isinstance(label, ChargeLabel) else ChargeLabel.parse(label)
        observable = charge_by_label(self.charges, label)
        rho_i = initial_sa_state(rho_S)
        sigma = reduced_channel(rho_i, self.unitary, observable, battery)
        exact = work_cost(rho_i, sigma, observable)
        distribution = mixed_position_distribution(rho_i, battery, self.unitary, observable)
        initial_mean = initial_position_distribution(battery).mean()
        estimate, stderr = sample_work_estimate(
            distribution, n_samples, self.config.seed if seed is None else seed, battery.gamma, initial_mean
        )
        logger.info("sampled %s: %.6f +/- %.2e (exact %.6f, N=%d)", label, estimate, stderr, exact, n_samples)
        entry = WorkEntry(
            label=label,
            work=estimate,
            epsilon=channel_epsilon(sigma, rho_S),
            n_samples=int(n_samples),
            stderr=stderr,
        )
        return entry, exact


def run_protocol(rho_S, config):
    """All charge rounds in canonical order → (ledger, reconstructed ρ_S, last recovered SA state)"""
    ledger, reconstructed, recovered, _ = BatteryProtocol(config).run(rho_S)
    return ledger, reconstructed, recovered


SWEEP_COLUMNS = ["s", "max_epsilon", "reconstruction_error"]


def epsilon_sweep(rho_S, s_values, config, include_ideal=False):
    """Table of (s, max ε over charges, reconstruction error), one row per width"""
    s_values = [float(s) for s in s_values]
    if any(not s > 0 for s in s_values):
        raise ValidationError(f"sweep widths must be positive, got {s_values}")

    def point(s):
        ledger, reconstructed, _ = run_protocol(rho_S, replace(config.with_width(s), mode="battery", workers=1))
        return s, ledger.max_epsilon(), trace_distance(reconstructed, rho_S)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            rows = list(executor.map(point, s_values))
    else:
        rows = [point(s) for s in s_values]
    if include_ideal:
        ledger, reconstructed, _ = run_protocol(rho_S, replace(config, mode="ideal"))
        rows.append((0.0, ledger.max_epsilon(), trace_distance(reconstructed, rho_S)))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)

