"""Information isolation of a unitary process with respect to a set of charges.

A process U is informationally isolated from an outside observer holding the
charges {Q_α} when [U, Q_α] = 0 for every α; otherwise the charge flow
Tr[UρU†Q] − Tr[ρQ] leaks information about the process and the state.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from config.settings import ProtocolDefaults
from modules.errors import ValidationError
from modules.measurement import ChargeDeltaRecord
from modules.quantum_core import as_matrix, expectation

logger = logging.getLogger(__name__)

ISOLATED = "isolated"
LEAKY = "leaky"


def _named_charges(charges):
    """Accept a ChargeSet, (label, observable) pairs or bare observables"""
    named = []
    for index, item in enumerate(charges):
        if isinstance(item, tuple) and len(item) == 2:
            label, observable = item
        else:
            label, observable = f"Q{index}", item
        named.append((label, observable))
    return named


def _check_dims(u, observable, label):
    if as_matrix(observable).shape != u.shape:
        raise ValidationError(
            f"charge {label} has shape {as_matrix(observable).shape}, unitary has {u.shape}"
        )


@dataclass
class IsolationReport:
    labels: List[str]
    commutator_norms: List[float]
    verdict: str
    tol: float
    deltas: Optional[List[ChargeDeltaRecord]] = field(default=None)

    def to_dict(self):
        data = {
            "verdict": self.verdict,
            "tol": self.tol,
            "commutator_norms": {
                label: norm for label, norm in zip(self.labels, self.commutator_norms)
            },
        }
        data["deltas"] = (
            None if self.deltas is None else {str(r.label): r.delta for r in self.deltas}
        )
        return data

    @property
    def isolated(self):
        return self.verdict == ISOLATED


def check_isolation(U, charges, tol=ProtocolDefaults.TOL_ISOLATION):
    """Frobenius norm of [U, Q] for every charge and the resulting verdict"""
    u = as_matrix(U)
    labels, norms = [], []
    for label, observable in _named_charges(charges):
        _check_dims(u, observable, label)
        q = as_matrix(observable)
        norms.append(float(np.linalg.norm(u @ q - q @ u, "fro")))
        labels.append(str(label))
    verdict = ISOLATED if all(norm <= tol for norm in norms) else LEAKY
    logger.debug("isolation verdict %s (max commutator %.3e)", verdict, max(norms, default=0.0))
    return IsolationReport(labels=labels, commutator_norms=norms, verdict=verdict, tol=tol)


def leak_profile(U, rho, charges):
    """Charge flow Δq = Tr[UρU†Q] − Tr[ρQ] for every charge"""
    u, state = as_matrix(U), as_matrix(rho)
    if state.shape != u.shape:
        raise ValidationError(f"state shape {state.shape} does not match unitary {u.shape}")
    final = u @ state @ u.conj().T
    records = []
    for label, observable in _named_charges(charges):
        _check_dims(u, observable, label)
        records.append(ChargeDeltaRecord(label, expectation(observable, final) - expectation(observable, state)))
    return records


class IsolationChecker:
    """Isolation verdict plus charge-flow profile for one process"""

    def __init__(self, tol=ProtocolDefaults.TOL_ISOLATION):
        self.tol = tol

    def analyze_process(self, U, charges, rho=None):
        charges = list(_named_charges(charges))
        report = check_isolation(U, charges, self.tol)
        if rho is not None:
            report.deltas = leak_profile(U, rho, charges)
        return report
