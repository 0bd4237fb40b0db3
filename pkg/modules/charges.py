"""Non-local charge observables on the system-apparatus space.

For a d-dimensional system S and apparatus A the d²−1 charges live on the
d²-dimensional SA space and act only on the diagonal subspace span{|mm⟩}:

* x-type, 0 ≤ m < n ≤ d−1:  |mm⟩⟨nn| + |nn⟩⟨mm|
* y-type, 0 ≤ m < n ≤ d−1:  −i|mm⟩⟨nn| + i|nn⟩⟨mm|
* z-type, 1 ≤ m ≤ d−1:      √(2/(m(m+1))) (Σ_{k<m} |kk⟩⟨kk| − m|mm⟩⟨mm|)

The matrices have Hilbert–Schmidt norm √2 (Tr[Q_a Q_b] = 2δ_ab).
Canonical order: z ascending in m, then x, then y in lexicographic (m, n).
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from modules.errors import ValidationError
from modules.quantum_core import HermitianObservable

ALPHAS = ("x", "y", "z")


@dataclass(frozen=True, order=False)
class ChargeLabel:
    alpha: str
    m: int
    n: int

    def __str__(self):
        return f"{self.alpha}:{self.m}:{self.n}"

    @classmethod
    def parse(cls, text):
        """Parse the "z:1:1" string form"""
        parts = str(text).strip().split(":")
        if len(parts) != 3 or parts[0] not in ALPHAS:
            raise ValidationError(f"malformed charge label {text!r}, expected e.g. 'x:0:1'")
        try:
            m, n = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ValidationError(f"malformed charge label {text!r}") from exc
        return cls(parts[0], m, n)

    def is_valid_for(self, d):
        if self.alpha == "z":
            return 1 <= self.m == self.n <= d - 1
        if self.alpha in ("x", "y"):
            return 0 <= self.m < self.n <= d - 1
        return False

    def validate(self, d):
        if not self.is_valid_for(d):
            raise ValidationError(f"charge label {self} is not valid for d={d}")
        return self


def canonical_labels(d):
    """All d²−1 labels in canonical order"""
    labels = [ChargeLabel("z", m, m) for m in range(1, d)]
    pairs = [(m, n) for m in range(d) for n in range(m + 1, d)]
    labels += [ChargeLabel("x", m, n) for m, n in pairs]
    labels += [ChargeLabel("y", m, n) for m, n in pairs]
    return labels


def z_prefactor(m):
    return np.sqrt(2.0 / (m * (m + 1)))


def charge_matrix(d, label):
    """The d²×d² matrix of one charge"""
    label.validate(d)
    q = np.zeros((d * d, d * d), dtype=np.complex128)

    def diag(k):
        return k * d + k

    if label.alpha == "x":
        q[diag(label.m), diag(label.n)] = 1.0
        q[diag(label.n), diag(label.m)] = 1.0
    elif label.alpha == "y":
        q[diag(label.m), diag(label.n)] = -1j
        q[diag(label.n), diag(label.m)] = 1j
    else:
        c = z_prefactor(label.m)
        for k in range(label.m):
            q[diag(k), diag(k)] = c
        q[diag(label.m), diag(label.m)] = -label.m * c
    return q


@dataclass(frozen=True)
class ChargeSet:
    d: int
    charges: Tuple[Tuple[ChargeLabel, HermitianObservable], ...]

    def __len__(self):
        return len(self.charges)

    def __iter__(self):
        return iter(self.charges)

    @property
    def labels(self):
        return [label for label, _ in self.charges]

    @property
    def observables(self):
        return [obs for _, obs in self.charges]


def build_charge_set(d):
    """Build the d²−1 charges in canonical order"""
    if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 2:
        raise ValidationError(f"charge sets need d >= 2, got {d!r}")
    d = int(d)
    return ChargeSet(
        d=d,
        charges=tuple(
            (label, HermitianObservable(charge_matrix(d, label))) for label in canonical_labels(d)
        ),
    )


def charge_by_label(charge_set, label):
    """Look up one observable; accepts a ChargeLabel or its string form"""
    if not isinstance(label, ChargeLabel):
        label = ChargeLabel.parse(label)
    label.validate(charge_set.d)
    for candidate, observable in charge_set.charges:
        if candidate == label:
            return observable
    raise ValidationError(f"charge {label} not present in the d={charge_set.d} set")
