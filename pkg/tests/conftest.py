import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.measurement import qubit_state  # noqa: E402
from modules.quantum_core import DensityMatrix, random_density_matrix  # noqa: E402


@pytest.fixture
def qubit_example():
    """r₁₁ = 0.4, r₀₁ = 0.1 + 0.05i"""
    return qubit_state(0.4, 0.1 + 0.05j)


@pytest.fixture
def plus_state():
    return DensityMatrix.from_pure(np.array([1.0, 1.0]))


@pytest.fixture
def mixed_qutrit():
    """Random qutrit state mixed with I/3, so its spectrum stays well inside (0, 1)"""
    rho = random_density_matrix(3, seed=7).matrix
    return DensityMatrix(0.5 * rho + 0.5 * np.eye(3) / 3)
