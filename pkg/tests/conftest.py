import numpy as np
import pytest

from tentacle.symplectic import QuadraticHamiltonian


@pytest.fixture
def h_ex() -> QuadraticHamiltonian:
    """½(p1² + p2² + q1² - q2² - 1)"""
    return QuadraticHamiltonian(np.diag([1.0, -1.0, 1.0, 1.0]), 0.5)
