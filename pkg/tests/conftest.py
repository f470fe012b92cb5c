import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from contracta.flow import DynamicalSystem  # noqa: E402

DIAG = np.diag([-1.0, -2.0, -3.0])


def linear_system(A, name="linear"):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return DynamicalSystem(
        n,
        lambda x: np.asarray(x) @ A.T,
        lambda x: np.broadcast_to(A, np.shape(x)[:-1] + (n, n)).copy(),
        name=name,
        vectorized=True,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def diag_sys():
    return linear_system(DIAG, "diag(-1,-2,-3)")


@pytest.fixture
def zero_sys():
    return linear_system(np.zeros((3, 3)), "zero field")


@pytest.fixture
def oscillator():
    return linear_system([[0.0, 1.0], [-1.0, 0.0]], "harmonic oscillator")


TWO_PI = 2 * math.pi
