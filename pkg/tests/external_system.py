"""Importable system used to exercise the ``module:function`` config hook."""
import numpy as np

from contracta.flow import DynamicalSystem


def damped_pair(rate=1.0):
    A = np.array([[-rate, 1.0], [-1.0, -rate]])
    return DynamicalSystem(2, lambda x: np.asarray(x) @ A.T, lambda x: A.copy(), name="damped pair")
