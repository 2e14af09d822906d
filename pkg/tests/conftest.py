import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mclq.game import JointTrajectory
from mclq.lq import LqApproximation


def lq_from_matrices(A, B, D, Q, Ru, Rw, q=None):
    """Wrap raw per-timestep matrices into an LqApproximation (zero nominal)."""
    T = len(A)
    d = A[0].shape[0]
    nominal = JointTrajectory(
        x0=np.zeros(d),
        u=np.zeros((T, B[0].shape[1])),
        w=np.zeros((T, D[0].shape[1])),
    )
    return LqApproximation(
        A=list(A), B=list(B), D=list(D), Q=list(Q), Ru=list(Ru), Rw=list(Rw),
        q=q if q is not None else [np.zeros(d) for _ in range(T + 1)],
        nominal=nominal,
        nominal_states=np.zeros((T + 1, d)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
