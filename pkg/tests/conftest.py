import numpy as np
import pytest

from qdrepeater.hilbert import StateVector


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def random_state(rng, dims, labels) -> StateVector:
    n = int(np.prod(dims))
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    return StateVector(amps / np.linalg.norm(amps), dims, labels)


def random_unitary(rng, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
