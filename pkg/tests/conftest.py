import numpy as np
import pytest

from apsflow.matrixcore import HermitianMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


def random_hermitian_entries(n, rng, scale=1.0):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (g + g.conj().T) / (4.0 * np.sqrt(n)) * scale


def random_projection(n, rank, rng):
    """Orthogonal projection of the given rank from a Haar-ish random frame."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(g)
    v = q[:, :rank]
    from apsflow.matrixcore import Projection

    return Projection(HermitianMatrix(v @ v.conj().T), rank)


def random_unitary(n, rng):
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
