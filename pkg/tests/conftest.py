import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_frame(rng, r, d):
    """Orthonormal r-frame in R^d via QR of a Gaussian matrix."""
    q, _ = np.linalg.qr(rng.standard_normal((d, r)))
    return q.T.copy()
