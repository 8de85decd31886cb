import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def brute_mode_product(t, M, mode):
    """Elementwise evaluation of the n-mode product sum."""
    shape = list(t.shape)
    n = mode - 1
    shape[n] = M.shape[0]
    out = np.zeros(shape)
    for idx in np.ndindex(*shape):
        acc = 0.0
        for k in range(t.shape[n]):
            src = list(idx)
            src[n] = k
            acc += t[tuple(src)] * M[idx[n], k]
        out[idx] = acc
    return out


def dft_matrix(p):
    k = np.arange(p)
    return np.exp(-2j * np.pi * np.outer(k, k) / p)
