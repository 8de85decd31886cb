"""Multi-modal core tensor factorization: ``Y = sum_n w_n (G_n x_n X_n)``."""

from dataclasses import dataclass

import numpy as np

from .tensor import mode_n_product, permute_from_mode3, permute_to_mode3


@dataclass
class MctfFactors:
    """Per-mode factor matrices and core tensors.

    ``X[n]`` is ``I_{n+1} x r_{n+1}`` and ``G[n]`` has the target shape with
    dimension ``n`` replaced by ``r_{n+1}``.
    """

    X: tuple
    G: tuple
    alpha: tuple = (1 / 3, 1 / 3, 1 / 3)

    @property
    def ranks(self):
        return tuple(x.shape[1] for x in self.X)

    @property
    def shape(self):
        return tuple(x.shape[0] for x in self.X)

    def check(self):
        if len(self.X) != 3 or len(self.G) != 3 or len(self.alpha) != 3:
            raise ValueError("MCTF needs exactly three modes")
        shape = self.shape
        for n, (x, g) in enumerate(zip(self.X, self.G)):
            expected = list(shape)
            expected[n] = x.shape[1]
            if np.ndim(x) != 2 or tuple(g.shape) != tuple(expected):
                raise ValueError(
                    f"mode {n + 1}: core shape {g.shape} does not match factor "
                    f"{x.shape} for target shape {shape}"
                )
        return self


def compose(f):
    """Tensor represented by the factors, ``sum_n alpha_n * (G_n x_n X_n)``."""
    f.check()
    out = np.zeros(f.shape)
    for n in range(3):
        if f.alpha[n] != 0:
            out += f.alpha[n] * mode_n_product(f.G[n], f.X[n], n + 1)
    return out


def compose_permuted(f):
    """Same as :func:`compose`, routed through mode-3 products of permuted cores."""
    f.check()
    out = np.zeros(f.shape)
    for n in range(3):
        if f.alpha[n] != 0:
            term = mode_n_product(permute_to_mode3(f.G[n], n + 1), f.X[n], 3)
            out += f.alpha[n] * permute_from_mode3(term, n + 1)
    return out
