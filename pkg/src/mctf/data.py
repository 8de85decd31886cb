"""Observation masks, rank selection and synthetic ground truth."""

from dataclasses import dataclass, field

import numpy as np

from .model import MctfFactors, compose
from .tensor import as_tensor3, mode_n_product


@dataclass(frozen=True)
class ObservationMask:
    """Set of observed entries, stored as sorted flat offsets.

    Offsets follow the first-index-fastest layout, i.e.
    ``np.ravel_multi_index(idx, shape, order="F")``.
    """

    shape: tuple
    indices: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        n = int(np.prod(shape))
        if idx.size and (idx[0] < 0 or idx[-1] >= n or np.any(np.diff(idx) <= 0)):
            raise ValueError("mask offsets must be strictly increasing and in range")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "indices", idx)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def sr(self):
        """Sampling ratio ``|Omega| / (I1 I2 I3)``."""
        return self.indices.size / self.size

    def __len__(self):
        return int(self.indices.size)

    def multi_index(self):
        return np.unravel_index(self.indices, self.shape, order="F")

    def to_bool(self):
        flat = np.zeros(self.size, dtype=bool)
        flat[self.indices] = True
        return flat.reshape(self.shape, order="F")

    def complement(self):
        keep = np.ones(self.size, dtype=bool)
        keep[self.indices] = False
        return ObservationMask(self.shape, np.flatnonzero(keep))

    @classmethod
    def from_bool(cls, b):
        b = np.asarray(b, dtype=bool)
        return cls(b.shape, np.flatnonzero(b.ravel(order="F")))

    @classmethod
    def full(cls, shape):
        return cls(shape, np.arange(int(np.prod(shape))))

    def __eq__(self, other):
        if not isinstance(other, ObservationMask):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.indices, other.indices)

    __hash__ = None


def sample_uniform(shape, sr, seed):
    """Draw ``round(sr * N)`` distinct entries uniformly without replacement.

    Uses a partial Fisher-Yates shuffle of the flat offsets driven by a
    Philox (counter-based, 64-bit) generator, so the result depends only on
    `shape`, `sr` and `seed`.
    """
    if not 0.0 <= sr <= 1.0:
        raise ValueError(f"sampling ratio must lie in [0, 1], got {sr}")
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape))
    k = min(n, int(np.floor(sr * n + 0.5)))
    rng = np.random.Generator(np.random.Philox(seed))
    # j_i uniform on [i, n)
    picks = rng.integers(np.arange(k, dtype=np.int64), n)
    perm = np.arange(n, dtype=np.int64)
    for i, j in enumerate(picks.tolist()):
        perm[i], perm[j] = perm[j], perm[i]
    return ObservationMask(shape, np.sort(perm[:k]))


def _check_shape(t, mask):
    if tuple(t.shape) != mask.shape:
        raise ValueError(f"tensor shape {t.shape} does not match mask shape {mask.shape}")


def apply_mask(t, mask):
    """Zero-fill the unobserved entries of `t` (the projection P_Omega)."""
    t = as_tensor3(t)
    _check_shape(t, mask)
    idx = mask.multi_index()
    out = np.zeros(t.shape, dtype=t.dtype)
    out[idx] = t[idx]
    return out


project = apply_mask


def rank_heuristic(t, fraction=0.005):
    """Per-mode ranks as a fraction of the largest possible rank.

    ``r_n = max(1, round(fraction * min(I_n, prod_{j != n} I_j)))``.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    shape = t if isinstance(t, tuple) else np.shape(t)
    total = int(np.prod(shape))
    ranks = []
    for n in range(3):
        full = min(shape[n], total // shape[n])
        ranks.append(max(1, int(np.floor(fraction * full + 0.5))))
    return tuple(ranks)


def synth_mctf(shape, ranks, seed, noise_sigma=0.0, alpha=(1 / 3, 1 / 3, 1 / 3)):
    """Random low multilinear-rank tensor together with exact MCTF factors.

    A standard-normal core ``C`` of shape `ranks` and standard-normal factor
    matrices ``A_n`` define the Tucker tensor ``C x_1 A_1 x_2 A_2 x_3 A_3``.
    Each mode then carries ``X_n = A_n`` and ``G_n = C x_{j != n} A_j`` so that
    every term ``G_n x_n X_n`` equals the same tensor, which has multilinear
    rank `ranks`. The returned tensor is ``compose(factors)`` plus optional
    i.i.d. Gaussian noise of standard deviation `noise_sigma`.

    Returns
    -------
    Y : ndarray
    factors : MctfFactors
    """
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(shape) != 3 or len(ranks) != 3:
        raise ValueError("shape and ranks need three entries")
    for n in range(3):
        if not 1 <= ranks[n] <= shape[n]:
            raise ValueError(f"rank {ranks[n]} invalid for mode {n + 1} of size {shape[n]}")
    rng = np.random.default_rng(seed)
    core = rng.standard_normal(ranks)
    A = [rng.standard_normal((shape[n], ranks[n])) for n in range(3)]
    G = []
    for n in range(3):
        g = core
        for j in range(3):
            if j != n:
                g = mode_n_product(g, A[j], j + 1)
        G.append(g)
    factors = MctfFactors(tuple(A), tuple(G), tuple(alpha))
    Y = compose(factors)
    if noise_sigma:
        Y = Y + noise_sigma * rng.standard_normal(shape)
    return Y, factors
