"""Singular-value thresholding operators and their Fourier-domain liftings."""

from typing import NamedTuple

import numpy as np

from .tensor import fft_mode, ifft_mode, permute_from_mode3, permute_to_mode3

RANK_RTOL = 1e-10


class SvdTriple(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def thin_svd(M):
    """Thin SVD ``M = U @ diag(S) @ V.conj().T`` with ``S`` non-increasing."""
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("SVD input contains NaN or Inf")
    U, S, Vh = np.linalg.svd(M, full_matrices=False)
    return SvdTriple(U, S, Vh.conj().swapaxes(-1, -2))


def numerical_rank(M):
    """Number of singular values above ``1e-10 * sigma_max``."""
    S = np.linalg.svd(np.asarray(M), compute_uv=False)
    if S.size == 0 or S[0] == 0:
        return 0
    return int(np.sum(S > RANK_RTOL * S[0]))


def _rebuild(U, s, V):
    return (U * s[..., None, :]) @ V.conj().swapaxes(-1, -2)


def svt(M, delta):
    """Singular value thresholding, the prox of ``delta * ||.||_*``.

    Parameters
    ----------
    M : array_like, shape (..., m, n)
        Real or complex matrix, or a stack of matrices.
    delta : float
        Non-negative threshold subtracted from every singular value.

    Returns
    -------
    ndarray
        ``U diag(max(s - delta, 0)) V^H``.
    """
    if delta < 0:
        raise ValueError(f"threshold must be non-negative, got {delta}")
    U, S, V = thin_svd(M)
    return _rebuild(U, np.maximum(S - delta, 0.0), V)


def log_weights(S, eps):
    """Reweighting ``d_j = 1 / (s_j + eps)``; non-decreasing for sorted `S`."""
    return 1.0 / (S + eps)


def log_svt(M, gamma, eps):
    """Weighted singular value thresholding for the ``sum log(s + eps)`` penalty.

    Each singular value ``s_j`` is shrunk by ``gamma / (s_j + eps)``, so large
    singular values are barely touched while small ones are removed.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    U, S, V = thin_svd(M)
    return _rebuild(U, np.maximum(S - gamma * log_weights(S, eps), 0.0), V)


def _fourier_slices(t, mode):
    # frontal slices of the mode-`mode` spectrum, stacked on axis 0
    spec = fft_mode(permute_to_mode3(t, mode), 3)
    return np.moveaxis(spec, 2, 0)


def _from_fourier_slices(slices, mode):
    spec = np.moveaxis(slices, 0, 2)
    return permute_from_mode3(ifft_mode(spec, 3), mode)


def tnn_prox(t, mode, delta):
    """Prox of the transform-domain tensor nuclear norm along `mode`.

    The tensor is transformed by a DFT along `mode`, each resulting frontal
    slice is passed through :func:`svt` with threshold `delta`, and the
    spectrum is inverted.
    """
    if delta < 0:
        raise ValueError(f"threshold must be non-negative, got {delta}")
    return _from_fourier_slices(svt(_fourier_slices(t, mode), delta), mode)


def log_tnn_prox(t, mode, gamma, eps):
    """Fourier-slice version of :func:`log_svt` along `mode`."""
    return _from_fourier_slices(log_svt(_fourier_slices(t, mode), gamma, eps), mode)


def nuclear_norm(M):
    return float(np.sum(np.linalg.svd(np.asarray(M), compute_uv=False)))


def log_norm(M, eps):
    """``sum_i log(s_i + eps)`` over all ``min(m, n)`` singular values."""
    S = np.linalg.svd(np.asarray(M), compute_uv=False)
    return float(np.sum(np.log(S + eps)))


def tensor_nuclear_norm(t, mode):
    """Average nuclear norm of the frontal slices of the mode-`mode` spectrum."""
    S = np.linalg.svd(_fourier_slices(t, mode), compute_uv=False)
    return float(np.sum(S) / S.shape[0])


def tensor_log_norm(t, mode, eps):
    S = np.linalg.svd(_fourier_slices(t, mode), compute_uv=False)
    return float(np.sum(np.log(S + eps)) / S.shape[0])
