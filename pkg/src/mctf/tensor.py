"""Dense third-order tensor primitives.

Tensors are plain ``numpy.ndarray`` objects of shape ``(I1, I2, I3)``.
The logical layout is first-index-fastest (Fortran order); unfoldings and
the on-disk format in :mod:`mctf.io` both follow it, so a mode-1 unfolding
of a Fortran-ordered array is a zero-copy reshape.

Modes are numbered 1, 2, 3 throughout the public API.
"""

import numpy as np


class NumericalConsistencyError(ArithmeticError):
    """Raised when an inverse FFT leaves a non-negligible imaginary part."""


# axes order for permute_to_mode3; index k-1
_TO_MODE3 = {1: (1, 2, 0), 2: (2, 0, 1), 3: (0, 1, 2)}
_FROM_MODE3 = {k: tuple(np.argsort(p)) for k, p in _TO_MODE3.items()}

IMAG_TOL = 1e-6


def check_mode(mode):
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode


def as_tensor3(t, name="tensor"):
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"{name} must be 3-way, got shape {t.shape}")
    return t


def unfold(t, mode):
    """Mode-`mode` unfolding.

    Rows index mode `mode`; columns enumerate the remaining two indices in
    ascending mode order with the lower-numbered index varying fastest.

    Parameters
    ----------
    t : ndarray, shape (I1, I2, I3)
    mode : {1, 2, 3}

    Returns
    -------
    ndarray, shape (I_mode, prod of the other dims)
    """
    t = as_tensor3(t)
    n = check_mode(mode) - 1
    return np.reshape(np.moveaxis(t, n, 0), (t.shape[n], -1), order="F")


def fold(m, mode, shape):
    """Inverse of :func:`unfold`."""
    n = check_mode(mode) - 1
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3:
        raise ValueError(f"shape must have 3 entries, got {shape}")
    m = np.asarray(m)
    cols = int(np.prod(shape)) // shape[n] if shape[n] else 0
    if m.ndim != 2 or m.shape != (shape[n], cols):
        raise ValueError(
            f"matrix of shape {m.shape} cannot be folded into {shape} along mode {mode}"
        )
    rest = [s for i, s in enumerate(shape) if i != n]
    return np.moveaxis(np.reshape(m, [shape[n]] + rest, order="F"), 0, n)


def mode_n_product(t, M, mode):
    """n-mode product ``t x_mode M``.

    The result replaces dimension ``I_mode`` by ``M.shape[0]`` and satisfies
    ``unfold(result, mode) == M @ unfold(t, mode)``.
    """
    t = as_tensor3(t)
    n = check_mode(mode) - 1
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[1] != t.shape[n]:
        raise ValueError(
            f"matrix of shape {M.shape} incompatible with mode-{mode} size {t.shape[n]}"
        )
    out = np.tensordot(M, t, axes=(1, n))
    return np.moveaxis(out, 0, n)


def permute_to_mode3(t, k):
    """Cyclic permutation that makes mode `k` the third mode.

    Entry ``t[i, j, s]`` lands at ``[j, s, i]`` for ``k=1``, at ``[s, i, j]``
    for ``k=2``, and stays put for ``k=3``.
    """
    t = as_tensor3(t)
    return np.transpose(t, _TO_MODE3[check_mode(k)])


def permute_from_mode3(t, k):
    """Inverse of :func:`permute_to_mode3`."""
    t = as_tensor3(t)
    return np.transpose(t, _FROM_MODE3[check_mode(k)])


def fft_mode(t, mode):
    """Unnormalized DFT of every mode-`mode` fiber."""
    t = as_tensor3(t)
    return np.fft.fft(t, axis=check_mode(mode) - 1)


def ifft_mode(ct, mode, tol=IMAG_TOL):
    """Inverse of :func:`fft_mode` (1/n normalized), returning the real part.

    Raises
    ------
    NumericalConsistencyError
        If the imaginary residual exceeds ``tol`` times the Frobenius norm of
        the result, i.e. the spectrum was not conjugate-symmetric.
    """
    ct = as_tensor3(ct)
    out = np.fft.ifft(ct, axis=check_mode(mode) - 1)
    imag = np.linalg.norm(out.imag)
    if imag > tol * max(np.linalg.norm(out), np.finfo(float).tiny):
        raise NumericalConsistencyError(
            f"inverse DFT along mode {mode} has imaginary residual {imag:.3e}"
        )
    return np.ascontiguousarray(out.real)


def inner(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b).real)


def fro_norm(t):
    return float(np.linalg.norm(np.ravel(t)))
