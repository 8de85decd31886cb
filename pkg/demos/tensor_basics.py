"""
Unfoldings, mode products and Fourier slices
============================================

Tensors are plain numpy arrays with three axes. Unfoldings and flat
offsets use the first-index-fastest order.
"""

import numpy as np

from mctf import fft_mode, fold, ifft_mode, mode_n_product, permute_to_mode3, unfold

# a 2x2x2 tensor holding 1..8 in storage order
t = np.arange(1, 9, dtype=float).reshape((2, 2, 2), order="F")
for mode in (1, 2, 3):
    print(f"mode-{mode} unfolding:\n{unfold(t, mode)}")

# folding inverts unfolding
assert np.array_equal(fold(unfold(t, 2), 2, t.shape), t)

# the n-mode product multiplies every mode-n fiber by a matrix
M = np.array([[1.0, 1.0]])
print("sum over mode 1:", mode_n_product(t, M, 1).shape)

# cyclic permutation brings any mode to the third axis
rng = np.random.default_rng(0)
x = rng.standard_normal((3, 4, 5))
print("mode 1 moved last:", permute_to_mode3(x, 1).shape)

# a DFT along mode 3; the inverse drops the (tiny) imaginary residue
spec = fft_mode(x, 3)
print("round trip error:", np.linalg.norm(ifft_mode(spec, 3) - x))
