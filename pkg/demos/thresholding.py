"""
Singular value shrinkage
========================

Nuclear-norm shrinkage subtracts the same threshold from every singular
value. The log-penalty variant weights it by ``1 / (sigma + eps)`` so large
singular values survive almost untouched.
"""

import numpy as np

from mctf import log_svt, log_tnn_prox, svt, tnn_prox

M = np.diag([3.0, 1.0])
print("svt, delta=2:\n", svt(M, 2.0))
print("log_svt, gamma=1, eps=1:\n", log_svt(M, 1.0, 1.0))

rng = np.random.default_rng(1)
A = rng.standard_normal((30, 4)) @ rng.standard_normal((4, 20))
A += 0.1 * rng.standard_normal(A.shape)
s = np.linalg.svd(A, compute_uv=False)
print("input singular values   ", np.round(s[:6], 2))
print("after svt(2.0)          ", np.round(np.linalg.svd(svt(A, 2.0), compute_uv=False)[:6], 2))
print("after log_svt(2.0, 0.1) ",
      np.round(np.linalg.svd(log_svt(A, 2.0, 0.1), compute_uv=False)[:6], 2))

# the tensor versions shrink each Fourier slice along the chosen mode
t = rng.standard_normal((6, 7, 8))
for mode in (1, 2, 3):
    a = tnn_prox(t, mode, 1.0)
    b = log_tnn_prox(t, mode, 1.0, 0.1)
    print(f"mode {mode}: |t| {np.linalg.norm(t):.2f}  convex {np.linalg.norm(a):.2f}  "
          f"log {np.linalg.norm(b):.2f}")
