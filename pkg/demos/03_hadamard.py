"""
Exact factorization of a Hadamard matrix
========================================

The n x n Sylvester Hadamard matrix has an exact square dyadic butterfly
factorization with log2(n) factors of two nonzeros per row.  The
hierarchical algorithm finds one to machine precision.
"""

import time

import numpy as np

from bfact import butterfly_factorize, hierarchical_factorize, square_dyadic
from bfact.io import hadamard

for L in (6, 8, 10):
    n = 2 ** L
    H = hadamard(n)
    arch = square_dyadic(L)
    t0 = time.perf_counter()
    res = butterfly_factorize(H, arch, "balanced")
    dt = time.perf_counter() - t0
    print(f"n={n:5d}  rel err {res.relative_error:.1e}  {dt * 1e3:7.1f} ms  "
          f"params {arch.nnz} vs {n * n} dense")

# the recursive version without orthonormalization also works here
res = hierarchical_factorize(hadamard(64), square_dyadic(6))
print("recursive, n=64:", res.relative_error)

# factors are sparse: apply them to a vector without forming H
x = np.random.default_rng(1).standard_normal(1024)
res = butterfly_factorize(hadamard(1024), square_dyadic(10), "balanced")
y = x
for f in reversed(res.factors):
    y = f.matvec(y)
print("fast transform matches:", np.allclose(y, hadamard(1024) @ x))
