"""
Noisy butterfly matrices and the error bounds
=============================================

A butterfly matrix plus Gaussian noise of relative level eps is
approximated with error below eps.  The error is also bounded by the sum
of the two-factor errors at each split, and with left-to-right order by
their root sum of squares.
"""

import numpy as np

from bfact import butterfly_factorize, rank_vector, split_errors
from bfact.cli import preset_architecture
from bfact.io import make_rng, noisy_butterfly_matrix

arch = preset_architecture(256, 4, 4)
print("architecture", arch.as_lists(), "ranks", rank_vector(arch))

for eps in (0.01, 0.1, 0.5):
    A, clean = noisy_butterfly_matrix(arch, eps, make_rng(0))
    on = butterfly_factorize(A, arch, "balanced")
    off = butterfly_factorize(A, arch, "balanced", orthonormalize=False)
    print(f"eps={eps:<5} ortho on {on.relative_error:.4f}   off {off.relative_error:.4f}")

A, _ = noisy_butterfly_matrix(arch, 0.1, make_rng(1))
print("split errors / ||A||:", np.round(np.array(split_errors(A, arch)) / np.linalg.norm(A), 4))
for sigma in ("identity", "reverse", "balanced"):
    res = butterfly_factorize(A, arch, sigma, with_bounds=True)
    print(f"{sigma:9s} error {res.abs_error:9.3f}   sum bound {res.bound_sum:9.3f}   "
          f"pyth bound {res.bound_pyth:9.3f}")
