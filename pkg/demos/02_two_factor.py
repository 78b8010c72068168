"""
Two-factor fixed-support factorization
======================================

On a chainable pair the best X Y with X, Y on fixed supports splits into
independent truncated SVDs, one per block.  For the low-rank pair this is
just the Eckart-Young theorem.
"""

import numpy as np

from bfact import block_partition, fsmf, low_rank, pseudo_orthonormalize, is_left_r_unitary

rng = np.random.default_rng(0)

# low rank: the residual is the SVD tail
A = rng.standard_normal((12, 9))
arch = low_rank(12, 9, 3)
res = fsmf(A, arch[0], arch[1])
s = np.linalg.svd(A, compute_uv=False)
print("fsmf error    ", res.error)
print("SVD tail      ", np.sqrt(np.sum(s[3:] ** 2)))

# a butterfly pair: 8 independent rank-one blocks
p1, p2 = (1, 2, 2, 4), (2, 2, 2, 2)
bp = block_partition(p1, p2)
print("classes:", bp.n_classes, "rank per block:", bp.rank)
# a dense random matrix has mass off the product support, hence the warning
A = rng.standard_normal((8, 8))
res = fsmf(A, p1, p2)
print("residual^2", res.residual_sq, " of which outside the product support", res.outside_mass_sq)

# pseudo-orthonormalization keeps X Y and makes X column-orthonormal per block
X, Y = pseudo_orthonormalize(res.X, res.Y, "column")
print("product kept:", np.allclose(X.to_dense() @ Y.to_dense(), res.X.to_dense() @ res.Y.to_dense()))
print("left r-unitary:", is_left_r_unitary(X, bp.rank))
