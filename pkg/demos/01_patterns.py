"""
Patterns and chainability
=========================

A pattern (a, b, c, d) is the support of I_a x 1_{b x c} x I_d.  Two
patterns chain when the product of their factors is again supported on a
single pattern, which then also tells how many rank-one terms each block
of the product holds.
"""

import numpy as np

from bfact import (chain_rank, is_redundant, monarch, product_pattern, rank_vector, remove_redundancy,
                   square_dyadic, star, support_matrix)

# the support of (1, 2, 2, 2): two interleaved 2 x 2 all-ones blocks
print(support_matrix((1, 2, 2, 2)))

# chainable pair: product support is r times the support of the star pattern
p1, p2 = (1, 2, 2, 4), (2, 2, 2, 2)
r = chain_rank(p1, p2)
print("r =", r, " star =", star(p1, p2))
assert np.array_equal(support_matrix(p1) @ support_matrix(p2), r * support_matrix(star(p1, p2)))

# a pair that does not chain
print("chain rank of (2,2,2,1),(1,2,2,2):", chain_rank((2, 2, 2, 1), (1, 2, 2, 2)))

# the square dyadic architecture behind the Hadamard and DFT matrices
arch = square_dyadic(4)
print(arch.as_lists())
print("ranks", rank_vector(arch), " nnz", arch.nnz, " product", product_pattern(arch))

# Monarch: two factors with block-diagonal structure
print("monarch(12, 20, 3, 4):", monarch(12, 20, 3, 4).as_lists())

# a redundant low-rank pair collapses to one dense factor
reduced, trace = remove_redundancy([(1, 4, 5, 1), (1, 5, 6, 1)])
print("redundant?", is_redundant([(1, 4, 5, 1), (1, 5, 6, 1)]), "->", reduced.as_lists())
