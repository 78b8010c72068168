"""
Redundant architectures
=======================

When a pair's rank budget covers a whole block, its factor set is the
same as that of the merged pattern.  Such architectures are reduced,
factorized, and the merged factors are split back exactly.
"""

import numpy as np

from bfact import butterfly_factorize, factorize_any, remove_redundancy
from bfact.butterfly import reduced_permutation

rng = np.random.default_rng(0)

arch = [(1, 2, 2, 4), (2, 2, 2, 2), (4, 2, 3, 1), (4, 3, 2, 1)]
reduced, trace = remove_redundancy(arch)
print("original", arch)
print("reduced ", reduced.as_lists())
for rec in trace:
    print("  merged junction after factor", rec.index, ":", rec.left, "*", rec.right)

A = rng.standard_normal((8, 8))
sigma = (2, 1, 3)
res = factorize_any(A, arch, sigma)
print("factor patterns:", [f.pattern.as_tuple() for f in res.factors])
print("error on original", res.relative_error)

# the split order carries over to the junctions that survive the merge
sub_sigma = reduced_permutation(sigma, trace.groups(len(arch)))
print("reduced order", sub_sigma)
print("error on reduced ", butterfly_factorize(A, reduced, sub_sigma).relative_error)
