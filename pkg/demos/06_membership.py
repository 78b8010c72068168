"""
Checking membership with the complementary low-rank property
============================================================

A matrix is an exact butterfly product iff it lives on the product
support and every block at every level has rank at most the chain rank
of that level.
"""

import numpy as np

from bfact import clr_check, random_butterfly, butterfly_product, square_dyadic

rng = np.random.default_rng(0)
arch = square_dyadic(5)

member = butterfly_product(random_butterfly(arch, rng)).to_dense()
rep = clr_check(member, arch)
print("random product passes:", rep.passed)

noise = rng.standard_normal((32, 32))
rep = clr_check(noise, arch)
print("Gaussian passes:", rep.passed)
for lv in rep.levels:
    print(f"  level {lv.level}: rank limit {lv.rank_limit}, largest block rank {lv.max_rank}, "
          f"sigma_(r+1)/sigma_1 up to {lv.max_tail_ratio:.2f}")

rep = clr_check(member + 1e-3 * noise, arch)
print("slightly perturbed member passes:", rep.passed)
