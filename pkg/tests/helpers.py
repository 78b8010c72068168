"""Random architectures and matrices for the tests."""

import numpy as np

from bfact.kfactor import KroneckerSparseFactor, dense_product
from bfact.pattern import Architecture, Pattern, chain_rank, is_redundant_pair

from oracles import patterns_up_to

_PATTERNS = [Pattern(*t) for t in patterns_up_to(4)]


def _successors(p, allow_redundant):
    out = []
    for q in _PATTERNS:
        if q.rows != p.cols or chain_rank(p, q) is None:
            continue
        if not allow_redundant and is_redundant_pair(p, q):
            continue
        out.append(q)
    return out


def random_architecture(rng, max_depth=5, allow_redundant=False, min_depth=1):
    """Random walk on chainable pairs of patterns with components <= 4."""
    while True:
        L = int(rng.integers(min_depth, max_depth + 1))
        pats = [_PATTERNS[rng.integers(len(_PATTERNS))]]
        while len(pats) < L:
            nxt = _successors(pats[-1], allow_redundant)
            if not nxt:
                break
            pats.append(nxt[rng.integers(len(nxt))])
        if len(pats) == L:
            return Architecture(pats)


def random_redundant_architecture(rng, max_depth=5):
    while True:
        arch = random_architecture(rng, max_depth, allow_redundant=True, min_depth=2)
        pats = arch.patterns
        if any(is_redundant_pair(p, q) for p, q in zip(pats[:-1], pats[1:])):
            return arch


def random_factors(arch, rng, dist="normal"):
    return [KroneckerSparseFactor.random(p, rng, dist) for p in arch]


def random_member(arch, rng, dist="normal"):
    return dense_product(random_factors(arch, rng, dist))
