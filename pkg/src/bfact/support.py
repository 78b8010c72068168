"""Binary supports, rank-one contribution classes and their block layout.

For a chainable pair ``(p1, p2)`` with chain rank ``r``, the inner index set
``[a1 c1 d1]`` splits into ``a2 * d1`` classes ``P`` of size ``r``.  Each class
owns a dense rectangle ``R_P × C_P`` of size ``b1 × c2`` in the product, and
these rectangles are pairwise disjoint.  Every ``P``, ``R_P`` and ``C_P`` is an
arithmetic progression, which is how they are stored.

Indices are 0-based.  Classes are ordered by ``(t, k)`` with ``t < a2`` the
block of the right factor and ``k < d1`` the diagonal offset of the left one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .pattern import ArchitectureError, Pattern, require_chain_rank, star


def support_matrix(p) -> np.ndarray:
    """Dense 0/1 matrix ``I_a ⊗ 1_{b×c} ⊗ I_d`` (for tests and small sizes)."""
    p = Pattern.coerce(p)
    return np.kron(np.kron(np.eye(p.a, dtype=np.int64), np.ones((p.b, p.c), dtype=np.int64)),
                   np.eye(p.d, dtype=np.int64))


class Progression(NamedTuple):
    offset: int
    stride: int
    count: int

    def indices(self) -> np.ndarray:
        return self.offset + self.stride * np.arange(self.count)

    def __contains__(self, i) -> bool:  # type: ignore[override]
        j, rem = divmod(i - self.offset, self.stride)
        return rem == 0 and 0 <= j < self.count


class BlockClass(NamedTuple):
    inner: Progression
    rows: Progression
    cols: Progression


@dataclass(frozen=True)
class BlockPartition:
    """Equivalence classes of the rank-one supports of ``(S_p1, S_p2)``."""

    left: Pattern
    right: Pattern
    rank: int

    @property
    def n_classes(self) -> int:
        return self.right.a * self.left.d

    def class_at(self, t: int, k: int) -> BlockClass:
        p1, p2, r = self.left, self.right, self.rank
        g = p2.a // p1.a
        inner = Progression(t * p1.d * r + k, p1.d, r)
        rows = Progression((t // g) * p1.b * p1.d + k, p1.d, p1.b)
        cols = Progression(t * p2.c * p2.d + k % p2.d, p2.d, p2.c)
        return BlockClass(inner, rows, cols)

    @cached_property
    def classes(self) -> list[BlockClass]:
        return [self.class_at(t, k) for t in range(self.right.a) for k in range(self.left.d)]

    def to_json(self) -> str:
        return json.dumps({
            "left": list(self.left.as_tuple()),
            "right": list(self.right.as_tuple()),
            "rank": self.rank,
            "index_base": 0,
            "classes": [{"P": list(c.inner), "R": list(c.rows), "C": list(c.cols)} for c in self.classes],
        })


def block_partition(p1, p2) -> BlockPartition:
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    r = require_chain_rank(p1, p2)
    return BlockPartition(p1, p2, r)


def col_partition(p, r: int) -> list[Progression]:
    """Intrinsic column partition of a ``p``-factor for chain rank ``r`` (needs ``r | c``)."""
    p = Pattern.coerce(p)
    if r < 1 or p.c % r:
        raise ArchitectureError(f"column partition needs r | c, got r={r}, c={p.c}")
    return [Progression(t * p.d * r + k, p.d, r) for t in range(p.a * p.c // r) for k in range(p.d)]


def row_partition(p, r: int) -> list[Progression]:
    """Intrinsic row partition of a ``p``-factor for chain rank ``r`` (needs ``r | b``)."""
    p = Pattern.coerce(p)
    if r < 1 or p.b % r:
        raise ArchitectureError(f"row partition needs r | b, got r={r}, b={p.b}")
    # rows i = alpha*b*d + rho*d + delta with rho = j*(b/r) + k_hi, delta = k_lo
    e = p.b // r
    out = []
    for alpha in range(p.a):
        for k_hi in range(e):
            for k_lo in range(p.d):
                out.append(Progression(alpha * p.b * p.d + k_hi * p.d + k_lo, e * p.d, r))
    return out


def support_product_check(p1, p2) -> bool:
    """Check ``S_p1 S_p2 = r S_{p1*p2}`` by dense multiplication."""
    r = require_chain_rank(p1, p2)
    lhs = support_matrix(p1) @ support_matrix(p2)
    return bool(np.array_equal(lhs, r * support_matrix(star(p1, p2))))


def generic_classes(p1, p2) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Classes ``(P, R_P, C_P)`` of any size-compatible pair, chainable or not.

    Column supports of ``S_p1`` depend only on (block, diagonal offset) of the
    inner index, and likewise for rows of ``S_p2``, so classes are the groups
    sharing those four numbers.
    """
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    if p1.cols != p2.rows:
        raise ArchitectureError(f"{p1} and {p2} are not size-compatible")
    i = np.arange(p1.cols)
    keys = np.stack([i // (p1.c * p1.d), i % p1.d, i // (p2.b * p2.d), i % p2.d], axis=1)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    out = []
    for label in range(inverse.max() + 1):
        members = np.flatnonzero(inverse == label)
        a1, d1, a2, d2 = keys[members[0]]
        rows = a1 * p1.b * p1.d + d1 + p1.d * np.arange(p1.b)
        cols = a2 * p2.c * p2.d + d2 + p2.d * np.arange(p2.c)
        out.append((members, rows, cols))
    return out


class BlockLayout:
    """Reshape maps between factor value arrays and per-class dense blocks.

    For a chainable pair, with ``n = a2 * d1`` classes in ``(t, k)`` order:

    * left values ``(a1, b1, c1, d1)`` <-> blocks ``X[R_P, P]`` of shape ``(a2, d1, b1, r)``
    * right values ``(a2, b2, c2, d2)`` <-> blocks ``Y[P, C_P]`` of shape ``(a2, d1, r, c2)``
    * product values (pattern ``p1*p2``) <-> blocks ``(XY)[R_P, C_P]`` of shape ``(a2, d1, b1, c2)``
    """

    def __init__(self, p1, p2):
        self.left = Pattern.coerce(p1)
        self.right = Pattern.coerce(p2)
        self.rank = require_chain_rank(self.left, self.right)
        self.product = star(self.left, self.right)
        self.g = self.right.a // self.left.a
        self.e = self.left.d // self.right.d

    def left_to_blocks(self, v: np.ndarray) -> np.ndarray:
        a1, b1, _, d1 = self.left
        a2, r, g = self.right.a, self.rank, self.g
        return v.reshape(a1, b1, g, r, d1).transpose(0, 2, 4, 1, 3).reshape(a2, d1, b1, r)

    def left_from_blocks(self, blocks: np.ndarray) -> np.ndarray:
        a1, b1, c1, d1 = self.left
        r, g = self.rank, self.g
        return blocks.reshape(a1, g, d1, b1, r).transpose(0, 3, 1, 4, 2).reshape(a1, b1, c1, d1)

    def right_to_blocks(self, v: np.ndarray) -> np.ndarray:
        a2, _, c2, d2 = self.right
        r, e, d1 = self.rank, self.e, self.left.d
        return v.reshape(a2, r, e, c2, d2).transpose(0, 2, 4, 1, 3).reshape(a2, d1, r, c2)

    def right_from_blocks(self, blocks: np.ndarray) -> np.ndarray:
        a2, b2, c2, d2 = self.right
        r, e = self.rank, self.e
        return blocks.reshape(a2, e, d2, r, c2).transpose(0, 3, 1, 4, 2).reshape(a2, b2, c2, d2)

    def product_to_blocks(self, v: np.ndarray) -> np.ndarray:
        a1, b1, d1 = self.left.a, self.left.b, self.left.d
        a2, c2, d2 = self.right.a, self.right.c, self.right.d
        return v.reshape(a1, b1, self.e, self.g, c2, d2).transpose(0, 3, 2, 5, 1, 4).reshape(a2, d1, b1, c2)

    def product_from_blocks(self, blocks: np.ndarray) -> np.ndarray:
        a1, b1 = self.left.a, self.left.b
        c2, d2 = self.right.c, self.right.d
        return (blocks.reshape(a1, self.g, self.e, d2, b1, c2)
                .transpose(0, 4, 2, 1, 5, 3)
                .reshape(self.product.as_tuple()))
