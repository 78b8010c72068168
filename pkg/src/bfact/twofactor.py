"""Optimal two-factor fixed-support factorization and block QR exchanges.

On a butterfly pair ``(p1, p2)`` the rank-one supports group into classes
whose rectangles ``R_P × C_P`` are disjoint.  The best approximation of ``A``
by ``X @ Y`` then decouples into one truncated SVD of rank ``|P|`` per block,
plus the mass of ``A`` outside the rectangles, which no feasible pair can
reach.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .kfactor import KroneckerSparseFactor
from .pattern import (ArchitectureError, NotChainableError, Pattern, RedundantArchitectureError,
                      chain_rank, is_redundant_pair)
from .support import BlockLayout, generic_classes


class OutsideSupportWarning(UserWarning):
    """The input carries noticeable energy outside the reachable support."""


@dataclass
class TwoFactorResult:
    X: KroneckerSparseFactor
    Y: KroneckerSparseFactor
    residual_sq: float
    outside_mass_sq: float

    @property
    def error(self) -> float:
        return float(np.sqrt(self.residual_sq))


def _fix_signs(U: np.ndarray, Vt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each left singular vector made positive
    idx = np.argmax(np.abs(U), axis=-2)[..., None, :]
    s = np.sign(np.take_along_axis(U, idx, axis=-2))
    s[s == 0] = 1.0
    return U * s, Vt * np.swapaxes(s, -1, -2)


def _pad_last(x: np.ndarray, size: int) -> np.ndarray:
    if x.shape[-1] == size:
        return x
    pad = [(0, 0)] * (x.ndim - 1) + [(0, size - x.shape[-1])]
    return np.pad(x, pad)


def _truncated_blocks(blocks: np.ndarray, r: int, partial: bool = False):
    """Balanced rank-``r`` split of a stack of blocks.

    Returns ``(H, K, tail_sq)`` with ``H`` of shape ``(..., m, r)``, ``K`` of
    shape ``(..., r, n)`` and the discarded squared singular values summed.
    """
    m, n = blocks.shape[-2:]
    k = min(r, m, n)
    if partial and 0 < k < min(m, n) - 1:
        H, K = _partial_svd(blocks, k)
        diff = blocks - H @ K
        tail = float(np.vdot(diff, diff))
    else:
        try:
            U, s, Vt = np.linalg.svd(blocks, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            bad = _first_bad_block(blocks)
            raise np.linalg.LinAlgError(f"SVD did not converge on block {bad}") from exc
        U, Vt = _fix_signs(U[..., :k], Vt[..., :k, :])
        root = np.sqrt(s[..., :k])
        H = U * root[..., None, :]
        K = root[..., :, None] * Vt
        tail = float(np.sum(s[..., k:] ** 2))
    return _pad_last(H, r), np.swapaxes(_pad_last(np.swapaxes(K, -1, -2), r), -1, -2), tail


def _partial_svd(blocks: np.ndarray, k: int):
    from scipy.sparse.linalg import svds

    lead = blocks.shape[:-2]
    flat = blocks.reshape((-1,) + blocks.shape[-2:])
    H = np.zeros(flat.shape[:1] + (flat.shape[1], k))
    K = np.zeros(flat.shape[:1] + (k, flat.shape[2]))
    for i, B in enumerate(flat):
        if not np.any(B):
            continue
        U, s, Vt = svds(B, k=k, random_state=0)
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]
        U, Vt = _fix_signs(U, Vt)
        H[i] = U * np.sqrt(s)
        K[i] = np.sqrt(s)[:, None] * Vt
    return H.reshape(lead + H.shape[1:]), K.reshape(lead + K.shape[1:])


def _first_bad_block(blocks: np.ndarray) -> int:
    flat = blocks.reshape((-1,) + blocks.shape[-2:])
    for i, B in enumerate(flat):
        try:
            np.linalg.svd(B, compute_uv=False)
        except np.linalg.LinAlgError:
            return i
    return -1


def _check_outside(outside: float, total: float, threshold: float | None):
    if threshold is not None and total > 0 and outside > threshold * total:
        warnings.warn(f"{outside / total:.1%} of the squared norm lies outside the product support",
                      OutsideSupportWarning, stacklevel=3)


def split_factor(F: KroneckerSparseFactor, p1, p2, partial: bool = False) -> TwoFactorResult:
    """Best ``X @ Y`` approximation of a factor whose pattern is ``p1 * p2``."""
    layout = BlockLayout(p1, p2)
    if F.pattern != layout.product:
        raise ArchitectureError(f"factor pattern {F.pattern} is not {layout.left}*{layout.right} = {layout.product}")
    H, K, tail = _truncated_blocks(layout.product_to_blocks(F.values), layout.rank, partial)
    X = KroneckerSparseFactor(layout.left, layout.left_from_blocks(H))
    Y = KroneckerSparseFactor(layout.right, layout.right_from_blocks(K))
    return TwoFactorResult(X, Y, tail, 0.0)


def _size_check(A: np.ndarray, p1: Pattern, p2: Pattern):
    if p1.cols != p2.rows:
        raise ArchitectureError(f"{p1} has {p1.cols} columns but {p2} has {p2.rows} rows")
    if A.shape != (p1.rows, p2.cols):
        raise ValueError(f"matrix of shape {A.shape} does not match ({p1.rows}, {p2.cols})")


def fsmf(A, p1, p2, partial: bool = False, warn_threshold: float | None = 0.01) -> TwoFactorResult:
    """Optimal ``(X, Y)`` with supports in ``(S_p1, S_p2)`` minimizing ``||A - XY||_F``.

    ``partial`` switches to an iterative truncated SVD per block, which pays
    off only for wide blocks and a small rank.
    """
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    if isinstance(A, KroneckerSparseFactor):
        return split_factor(A, p1, p2, partial)
    A = np.asarray(A, dtype=np.float64)
    _size_check(A, p1, p2)
    total = float(np.vdot(A, A))
    if chain_rank(p1, p2) is None:
        return _fsmf_generic(A, p1, p2, total, warn_threshold)
    layout = BlockLayout(p1, p2)
    F, outside = KroneckerSparseFactor.from_dense(A, layout.product)
    _check_outside(outside, total, warn_threshold)
    res = split_factor(F, p1, p2, partial)
    res.residual_sq += outside
    res.outside_mass_sq = outside
    return res


def _fsmf_generic(A, p1, p2, total, warn_threshold) -> TwoFactorResult:
    """Same optimum for a size-compatible pair that is not chainable.

    Classes sharing a rectangle are merged, so each block gets rank equal to
    the number of inner indices it owns.
    """
    X = np.zeros((p1.rows, p1.cols))
    Y = np.zeros((p2.rows, p2.cols))
    rest = A.copy()
    tail = 0.0
    for members, rows, cols in generic_classes(p1, p2):
        B = A[np.ix_(rows, cols)]
        rest[np.ix_(rows, cols)] = 0.0
        H, K, t = _truncated_blocks(B, len(members))
        X[np.ix_(rows, members)] = H
        Y[np.ix_(members, cols)] = K
        tail += t
    outside = float(np.vdot(rest, rest))
    _check_outside(outside, total, warn_threshold)
    Xf, _ = KroneckerSparseFactor.from_dense(X, p1)
    Yf, _ = KroneckerSparseFactor.from_dense(Y, p2)
    return TwoFactorResult(Xf, Yf, tail + outside, outside)


def fsmf_error_only(A, p1, p2) -> float:
    """``min ||A - XY||_F`` over the pair, from singular values only."""
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    if isinstance(A, KroneckerSparseFactor):
        layout = BlockLayout(p1, p2)
        if A.pattern != layout.product:
            raise ArchitectureError(f"factor pattern {A.pattern} is not {layout.product}")
        vals, outside = A.values, 0.0
    else:
        A = np.asarray(A, dtype=np.float64)
        _size_check(A, p1, p2)
        if chain_rank(p1, p2) is None:
            return _fsmf_generic(A, p1, p2, float(np.vdot(A, A)), None).error
        layout = BlockLayout(p1, p2)
        F, outside = KroneckerSparseFactor.from_dense(A, layout.product)
        vals = F.values
    s = np.linalg.svd(layout.product_to_blocks(vals), compute_uv=False)
    return float(np.sqrt(np.sum(s[..., layout.rank:] ** 2) + outside))


def _signed_qr(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1)).copy()
    s[s == 0] = 1.0
    return Q * s[..., None, :], R * s[..., :, None]


def pseudo_orthonormalize(X: KroneckerSparseFactor, Y: KroneckerSparseFactor, side: str = "column"):
    """Rewrite ``(X, Y)`` without changing ``X @ Y``.

    ``side="column"`` makes every block ``X[R_P, P]`` column-orthonormal and
    pushes the triangular factor into ``Y``; ``side="row"`` does the mirror
    operation on ``Y``.  The diagonal of each triangular factor is kept
    non-negative.
    """
    p1, p2 = X.pattern, Y.pattern
    r = chain_rank(p1, p2)
    if r is None:
        raise NotChainableError(f"{p1} and {p2} are not chainable")
    if is_redundant_pair(p1, p2):
        raise RedundantArchitectureError(
            f"({p1}, {p2}) is redundant: r={r} >= min(b1={p1.b}, c2={p2.c}), blocks cannot be orthonormalized")
    layout = BlockLayout(p1, p2)
    Xb = layout.left_to_blocks(X.values)
    Yb = layout.right_to_blocks(Y.values)
    if side == "column":
        Q, R = _signed_qr(Xb)
        Xb, Yb = Q, R @ Yb
    elif side == "row":
        Q, R = _signed_qr(np.swapaxes(Yb, -1, -2))
        Xb, Yb = Xb @ np.swapaxes(R, -1, -2), np.swapaxes(Q, -1, -2)
    else:
        raise ValueError(f"side must be 'column' or 'row', got {side!r}")
    return (KroneckerSparseFactor(p1, layout.left_from_blocks(Xb)),
            KroneckerSparseFactor(p2, layout.right_from_blocks(Yb)))
