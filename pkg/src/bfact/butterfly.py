"""Hierarchical butterfly factorization.

Split labels follow the usual convention: junction ``s`` in ``1..L-1`` sits
between factors ``s`` and ``s+1`` (1-based).  A permutation ``sigma`` of these
labels fixes the order in which the two-factor splits are performed.

Intermediate factors are kept in compact form: a group of consecutive
factors ``q..t`` is stored as one Kronecker-sparse factor of the merged
pattern, so no dense ``m x n`` matrix is formed after the initial restriction
of ``A`` to the product support.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kfactor import KroneckerSparseFactor, multiply, multiply_chain
from .pattern import (Architecture, ArchitectureError, RedundantArchitectureError, architecture_from_json,
                      architecture_to_json, as_architecture, interval_pattern, is_redundant,
                      product_pattern, rank_vector, remove_redundancy)
from .support import BlockLayout
from .twofactor import pseudo_orthonormalize, split_factor


# ---------------------------------------------------------------------------
# bracketing trees and split permutations

@dataclass(frozen=True)
class BracketingTree:
    """Binary tree of intervals ``[q, t]`` (1-based, inclusive) rooted at ``[1, L]``."""

    q: int
    t: int
    left: "BracketingTree | None" = None
    right: "BracketingTree | None" = None

    def __post_init__(self):
        if self.q > self.t:
            raise ValueError(f"empty interval [{self.q}, {self.t}]")
        if (self.left is None) != (self.right is None):
            raise ValueError(f"node [{self.q}, {self.t}] has exactly one child")
        if self.left is None:
            if self.q != self.t:
                raise ValueError(f"leaf [{self.q}, {self.t}] is not a singleton")
            return
        if self.left.q != self.q or self.right.t != self.t or self.left.t + 1 != self.right.q:
            raise ValueError(f"children [{self.left.q}, {self.left.t}], [{self.right.q}, {self.right.t}] "
                             f"do not split [{self.q}, {self.t}]")

    @property
    def split(self) -> int | None:
        return None if self.left is None else self.left.t

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def __repr__(self):
        if self.is_leaf:
            return f"[{self.q}]"
        return f"({self.left!r} {self.right!r})"


def tree_to_permutation(tree: BracketingTree) -> tuple[int, ...]:
    """Split indices read in preorder."""
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        out.append(node.split)
        stack.append(node.right)
        stack.append(node.left)
    return tuple(out)


def check_permutation(sigma, L: int) -> tuple[int, ...]:
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(1, L)):
        raise ValueError(f"{sigma} is not a permutation of 1..{L - 1}")
    return sigma


def permutation_to_tree(sigma, L: int | None = None) -> BracketingTree:
    """Tree whose splits are made in the order given by ``sigma``.

    Any permutation is accepted; each label splits the interval that still
    contains it, so preorder of the result may differ from ``sigma`` when
    ``sigma`` is not itself a preorder.
    """
    L = len(sigma) + 1 if L is None else L
    sigma = check_permutation(sigma, L)

    def build(q, t, labels):
        if q == t:
            return BracketingTree(q, t)
        s = labels[0]
        return BracketingTree(q, t,
                              build(q, s, [x for x in labels if x < s]),
                              build(s + 1, t, [x for x in labels if x > s]))

    return build(1, L, list(sigma))


def balanced_tree(L: int, q: int = 1) -> BracketingTree:
    t = q + L - 1
    if L == 1:
        return BracketingTree(q, q)
    n_left = L // 2
    return BracketingTree(q, t, balanced_tree(n_left, q), balanced_tree(L - n_left, q + n_left))


def balanced_permutation(L: int) -> tuple[int, ...]:
    return tree_to_permutation(balanced_tree(L))


def identity_permutation(L: int) -> tuple[int, ...]:
    return tuple(range(1, L))


def reverse_permutation(L: int) -> tuple[int, ...]:
    return tuple(range(L - 1, 0, -1))


def random_permutation(L: int, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(s) for s in rng.permutation(np.arange(1, L)))


def resolve_permutation(sigma, L: int, rng: np.random.Generator | None = None) -> tuple[int, ...]:
    """Accept a name (identity, reverse, balanced, random), a tree or an explicit list."""
    if sigma is None or sigma == "identity":
        return identity_permutation(L)
    if isinstance(sigma, BracketingTree):
        if (sigma.q, sigma.t) != (1, L):
            raise ValueError(f"tree covers [{sigma.q}, {sigma.t}], expected [1, {L}]")
        return tree_to_permutation(sigma)
    if sigma == "reverse":
        return reverse_permutation(L)
    if sigma == "balanced":
        return balanced_permutation(L)
    if sigma == "random":
        return random_permutation(L, rng if rng is not None else np.random.default_rng())
    return check_permutation(sigma, L)


# ---------------------------------------------------------------------------
# results

def bound_constants(arch) -> tuple[int, float]:
    L = len(as_architecture(arch))
    c = max(L, 2) - 1
    return c, math.sqrt(c)


@dataclass
class FactorizationResult:
    arch: Architecture
    factors: list[KroneckerSparseFactor]
    sigma: tuple[int, ...]
    ortho: bool
    abs_error: float
    norm_A: float
    split_errors: list[float] | None = None
    trace: list[KroneckerSparseFactor] | None = None
    reduced_arch: Architecture | None = None

    @property
    def relative_error(self) -> float:
        return self.abs_error / self.norm_A if self.norm_A > 0 else 0.0

    @property
    def bound_sum(self) -> float | None:
        return None if self.split_errors is None else float(sum(self.split_errors))

    @property
    def bound_pyth(self) -> float | None:
        return None if self.split_errors is None else float(math.sqrt(sum(e * e for e in self.split_errors)))

    @property
    def c_linear(self) -> int:
        return bound_constants(self.arch)[0]

    @property
    def c_sqrt(self) -> float:
        return bound_constants(self.arch)[1]

    def product(self) -> KroneckerSparseFactor:
        return multiply_chain(self.factors)

    def to_dense(self) -> np.ndarray:
        return self.product().to_dense()

    def to_json(self, encoding: str = "base64") -> dict:
        return {
            "arch": architecture_to_json(self.arch),
            "sigma": list(self.sigma),
            "ortho": self.ortho,
            "rel_error": self.relative_error,
            "abs_error": self.abs_error,
            "norm": self.norm_A,
            "split_errors": self.split_errors,
            "bounds": {"sum": self.bound_sum, "pyth": self.bound_pyth,
                       "c_linear": self.c_linear, "c_sqrt": self.c_sqrt},
            "factors": [f.to_json(encoding) for f in self.factors],
        }

    def dumps(self, encoding: str = "base64") -> str:
        return json.dumps(self.to_json(encoding), indent=1)

    @classmethod
    def from_json(cls, obj: dict) -> "FactorizationResult":
        arch = architecture_from_json(obj["arch"])
        factors = [KroneckerSparseFactor.from_json(f) for f in obj["factors"]]
        if [f.pattern for f in factors] != list(arch):
            raise ArchitectureError("factor patterns do not match the architecture")
        norm = float(obj.get("norm", 0.0))
        abs_err = float(obj.get("abs_error", obj["rel_error"] * norm))
        return cls(arch, factors, tuple(obj["sigma"]), bool(obj["ortho"]), abs_err, norm,
                   obj.get("split_errors"))


# ---------------------------------------------------------------------------
# helpers

def _restrict(A, arch: Architecture) -> tuple[KroneckerSparseFactor, float, float]:
    """Project ``A`` on the product support: (compact part, outside mass, ||A||)."""
    target = product_pattern(arch)
    if isinstance(A, KroneckerSparseFactor):
        if A.pattern != target:
            raise ArchitectureError(f"factor pattern {A.pattern} is not the product pattern {target}")
        return A, 0.0, A.norm()
    A = np.asarray(A, dtype=np.float64)
    if A.shape != arch.shape:
        raise ValueError(f"matrix of shape {A.shape} does not match architecture shape {arch.shape}")
    F, outside = KroneckerSparseFactor.from_dense(A, target)
    return F, outside, float(np.linalg.norm(A))


def _error(F: KroneckerSparseFactor, outside: float, factors) -> float:
    diff = F.values - multiply_chain(factors).values
    return float(math.sqrt(float(np.vdot(diff, diff)) + outside))


def split_errors(A, arch) -> list[float]:
    """``E^{beta_s}(A)`` for every junction ``s = 1..L-1``."""
    arch = as_architecture(arch)
    rank_vector(arch)
    F, outside, _ = _restrict(A, arch)
    L = len(arch)
    out = []
    for s in range(1, L):
        layout = BlockLayout(interval_pattern(arch, 0, s - 1), interval_pattern(arch, s, L - 1))
        sv = np.linalg.svd(layout.product_to_blocks(F.values), compute_uv=False)
        out.append(float(math.sqrt(float(np.sum(sv[..., layout.rank:] ** 2)) + outside)))
    return out


def split_error(A, arch, s: int) -> float:
    """Optimal error of the two-factor architecture obtained by splitting at ``s``."""
    arch = as_architecture(arch)
    if not 1 <= s <= len(arch) - 1:
        raise ValueError(f"split index {s} outside [1, {len(arch) - 1}]")
    rank_vector(arch)
    F, outside, _ = _restrict(A, arch)
    L = len(arch)
    layout = BlockLayout(interval_pattern(arch, 0, s - 1), interval_pattern(arch, s, L - 1))
    sv = np.linalg.svd(layout.product_to_blocks(F.values), compute_uv=False)
    return float(math.sqrt(float(np.sum(sv[..., layout.rank:] ** 2)) + outside))


def _zero_factors(arch) -> list[KroneckerSparseFactor]:
    # QR and SVD of zero blocks give nonzero orthonormal parts; keep A = 0 trivial
    return [KroneckerSparseFactor(p) for p in arch]


def _finish(A_part, arch, factors, sigma, ortho, with_bounds, A, trace=None, reduced=None):
    F, outside, norm = A_part
    errs = split_errors(F, arch) if with_bounds else None
    if errs is not None and outside:
        errs = [math.sqrt(e * e + outside) for e in errs]
    return FactorizationResult(arch, factors, tuple(sigma), ortho, _error(F, outside, factors), norm,
                               errs, trace, reduced)


# ---------------------------------------------------------------------------
# recursive version, no orthonormalization

def hierarchical_factorize(A, arch, tree=None, with_bounds: bool = False) -> FactorizationResult:
    """Greedy recursive two-factor splits following a bracketing tree.

    ``tree`` may be a :class:`BracketingTree` or anything accepted by
    :func:`resolve_permutation`; defaults to the balanced tree.
    """
    arch = as_architecture(arch)
    rank_vector(arch)
    L = len(arch)
    if tree is None:
        tree = balanced_tree(L)
    elif not isinstance(tree, BracketingTree):
        tree = permutation_to_tree(resolve_permutation(tree, L), L)
    if (tree.q, tree.t) != (1, L):
        raise ValueError(f"tree covers [{tree.q}, {tree.t}], expected [1, {L}]")
    part = _restrict(A, arch)
    if not np.any(part[0].values):
        return _finish(part, arch, _zero_factors(arch), tree_to_permutation(tree), False, with_bounds, A)

    def recurse(F, node):
        if node.is_leaf:
            return [F]
        q, s, t = node.q - 1, node.split - 1, node.t - 1
        res = split_factor(F, interval_pattern(arch, q, s), interval_pattern(arch, s + 1, t))
        return recurse(res.X, node.left) + recurse(res.Y, node.right)

    factors = recurse(part[0], tree)
    return _finish(part, arch, factors, tree_to_permutation(tree), False, with_bounds, A)


# ---------------------------------------------------------------------------
# unrolled version, with pseudo-orthonormalization

def butterfly_factorize(A, arch, sigma=None, orthonormalize: bool = True, strict: bool = False,
                        with_bounds: bool = False, trace: bool = False,
                        rng: np.random.Generator | None = None) -> FactorizationResult:
    """Butterfly factorization of ``A`` on a chainable architecture.

    With ``orthonormalize`` the factors left (right) of the group being split
    are made column (row) pseudo-orthonormal first, which is what gives the
    error bounds.  This needs a non-redundant architecture; a redundant one is
    passed on to :func:`factorize_any` unless ``strict`` is set.

    ``trace`` records the compact product after each split.
    """
    arch = as_architecture(arch)
    rank_vector(arch)
    L = len(arch)
    sigma = resolve_permutation(sigma, L, rng)
    if orthonormalize and is_redundant(arch):
        if strict:
            raise RedundantArchitectureError("orthonormalization needs a non-redundant architecture; "
                                             "use factorize_any or strict=False")
        return factorize_any(A, arch, sigma, with_bounds=with_bounds)
    part = _restrict(A, arch)
    if not np.any(part[0].values):
        return _finish(part, arch, _zero_factors(arch), sigma, orthonormalize, with_bounds, A, [] if trace else None)
    parts = [(0, L - 1)]
    factors = [part[0]]
    history = [] if trace else None
    for s in sigma:
        j = next(i for i, (q, t) in enumerate(parts) if q <= s - 1 < t)
        if orthonormalize:
            for k in range(j):
                factors[k], factors[k + 1] = pseudo_orthonormalize(factors[k], factors[k + 1], "column")
            for k in range(len(parts) - 1, j, -1):
                factors[k - 1], factors[k] = pseudo_orthonormalize(factors[k - 1], factors[k], "row")
        q, t = parts[j]
        res = split_factor(factors[j], interval_pattern(arch, q, s - 1), interval_pattern(arch, s, t))
        parts[j:j + 1] = [(q, s - 1), (s, t)]
        factors[j:j + 1] = [res.X, res.Y]
        if trace:
            history.append(multiply_chain(factors))
    return _finish(part, arch, factors, sigma, orthonormalize, with_bounds, A, history)


# ---------------------------------------------------------------------------
# redundant architectures

def reduced_permutation(sigma, groups) -> tuple[int, ...]:
    """Order-preserving restriction of ``sigma`` to junctions between merge groups.

    ``groups`` are 0-based ``(first, last)`` original ranges; the junction
    after group ``g`` carries original label ``last + 1`` and reduced label
    ``g + 1``.
    """
    mapping = {last + 1: g + 1 for g, (_, last) in enumerate(groups[:-1])}
    return tuple(mapping[s] for s in sigma if s in mapping)


def factorize_any(A, arch, sigma=None, orthonormalize: bool = True, with_bounds: bool = False,
                  rng: np.random.Generator | None = None) -> FactorizationResult:
    """Factorize on any chainable architecture, redundant or not.

    Redundant pairs are merged, the reduced architecture is factorized, and
    each merged factor is split back exactly into its original patterns.
    """
    arch = as_architecture(arch)
    rank_vector(arch)
    L = len(arch)
    sigma = resolve_permutation(sigma, L, rng)
    reduced, merges = remove_redundancy(arch)
    if not len(merges):
        return butterfly_factorize(A, arch, sigma, orthonormalize, strict=True, with_bounds=with_bounds)
    sub_sigma = reduced_permutation(sigma, merges.groups(L))
    sub = butterfly_factorize(A, reduced, sub_sigma, orthonormalize, strict=True)
    factors = list(sub.factors)
    for rec in reversed(merges.records):
        res = split_factor(factors[rec.index], rec.left, rec.right)
        factors[rec.index:rec.index + 1] = [res.X, res.Y]
    part = _restrict(A, arch)
    return _finish(part, arch, factors, sigma, orthonormalize, with_bounds, A, reduced=reduced)


# ---------------------------------------------------------------------------
# complementary low-rank check

@dataclass
class LevelReport:
    level: int
    rank_limit: int
    max_rank: int
    max_tail_ratio: float

    @property
    def ok(self) -> bool:
        return self.max_rank <= self.rank_limit


@dataclass
class ClrReport:
    support_ok: bool
    outside_mass: float
    levels: list[LevelReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.support_ok and all(lv.ok for lv in self.levels)

    def to_json(self) -> dict:
        return {"passed": self.passed, "support_ok": self.support_ok, "outside_mass": self.outside_mass,
                "levels": [{"level": lv.level, "rank_limit": lv.rank_limit, "max_rank": lv.max_rank,
                            "max_tail_ratio": lv.max_tail_ratio, "ok": lv.ok} for lv in self.levels]}


def clr_check(A, arch, tol: float = 1e-8) -> ClrReport:
    """Support and per-level block rank conditions characterizing membership.

    Numerical rank of a block counts singular values above ``tol`` times the
    largest one of that block.  ``max_tail_ratio`` is the largest
    ``sigma_{r+1} / sigma_1`` seen at the level.
    """
    arch = as_architecture(arch)
    ranks = rank_vector(arch)
    F, outside, _ = _restrict(A, arch)
    report = ClrReport(outside == 0.0, outside)
    L = len(arch)
    for ell in range(1, L):
        layout = BlockLayout(interval_pattern(arch, 0, ell - 1), interval_pattern(arch, ell, L - 1))
        limit = ranks[ell - 1]
        sv = np.linalg.svd(layout.product_to_blocks(F.values), compute_uv=False)
        top = sv[..., :1]
        numerical = np.sum(sv > tol * top, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(top > 0, sv[..., limit:limit + 1] / top, 0.0) if sv.shape[-1] > limit else np.zeros(1)
        report.levels.append(LevelReport(ell, limit, int(numerical.max(initial=0)), float(np.max(tail, initial=0.0))))
    return report


def random_butterfly(arch, rng: np.random.Generator, dist: str = "normal") -> list[KroneckerSparseFactor]:
    return [KroneckerSparseFactor.random(p, rng, dist) for p in as_architecture(arch)]


def butterfly_product(factors) -> KroneckerSparseFactor:
    return multiply_chain(factors)


__all__ = [
    "BracketingTree", "ClrReport", "FactorizationResult", "LevelReport", "balanced_permutation",
    "balanced_tree", "bound_constants", "butterfly_factorize", "butterfly_product", "check_permutation",
    "clr_check", "factorize_any", "hierarchical_factorize", "identity_permutation", "multiply",
    "permutation_to_tree", "random_butterfly", "random_permutation", "reduced_permutation",
    "resolve_permutation", "reverse_permutation", "split_error", "split_errors", "tree_to_permutation",
]
