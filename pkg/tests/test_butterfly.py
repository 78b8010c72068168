import json
import math
import warnings

import numpy as np
import pytest

from bfact.butterfly import (BracketingTree, FactorizationResult, balanced_permutation, balanced_tree,
                             bound_constants, butterfly_factorize, clr_check, factorize_any,
                             hierarchical_factorize, identity_permutation, permutation_to_tree,
                             random_permutation, reduced_permutation, resolve_permutation,
                             reverse_permutation, split_error, split_errors, tree_to_permutation)
from bfact.kfactor import KroneckerSparseFactor, dense_product
from bfact.pattern import (NotChainableError, RedundantArchitectureError, interval_pattern, kaleidoscope,
                           low_rank, monarch, product_pattern, rank_vector, remove_redundancy,
                           square_dyadic)
from bfact.support import support_matrix
from bfact.twofactor import OutsideSupportWarning, fsmf_error_only

from helpers import random_architecture, random_member, random_redundant_architecture
from oracles import sylvester


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideSupportWarning)
        yield


def _rel(res):
    return res.relative_error


def zeroed_rows_instance():
    arch = square_dyadic(3)
    D = np.diag([0.0, 1, 1, 1, 0, 1, 1, 1])
    S = [support_matrix(p).astype(float) for p in arch]
    return arch, D @ S[0] @ S[1] @ S[2]


# ---------------------------------------------------------------------------
# trees and permutations

def test_balanced_tree_of_ten():
    assert balanced_permutation(10) == (5, 2, 1, 3, 4, 7, 6, 8, 9)


def test_small_trees():
    left_to_right = BracketingTree(1, 3, BracketingTree(1, 1), BracketingTree(2, 3, BracketingTree(2, 2),
                                                                              BracketingTree(3, 3)))
    assert tree_to_permutation(left_to_right) == (1, 2)
    assert tree_to_permutation(balanced_tree(2)) == (1,)
    assert balanced_permutation(1) == ()


def test_tree_round_trip(rng):
    for L in range(1, 9):
        for _ in range(10):
            sigma = random_permutation(L, rng)
            tree = permutation_to_tree(sigma, L)
            assert permutation_to_tree(tree_to_permutation(tree), L) == tree
        tree = balanced_tree(L)
        assert permutation_to_tree(tree_to_permutation(tree), L) == tree
        assert permutation_to_tree(identity_permutation(L), L) == permutation_to_tree(
            tree_to_permutation(permutation_to_tree(identity_permutation(L), L)), L)


def test_tree_has_l_minus_one_splits():
    tree = balanced_tree(7)
    assert len(tree_to_permutation(tree)) == 6


@pytest.mark.parametrize("build", [
    lambda: BracketingTree(1, 2),
    lambda: BracketingTree(1, 3, BracketingTree(1, 1), BracketingTree(3, 3)),
    lambda: BracketingTree(1, 2, BracketingTree(1, 1), None),
    lambda: BracketingTree(2, 1),
])
def test_malformed_trees(build):
    with pytest.raises(ValueError):
        build()


def test_resolve_permutation():
    assert resolve_permutation("reverse", 4) == reverse_permutation(4) == (3, 2, 1)
    assert resolve_permutation(None, 4) == (1, 2, 3)
    assert resolve_permutation(balanced_tree(4), 4) == balanced_permutation(4)
    with pytest.raises(ValueError):
        resolve_permutation([1, 1, 2], 4)


# ---------------------------------------------------------------------------
# recursive and unrolled algorithms

@pytest.mark.parametrize("sigma", ["identity", "reverse", "balanced", (2, 1, 3), (3, 1, 2)])
def test_hadamard_16(sigma):
    H = sylvester(16)
    arch = square_dyadic(4)
    assert _rel(hierarchical_factorize(H, arch, sigma)) < 1e-12
    assert _rel(butterfly_factorize(H, arch, sigma)) < 1e-12
    assert _rel(butterfly_factorize(H, arch, sigma, orthonormalize=False)) < 1e-12


def test_recursive_recovers_member(rng):
    arch = square_dyadic(3)
    A = random_member(arch, rng)
    res = hierarchical_factorize(A, arch)
    assert _rel(res) < 1e-10
    assert [f.pattern for f in res.factors] == list(arch)


def test_single_factor_is_mask(rng):
    A = rng.standard_normal((2, 3))
    res = butterfly_factorize(A, [(1, 2, 3, 1)])
    assert np.array_equal(res.to_dense(), A)
    assert res.abs_error == 0.0
    A = rng.standard_normal((4, 4))
    res = hierarchical_factorize(A, [(2, 2, 2, 1)])
    assert np.array_equal(res.to_dense(), A * support_matrix((2, 2, 2, 1)))


def test_zeroed_rows_instance_recovers():
    arch, A = zeroed_rows_instance()
    res = butterfly_factorize(A, arch, (1, 2))
    assert _rel(res) < 1e-12


def test_member_recovery_any_sigma(rng):
    for _ in range(20):
        arch = random_architecture(rng, max_depth=5)
        A = random_member(arch, rng)
        res = butterfly_factorize(A, arch, "random", rng=rng)
        assert _rel(res) < 1e-10


def test_l2_is_optimal(rng):
    for _ in range(20):
        arch = random_architecture(rng, max_depth=2, min_depth=2)
        A = rng.standard_normal(arch.shape)
        err = butterfly_factorize(A, arch).abs_error
        ref = split_error(A, arch, 1)
        assert abs(err - ref) <= 1e-12 * max(ref, 1e-300) + 1e-13 * np.linalg.norm(A)
        assert abs(ref - fsmf_error_only(A, arch[0], arch[1])) <= 1e-12 * max(ref, 1.0)


def test_rejects_non_chainable_and_bad_shape(rng):
    with pytest.raises(NotChainableError):
        butterfly_factorize(np.zeros(kaleidoscope(4).shape), kaleidoscope(4))
    with pytest.raises(NotChainableError):
        hierarchical_factorize(np.zeros(kaleidoscope(4).shape), kaleidoscope(4))
    with pytest.raises(ValueError):
        butterfly_factorize(np.zeros((5, 5)), square_dyadic(2))


def test_factors_match_patterns(rng):
    arch = monarch(12, 20, 3, 4)
    A = rng.standard_normal(arch.shape)
    res = butterfly_factorize(A, arch)
    assert [f.pattern for f in res.factors] == list(arch)


def test_bounds_hold_random(rng):
    for _ in range(30):
        arch = random_architecture(rng, max_depth=5, min_depth=2)
        A = rng.standard_normal(arch.shape)
        slack = 1e-8 * np.linalg.norm(A)
        L = len(arch)
        for sigma in (identity_permutation(L), reverse_permutation(L), random_permutation(L, rng)):
            res = butterfly_factorize(A, arch, sigma, with_bounds=True)
            assert res.abs_error <= res.bound_sum + slack
        res = butterfly_factorize(A, arch, with_bounds=True)
        assert res.abs_error ** 2 <= res.bound_pyth ** 2 + 1e-8 * np.sum(A ** 2)


def test_split_error_sandwich(rng):
    for _ in range(15):
        arch = random_architecture(rng, max_depth=5, min_depth=2)
        A = rng.standard_normal(arch.shape)
        errs = split_errors(A, arch)
        upper = butterfly_factorize(A, arch).abs_error
        assert max(errs) <= upper + 1e-10 * np.linalg.norm(A)


def test_split_error_of_member_is_zero(rng):
    arch = square_dyadic(4)
    A = random_member(arch, rng)
    for s in range(1, 4):
        assert split_error(A, arch, s) < 1e-10 * np.linalg.norm(A)
    with pytest.raises(ValueError):
        split_error(A, arch, 4)
    with pytest.raises(ValueError):
        split_error(A, arch, 0)


def test_split_errors_match_fsmf(rng):
    arch = square_dyadic(4)
    A = rng.standard_normal(arch.shape)
    errs = split_errors(A, arch)
    for s in range(1, 4):
        ref = fsmf_error_only(A, interval_pattern(arch, 0, s - 1), interval_pattern(arch, s, 3))
        assert math.isclose(errs[s - 1], ref, rel_tol=1e-12)
        assert errs[s - 1] == split_error(A, arch, s)


def test_trace_orthogonality(rng):
    # with identity order, each correction is orthogonal to every later product
    for _ in range(10):
        arch = random_architecture(rng, max_depth=5, min_depth=3)
        A = rng.standard_normal(arch.shape)
        res = butterfly_factorize(A, arch, "identity", trace=True)
        B0, _ = KroneckerSparseFactor.from_dense(A, product_pattern(arch))
        Bs = [B0] + res.trace
        scale = np.sum(A ** 2)
        for J in range(1, len(Bs)):
            delta = Bs[J - 1].values - Bs[J].values
            for p in range(J, len(Bs)):
                assert abs(np.vdot(delta, Bs[p].values)) <= 1e-8 * scale


def test_trace_projection_monotone(rng):
    for _ in range(10):
        arch = random_architecture(rng, max_depth=5, min_depth=3)
        A = rng.standard_normal(arch.shape)
        res = butterfly_factorize(A, arch, "identity", trace=True)
        ref = split_errors(A, arch)
        for B in res.trace:
            for s, e in enumerate(split_errors(B, arch), start=1):
                assert e <= ref[s - 1] + 1e-10 * np.linalg.norm(A)
        assert np.allclose(res.trace[-1].to_dense(), res.to_dense(), atol=1e-12 * np.linalg.norm(A))


def test_closedness_fixed_point(rng):
    for _ in range(10):
        arch = random_architecture(rng, max_depth=5, min_depth=2)
        A = rng.standard_normal(arch.shape)
        Ahat = butterfly_factorize(A, arch, "random", rng=rng).to_dense()
        again = butterfly_factorize(Ahat, arch, "random", rng=rng)
        assert again.abs_error < 1e-10 * max(np.linalg.norm(Ahat), 1e-300) + 1e-300


def test_zero_matrix():
    arch = square_dyadic(3)
    for algo in (butterfly_factorize, factorize_any):
        res = algo(np.zeros((8, 8)), arch, with_bounds=True)
        assert res.abs_error == 0.0
        assert res.relative_error == 0.0
        assert res.bound_sum == 0.0 and res.bound_pyth == 0.0
        assert all(np.all(f.values == 0) for f in res.factors)


def test_ortho_off_still_valid(rng):
    arch = square_dyadic(4)
    A = rng.standard_normal(arch.shape)
    on = butterfly_factorize(A, arch, orthonormalize=True)
    off = butterfly_factorize(A, arch, orthonormalize=False)
    assert not off.ortho and on.ortho
    assert off.abs_error < np.linalg.norm(A)


# ---------------------------------------------------------------------------
# redundant architectures

def test_redundant_low_rank(rng):
    A = rng.standard_normal((4, 6))
    res = factorize_any(A, [(1, 4, 5, 1), (1, 5, 6, 1)])
    assert _rel(res) < 1e-12
    assert [f.pattern.as_tuple() for f in res.factors] == [(1, 4, 5, 1), (1, 5, 6, 1)]


def test_non_redundant_passthrough(rng):
    arch = square_dyadic(4)
    A = rng.standard_normal(arch.shape)
    a = factorize_any(A, arch, "balanced")
    b = butterfly_factorize(A, arch, "balanced")
    for x, y in zip(a.factors, b.factors):
        assert np.array_equal(x.values, y.values)


def test_reduces_to_single_pattern(rng):
    arch = [(1, 2, 3, 1), (1, 3, 4, 1), (1, 4, 2, 1)]
    A = rng.standard_normal((2, 2))
    res = factorize_any(A, arch, (2, 1))
    assert np.allclose(res.to_dense(), A, rtol=0, atol=1e-12 * np.linalg.norm(A))
    arch = [(2, 2, 3, 1), (2, 3, 2, 1)]
    A = rng.standard_normal((4, 4))
    res = factorize_any(A, arch)
    mask = support_matrix(product_pattern(arch))
    assert np.allclose(res.to_dense(), A * mask, rtol=0, atol=1e-12 * np.linalg.norm(A))


def test_redundant_matches_reduced(rng):
    for _ in range(10):
        arch = random_redundant_architecture(rng)
        A = rng.standard_normal(arch.shape)
        L = len(arch)
        sigma = random_permutation(L, rng)
        res = factorize_any(A, arch, sigma)
        reduced, trace = remove_redundancy(arch)
        sub = butterfly_factorize(A, reduced, reduced_permutation(sigma, trace.groups(L)))
        assert abs(res.abs_error - sub.abs_error) <= 1e-10 * max(sub.abs_error, np.linalg.norm(A) * 1e-6)
        assert [f.pattern for f in res.factors] == list(arch)


def test_strict_rejects_redundant(rng):
    with pytest.raises(RedundantArchitectureError):
        butterfly_factorize(rng.standard_normal((4, 6)), [(1, 4, 5, 1), (1, 5, 6, 1)], strict=True)
    res = butterfly_factorize(rng.standard_normal((4, 6)), [(1, 4, 5, 1), (1, 5, 6, 1)])
    assert res.reduced_arch is not None and len(res.reduced_arch) == 1


def test_reduced_permutation_mapping():
    # groups (0,1),(2,2),(3,4): junctions 2 and 3 survive as 1 and 2
    assert reduced_permutation((4, 3, 1, 2), [(0, 1), (2, 2), (3, 4)]) == (2, 1)


# ---------------------------------------------------------------------------
# complementary low-rank check, constants, serialization

def test_clr_member_passes(rng):
    for _ in range(5):
        arch = random_architecture(rng, max_depth=5, min_depth=2)
        A = random_member(arch, rng)
        rep = clr_check(A, arch)
        assert rep.passed, rep.to_json()
        assert [lv.rank_limit for lv in rep.levels] == rank_vector(arch)


def test_clr_gaussian_fails(rng):
    arch = square_dyadic(4)
    rep = clr_check(rng.standard_normal((16, 16)), arch)
    assert rep.support_ok
    assert not rep.passed
    assert any(lv.max_tail_ratio > 1e-3 for lv in rep.levels)


def test_clr_support_violation(rng):
    arch = [(2, 2, 2, 1)]
    A = np.ones((4, 4))
    rep = clr_check(A, arch)
    assert not rep.support_ok and rep.outside_mass == 8.0


def test_clr_zero_matrix():
    assert clr_check(np.zeros((16, 16)), square_dyadic(4)).passed


def test_bound_constants():
    for L in range(1, 8):
        c, s = bound_constants(square_dyadic(L))
        assert c == max(L, 2) - 1 and math.isclose(s, math.sqrt(c))
    assert bound_constants(monarch(12, 20, 3, 4)) == (1, 1.0)
    assert bound_constants(low_rank(4, 5, 2)) == (1, 1.0)


def test_result_json_round_trip(rng):
    arch = square_dyadic(3)
    A = rng.standard_normal((8, 8))
    res = butterfly_factorize(A, arch, "balanced", with_bounds=True)
    obj = json.loads(res.dumps())
    assert set(obj) >= {"arch", "sigma", "ortho", "rel_error", "split_errors", "bounds", "factors"}
    assert set(obj["bounds"]) == {"sum", "pyth", "c_linear", "c_sqrt"}
    back = FactorizationResult.from_json(obj)
    assert back.sigma == res.sigma
    assert math.isclose(back.relative_error, res.relative_error)
    assert np.array_equal(back.to_dense(), res.to_dense())
    assert np.array_equal(dense_product(back.factors), dense_product(res.factors))
