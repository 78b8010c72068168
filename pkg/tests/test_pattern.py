import itertools

import numpy as np
import pytest

from bfact.pattern import (Architecture, ArchitectureError, NotChainableError, Pattern,
                           architecture_from_json, architecture_from_size, architecture_to_json,
                           chain_rank, enumerate_architectures, interval_pattern, is_chainable,
                           is_redundant, is_redundant_pair, kaleidoscope, low_rank, monarch,
                           product_pattern, rank_vector, remove_redundancy, split_architecture,
                           square_dyadic, star)

from helpers import random_architecture
from oracles import chain_rank_from_definition, patterns_up_to, star_from_definition


def test_pattern_sizes():
    p = Pattern(2, 3, 4, 5)
    assert p.shape == (30, 40)
    assert p.nnz == 120


@pytest.mark.parametrize("bad", [(0, 1, 1, 1), (1, -2, 1, 1), (1, 1.5, 1, 1), (1, 2, 3)])
def test_pattern_rejects_bad_components(bad):
    with pytest.raises(ArchitectureError):
        Pattern.coerce(bad)


def test_pattern_overflow_is_reported():
    with pytest.raises(ArchitectureError, match="overflow"):
        Pattern(2**20, 2**20, 2**20, 2**20)


def test_architecture_size_mismatch_names_indices():
    with pytest.raises(ArchitectureError, match="patterns 1 and 2"):
        Architecture([(1, 2, 2, 1), (1, 2, 3, 1), (1, 2, 2, 1)])


def test_chain_rank_examples():
    assert chain_rank((1, 7, 3, 1), (1, 3, 5, 1)) == 3
    assert chain_rank((1, 2, 2, 4), (2, 2, 2, 2)) == 1
    assert chain_rank((2, 2, 2, 1), (1, 2, 2, 2)) is None


def test_chain_rank_matches_definition_exhaustively():
    pats = patterns_up_to(3)
    for p1, p2 in itertools.product(pats, pats):
        assert chain_rank(p1, p2) == chain_rank_from_definition(p1, p2)


def test_chainable_pair_count_components_3():
    # frozen from the brute-force oracle
    pats = patterns_up_to(3)
    pairs = [(p, q) for p in pats for q in pats if chain_rank(p, q) is not None]
    assert len(pairs) == 387
    assert sum(is_redundant_pair(p, q) for p, q in pairs) == 278


def test_chain_rank_bounded_by_inner_components():
    pats = patterns_up_to(3)
    for p1, p2 in itertools.product(pats, pats):
        r = chain_rank(p1, p2)
        if r is not None:
            assert r <= min(p2[1], p1[2])


def test_star_examples():
    assert star((1, 2, 2, 4), (2, 2, 2, 2)).as_tuple() == (1, 4, 4, 2)
    assert star((1, 6, 2, 1), (1, 2, 9, 1)).as_tuple() == (1, 6, 9, 1)
    arch = square_dyadic(3)
    assert star(star(arch[0], arch[1]), arch[2]).as_tuple() == (1, 8, 8, 1)


def test_star_rejects_non_chainable_with_condition_name():
    with pytest.raises(NotChainableError, match="a1 \\| a2"):
        star((2, 2, 2, 1), (1, 2, 2, 2))


def test_star_matches_definition():
    pats = patterns_up_to(3)
    for p1, p2 in itertools.product(pats, pats):
        if chain_rank(p1, p2) is not None:
            assert star(p1, p2).as_tuple() == star_from_definition(p1, p2)


def test_star_associative_components_4():
    pats = [Pattern(*t) for t in patterns_up_to(4)]
    by_rows = {}
    for p in pats:
        by_rows.setdefault(p.rows, []).append(p)
    checked = 0
    for p1 in pats:
        for p2 in by_rows.get(p1.cols, []):
            r12 = chain_rank(p1, p2)
            if r12 is None:
                continue
            for p3 in by_rows.get(p2.cols, []):
                r23 = chain_rank(p2, p3)
                if r23 is None:
                    continue
                left, right = star(p1, p2), star(p2, p3)
                assert chain_rank(left, p3) == r23
                assert chain_rank(p1, right) == r12
                assert star(left, p3) == star(p1, right)
                checked += 1
    assert checked > 1000


def test_product_pattern_examples():
    assert product_pattern(square_dyadic(4)).as_tuple() == (1, 16, 16, 1)
    assert product_pattern(monarch(12, 20, 3, 4)).as_tuple() == (1, 12, 20, 1)
    assert product_pattern([(2, 3, 4, 5)]).as_tuple() == (2, 3, 4, 5)


def test_product_pattern_is_fold_of_star(rng):
    for _ in range(50):
        arch = random_architecture(rng, max_depth=6, allow_redundant=True)
        acc = arch[0]
        for p in arch.patterns[1:]:
            acc = star(acc, p)
        assert product_pattern(arch) == acc


def test_rank_vector_and_chainability():
    assert is_chainable(square_dyadic(3))
    assert rank_vector(square_dyadic(3)) == [1, 1]
    assert not is_chainable(kaleidoscope(4))
    with pytest.raises(NotChainableError, match="junction 2"):
        rank_vector(kaleidoscope(4))
    assert is_chainable([(2, 3, 4, 5)])
    assert rank_vector([(2, 3, 4, 5)]) == []


def test_redundancy_examples():
    assert is_redundant_pair((1, 4, 5, 1), (1, 5, 6, 1))
    assert not is_redundant_pair((1, 5, 3, 1), (1, 3, 6, 1))
    for L in range(2, 7):
        assert not is_redundant(square_dyadic(L))
    assert not is_redundant([(1, 2, 2, 1)])


def test_remove_redundancy_low_rank():
    arch, trace = remove_redundancy([(1, 4, 5, 1), (1, 5, 6, 1)])
    assert arch.as_lists() == [[1, 4, 6, 1]]
    assert len(trace) == 1
    assert trace.records[0].index == 0


def test_remove_redundancy_noop_on_square_dyadic():
    arch, trace = remove_redundancy(square_dyadic(5))
    assert arch == square_dyadic(5)
    assert len(trace) == 0


def test_remove_redundancy_cascade():
    # (1,2,3,1)(1,3,4,1): r=3 >= 2, merge to (1,2,4,1); then with (1,4,2,1): r=4 >= 2
    arch, trace = remove_redundancy([(1, 2, 3, 1), (1, 3, 4, 1), (1, 4, 2, 1)])
    assert arch.as_lists() == [[1, 2, 2, 1]]
    assert [r.index for r in trace] == [0, 0]
    assert trace.groups(3) == [(0, 2)]


def test_remove_redundancy_properties(rng):
    for _ in range(60):
        arch = random_architecture(rng, max_depth=5, allow_redundant=True)
        reduced, trace = remove_redundancy(arch)
        assert not is_redundant(reduced)
        assert trace.replay(arch) == reduced
        assert reduced.nnz <= arch.nnz
        assert (reduced.nnz < arch.nnz) == is_redundant(arch)
        assert product_pattern(reduced) == product_pattern(arch)
        groups = trace.groups(len(arch))
        assert len(groups) == len(reduced)
        for (lo, hi), p in zip(groups, reduced):
            assert interval_pattern(arch, lo, hi) == p


def test_architecture_from_size_examples():
    arch, ok = architecture_from_size([2, 2, 2], [2, 2, 2], [1, 1])
    assert arch == square_dyadic(3)
    assert ok
    arch, ok = architecture_from_size([5], [3], [])
    assert arch.as_lists() == [[1, 3, 5, 1]]
    _, ok = architecture_from_size([2, 2], [2, 2], [2])
    assert not ok


def test_architecture_from_size_flag_agrees(rng):
    for _ in range(200):
        L = int(rng.integers(1, 5))
        p = rng.integers(1, 4, L).tolist()
        q = rng.integers(1, 4, L).tolist()
        r = rng.integers(1, 4, L - 1).tolist()
        arch, ok = architecture_from_size(p, q, r)
        assert is_chainable(arch)
        assert arch.shape == (int(np.prod(q)), int(np.prod(p)))
        assert ok == (not is_redundant(arch))


def test_enumerate_contains_square_dyadic():
    found = enumerate_architectures(16, 16, 4)
    assert any(e["arch"] == square_dyadic(4) for e in found)
    nnz = [e["nnz"] for e in found]
    assert nnz == sorted(nnz)
    for e in found:
        assert not is_redundant(e["arch"])
        assert product_pattern(e["arch"]).as_tuple() == (1, 16, 16, 1)


def test_square_preset_filter():
    found = enumerate_architectures(512, 512, 4, ranks=(4, 4, 4), square=True)
    assert found
    for e in found:
        assert all(p.shape == (512, 512) for p in e["arch"])
        assert rank_vector(e["arch"]) == [4, 4, 4]
    slow = enumerate_architectures(64, 64, 3, ranks=(2, 2))
    fast = enumerate_architectures(64, 64, 3, ranks=(2, 2), square=True)
    expected = [e["arch"] for e in slow if all(p.shape == (64, 64) for p in e["arch"])]
    assert sorted(map(repr, expected)) == sorted(repr(e["arch"]) for e in fast)


def test_split_architecture():
    arch = square_dyadic(4)
    assert split_architecture(arch, 1).as_lists() == [[1, 2, 2, 8], [2, 8, 8, 1]]
    with pytest.raises(ArchitectureError):
        split_architecture(arch, 4)


def test_named_architectures():
    assert low_rank(5, 6, 2).as_lists() == [[1, 5, 2, 1], [1, 2, 6, 1]]
    assert square_dyadic(10).nnz == 10 * 2 ** 11


def test_json_round_trip_and_errors():
    arch = square_dyadic(3)
    assert architecture_from_json(architecture_to_json(arch)) == arch
    with pytest.raises(ArchitectureError, match="pattern 1"):
        architecture_from_json({"patterns": [[1, 2, 2, 1], [1, 0, 2, 1]]})
    with pytest.raises(ArchitectureError, match="pattern 0"):
        architecture_from_json({"patterns": [[1, 2, 2]]})
    with pytest.raises(ArchitectureError):
        architecture_from_json([[1, 2, 2, 1]])
