"""Kronecker-sparse patterns and butterfly architectures.

A pattern ``(a, b, c, d)`` stands for the binary support
``I_a ⊗ 1_{b×c} ⊗ I_d`` of size ``abd × acd``.  An architecture is an
ordered sequence of patterns whose consecutive sizes can be multiplied.
Everything here is pure integer arithmetic on these 4-tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

_INT64_MAX = 2**63 - 1


class ArchitectureError(ValueError):
    """Invalid pattern or architecture (bad component, size mismatch, ...)."""


class NotChainableError(ArchitectureError):
    """Raised when an operation needs a chainable pair or architecture."""


class RedundantArchitectureError(ArchitectureError):
    """Raised when an operation needs a non-redundant pair or architecture."""


@dataclass(frozen=True, order=True)
class Pattern:
    """Support pattern ``(a, b, c, d)`` of a Kronecker-sparse factor."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in "abcd":
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ArchitectureError(f"pattern component {name}={value!r} is not an integer")
            value = int(value)
            if value < 1:
                raise ArchitectureError(f"pattern component {name}={value} must be >= 1")
            object.__setattr__(self, name, value)
        if self.a * self.b * self.c * self.d > _INT64_MAX:
            raise ArchitectureError(f"pattern {self.as_tuple()} overflows 64-bit parameter count")

    @classmethod
    def coerce(cls, p) -> "Pattern":
        if isinstance(p, Pattern):
            return p
        p = tuple(p)
        if len(p) != 4:
            raise ArchitectureError(f"a pattern has 4 components, got {len(p)}")
        return cls(*p)

    @property
    def rows(self) -> int:
        return self.a * self.b * self.d

    @property
    def cols(self) -> int:
        return self.a * self.c * self.d

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def nnz(self) -> int:
        """Number of entries in the support, ``abcd``."""
        return self.a * self.b * self.c * self.d

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def __iter__(self):
        return iter(self.as_tuple())

    def __repr__(self):
        return f"Pattern{self.as_tuple()}"


@dataclass(frozen=True)
class Architecture:
    """Ordered sequence of patterns with compatible consecutive sizes."""

    patterns: tuple[Pattern, ...]

    def __init__(self, patterns: Iterable):
        pats = tuple(Pattern.coerce(p) for p in patterns)
        if not pats:
            raise ArchitectureError("an architecture needs at least one pattern")
        for i in range(len(pats) - 1):
            if pats[i].cols != pats[i + 1].rows:
                raise ArchitectureError(
                    f"patterns {i} and {i + 1} violate size-compatibility: "
                    f"a c d = {pats[i].cols} != a b d = {pats[i + 1].rows}"
                )
        object.__setattr__(self, "patterns", pats)

    def __len__(self):
        return len(self.patterns)

    def __iter__(self) -> Iterator[Pattern]:
        return iter(self.patterns)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Architecture(self.patterns[item])
        return self.patterns[item]

    def __repr__(self):
        return "Architecture(" + ", ".join(str(p.as_tuple()) for p in self.patterns) + ")"

    @property
    def rows(self) -> int:
        return self.patterns[0].rows

    @property
    def cols(self) -> int:
        return self.patterns[-1].cols

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def nnz(self) -> int:
        """Total parameter count, the sum of the pattern supports."""
        return sum(p.nnz for p in self.patterns)

    def as_lists(self) -> list[list[int]]:
        return [list(p.as_tuple()) for p in self.patterns]


# ---------------------------------------------------------------------------
# chainability algebra

def _chain_failure(p1: Pattern, p2: Pattern) -> str | None:
    """Name of the first violated chainability condition, or None."""
    if p1.cols != p2.rows:
        return "size-compatibility (a1 c1 d1 = a2 b2 d2)"
    if p2.a % p1.a:
        return "a1 | a2"
    if p1.d % p2.d:
        return "d2 | d1"
    if (p1.a * p1.c) % p2.a:
        return "integrality of r = a1 c1 / a2"
    if (p1.a * p1.c) // p2.a * p1.d != p2.b * p2.d:
        return "a1 c1 / a2 = b2 d2 / d1"
    return None


def chain_rank(p1, p2) -> int | None:
    """Chain rank ``r = a1 c1 / a2`` of a pair, or None if not chainable."""
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    if _chain_failure(p1, p2) is not None:
        return None
    return p1.a * p1.c // p2.a


def require_chain_rank(p1, p2) -> int:
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    failure = _chain_failure(p1, p2)
    if failure is not None:
        raise NotChainableError(f"{p1} and {p2} are not chainable: {failure} fails")
    return p1.a * p1.c // p2.a


def star(p1, p2) -> Pattern:
    """Pattern of the product of a ``p1``-factor by a ``p2``-factor."""
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    require_chain_rank(p1, p2)
    return Pattern(p1.a, p1.b * p1.d // p2.d, p2.a * p2.c // p1.a, p2.d)


def is_chainable(arch) -> bool:
    arch = as_architecture(arch)
    return all(chain_rank(p, q) is not None for p, q in _junctions(arch))


def _junctions(arch: Architecture):
    return zip(arch.patterns[:-1], arch.patterns[1:])


def rank_vector(arch) -> list[int]:
    """Chain ranks of the ``L - 1`` junctions of a chainable architecture."""
    arch = as_architecture(arch)
    ranks = []
    for i, (p, q) in enumerate(_junctions(arch)):
        failure = _chain_failure(p, q)
        if failure is not None:
            raise NotChainableError(f"junction {i} ({p}, {q}) is not chainable: {failure} fails")
        ranks.append(p.a * p.c // q.a)
    return ranks


def product_pattern(arch) -> Pattern:
    """Pattern of ``X_1 ... X_L``, closed form ``(a1, b1 d1/dL, aL cL/a1, dL)``."""
    arch = as_architecture(arch)
    rank_vector(arch)
    first, last = arch[0], arch[-1]
    if len(arch) == 1:
        return first
    return Pattern(first.a, first.b * first.d // last.d, last.a * last.c // first.a, last.d)


def interval_pattern(arch, q: int, t: int) -> Pattern:
    """Pattern of ``pi_q * ... * pi_t`` for 0-based inclusive bounds."""
    return product_pattern(Architecture(as_architecture(arch).patterns[q:t + 1]))


def split_architecture(arch, s: int) -> Architecture:
    """Two-factor architecture obtained by merging factors ``1..s`` and ``s+1..L``.

    ``s`` is a 1-based junction index in ``[1, L-1]``.
    """
    arch = as_architecture(arch)
    if not 1 <= s <= len(arch) - 1:
        raise ArchitectureError(f"split index {s} outside [1, {len(arch) - 1}]")
    return Architecture([interval_pattern(arch, 0, s - 1), interval_pattern(arch, s, len(arch) - 1)])


# ---------------------------------------------------------------------------
# redundancy

def is_redundant_pair(p1, p2) -> bool:
    p1, p2 = Pattern.coerce(p1), Pattern.coerce(p2)
    r = require_chain_rank(p1, p2)
    return r >= min(p1.b, p2.c)


def is_redundant(arch) -> bool:
    arch = as_architecture(arch)
    rank_vector(arch)
    return any(is_redundant_pair(p, q) for p, q in _junctions(arch))


@dataclass(frozen=True)
class MergeRecord:
    """One step of redundancy removal: patterns at ``index``, ``index+1`` were merged."""

    index: int
    left: Pattern
    right: Pattern

    @property
    def merged(self) -> Pattern:
        return star(self.left, self.right)


@dataclass
class MergeTrace:
    records: list[MergeRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def replay(self, arch) -> Architecture:
        """Apply the recorded merges, in order, to ``arch``."""
        pats = list(as_architecture(arch).patterns)
        for rec in self.records:
            if (pats[rec.index], pats[rec.index + 1]) != (rec.left, rec.right):
                raise ArchitectureError(f"merge record at index {rec.index} does not match the architecture")
            pats[rec.index:rec.index + 2] = [rec.merged]
        return Architecture(pats)

    def groups(self, depth: int) -> list[tuple[int, int]]:
        """Original factor ranges ``(first, last)``, 0-based, behind each reduced factor."""
        groups = [(i, i) for i in range(depth)]
        for rec in self.records:
            lo, _ = groups[rec.index]
            _, hi = groups[rec.index + 1]
            groups[rec.index:rec.index + 2] = [(lo, hi)]
        return groups


def remove_redundancy(arch) -> tuple[Architecture, MergeTrace]:
    """Merge redundant adjacent pairs until none is left (leftmost pair first)."""
    arch = as_architecture(arch)
    rank_vector(arch)
    pats = list(arch.patterns)
    trace = MergeTrace()
    while True:
        for i in range(len(pats) - 1):
            if is_redundant_pair(pats[i], pats[i + 1]):
                trace.records.append(MergeRecord(i, pats[i], pats[i + 1]))
                pats[i:i + 2] = [star(pats[i], pats[i + 1])]
                break
        else:
            return Architecture(pats), trace


# ---------------------------------------------------------------------------
# construction from a target size

def size_nonredundant(p: Sequence[int], q: Sequence[int], r: Sequence[int]) -> bool:
    """Non-redundancy test on the integers ``(p, q, r)`` of :func:`architecture_from_size`."""
    L = len(p)
    if L == 1:
        return True
    rr = [1, *r, 1]
    if not (rr[1] < q[0] and rr[L - 1] < p[L - 1]):
        return False
    for ell in range(2, L):
        # 1/p_l < r_l / r_{l-1} < q_l, kept in integers
        if not (rr[ell - 1] < p[ell - 1] * rr[ell] and rr[ell] < q[ell - 1] * rr[ell - 1]):
            return False
    return True


def architecture_from_size(p: Sequence[int], q: Sequence[int], r: Sequence[int] = ()) -> tuple[Architecture, bool]:
    """Build the chainable architecture attached to factorizations of the size.

    ``q`` factorizes the row count, ``p`` the column count and ``r`` holds the
    ``L - 1`` chain ranks.  Returns the architecture and its non-redundancy flag.
    """
    p, q, r = [int(x) for x in p], [int(x) for x in q], [int(x) for x in r]
    L = len(p)
    if L < 1 or len(q) != L or len(r) != L - 1:
        raise ArchitectureError(f"need len(p) = len(q) = L >= 1 and len(r) = L - 1, got {len(p)}, {len(q)}, {len(r)}")
    if min(p + q + r, default=1) < 1:
        raise ArchitectureError("all entries of p, q, r must be >= 1")
    rr = [1, *r, 1]
    pats = []
    for ell in range(L):
        a = math.prod(p[:ell])
        d = math.prod(q[ell + 1:])
        pats.append(Pattern(a, q[ell] * rr[ell], p[ell] * rr[ell + 1], d))
    return Architecture(pats), size_nonredundant(p, q, r)


def ordered_factorizations(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All ordered tuples of ``parts`` positive integers with product ``n``."""
    if parts == 1:
        yield (n,)
        return
    for f in range(1, n + 1):
        if n % f == 0:
            for rest in ordered_factorizations(n // f, parts - 1):
                yield (f, *rest)


def _rank_sequences(p, q, max_rank=None) -> Iterator[tuple[int, ...]]:
    L = len(p)

    def extend(prefix):
        ell = len(prefix) + 1  # 1-based index of the next rank
        if ell == L:
            if prefix[-1] < p[L - 1] if prefix else True:
                yield tuple(prefix)
            return
        prev = prefix[-1] if prefix else 1
        lo = prev // p[ell - 1] + 1 if prefix else 1
        hi = q[ell - 1] * prev - 1
        if max_rank is not None:
            hi = min(hi, max_rank)
        for r in range(lo, hi + 1):
            yield from extend([*prefix, r])

    yield from extend([])


def _square_candidates(m, n, L, ranks):
    if m != n:
        return
    rr = [1, *ranks, 1]
    for q in ordered_factorizations(m, L):
        # intermediate width P_l r_l Q_{>l} = n fixes the column factors
        prefix = []
        for ell in range(1, L):
            tail = math.prod(q[ell:])
            if n % (rr[ell] * tail):
                break
            prefix.append(n // (rr[ell] * tail))
        else:
            prefix.append(n)
            prods = [1, *prefix]
            if all(prods[i + 1] % prods[i] == 0 for i in range(L)):
                yield tuple(prods[i + 1] // prods[i] for i in range(L)), q


def _block_area(arch: Architecture) -> int:
    return max(pat.b * pat.c for pat in arch)


def enumerate_architectures(m: int, n: int, L: int, ranks: Sequence[int] | None = None,
                            square: bool = False, max_rank: int | None = None) -> list[dict]:
    """List the non-redundant dense-capable architectures of size ``m × n`` and depth ``L``.

    With ``ranks`` given only that rank vector is tried.  ``square`` keeps only
    architectures whose factors are all ``n × n``.  Entries are dicts with keys
    ``arch, p, q, r, nnz``, sorted by parameter count, then by largest dense
    sub-block, then lexicographically.
    """
    found = []
    if square and ranks is not None:
        candidates = ((p, q, tuple(ranks)) for p, q in _square_candidates(m, n, L, list(ranks)))
    else:
        def gen():
            for q in ordered_factorizations(m, L):
                for p in ordered_factorizations(n, L):
                    seqs = [tuple(ranks)] if ranks is not None else _rank_sequences(p, q, max_rank)
                    for r in seqs:
                        yield p, q, r
        candidates = gen()
    for p, q, r in candidates:
        if len(r) != L - 1 or not size_nonredundant(p, q, r):
            continue
        arch, _ = architecture_from_size(p, q, r)
        if square and any(pat.rows != n or pat.cols != n for pat in arch):
            continue
        found.append({"arch": arch, "p": list(p), "q": list(q), "r": list(r), "nnz": arch.nnz})
    found.sort(key=lambda e: (e["nnz"], _block_area(e["arch"]), e["p"], e["q"], e["r"]))
    return found


# ---------------------------------------------------------------------------
# named architectures

def square_dyadic(L: int) -> Architecture:
    return Architecture([(2 ** (ell - 1), 2, 2, 2 ** (L - ell)) for ell in range(1, L + 1)])


def monarch(m: int, n: int, p: int, q: int) -> Architecture:
    if m % p or n % q:
        raise ArchitectureError(f"monarch needs p | m and q | n, got m={m}, p={p}, n={n}, q={q}")
    return Architecture([(1, p, q, m // p), (q, m // p, n // q, 1)])


def low_rank(m: int, n: int, r: int) -> Architecture:
    return Architecture([(1, m, r, 1), (1, r, n, 1)])


def kaleidoscope(L: int) -> Architecture:
    """Kaleidoscope architecture of even depth ``L`` (not chainable for L >= 4)."""
    if L % 2:
        raise ArchitectureError("kaleidoscope depth must be even")
    h = L // 2
    pats = []
    for ell in range(1, L + 1):
        if ell <= h:
            pats.append((2 ** (ell - 1), 2, 2, 2 ** (h - ell)))
        else:
            pats.append((2 ** (L - ell), 2, 2, 2 ** (ell - h - 1)))
    return Architecture(pats)


def as_architecture(arch) -> Architecture:
    if isinstance(arch, Architecture):
        return arch
    if isinstance(arch, Pattern):
        return Architecture([arch])
    return Architecture(arch)


# ---------------------------------------------------------------------------
# JSON schema {"patterns": [[a, b, c, d], ...]}

def architecture_to_json(arch) -> dict:
    return {"patterns": as_architecture(arch).as_lists()}


def architecture_from_json(obj) -> Architecture:
    if not isinstance(obj, dict) or "patterns" not in obj:
        raise ArchitectureError("architecture JSON must be an object with a 'patterns' list")
    raw = obj["patterns"]
    if not isinstance(raw, list) or not raw:
        raise ArchitectureError("'patterns' must be a non-empty list")
    pats = []
    for i, p in enumerate(raw):
        if not isinstance(p, (list, tuple)) or len(p) != 4:
            raise ArchitectureError(f"pattern {i}: expected [a, b, c, d]")
        try:
            pats.append(Pattern(*p))
        except ArchitectureError as exc:
            raise ArchitectureError(f"pattern {i}: {exc}") from None
    return Architecture(pats)


def all_patterns(max_component: int) -> Iterator[Pattern]:
    for t in itertools.product(range(1, max_component + 1), repeat=4):
        yield Pattern(*t)
