"""Finite abelian groups as factor lists, plus F2 affine geometry and raw
multiplication tables for the nonabelian scans.

A group is Z/f1 x ... x Z/fk given by its factor tuple. Elements travel
either as coordinate tuples or as flat indices in numpy C order (first factor
most significant); both directions round-trip exactly. Characters are exact:
theta(x) = sum_i freq_i x_i / f_i mod 1 is represented over the common
denominator lcm(factors), so additivity can be asserted in integers.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "Group",
    "Element",
    "Character",
    "AffineSubspace",
    "GroupTable",
    "parse_group",
    "elem_add",
    "enumerate_affine_subspaces",
    "full_space",
    "largest_abelian_subgroup",
    "BudgetExceeded",
]


class BudgetExceeded(RuntimeError):
    """Raised when an exact enumeration would exceed its stated budget."""


@dataclass(frozen=True)
class Group:
    factors: tuple[int, ...]

    def __post_init__(self):
        if not self.factors or any(f < 2 for f in self.factors):
            raise ValueError(f"factors must all be >= 2, got {self.factors}")

    @property
    def order(self) -> int:
        return math.prod(self.factors)

    @property
    def exponent(self) -> int:
        return math.lcm(*self.factors)

    def descriptor(self) -> str:
        if all(f == 2 for f in self.factors):
            return f"F2^{len(self.factors)}"
        if len(self.factors) == 1:
            return f"Z{self.factors[0]}"
        return "x".join(f"Z{f}" for f in self.factors)

    # -- flat-index arithmetic, vectorized over numpy arrays ---------------

    def coords_to_index(self, coords) -> int:
        idx = 0
        for c, f in zip(coords, self.factors):
            idx = idx * f + (c % f)
        return idx

    def index_to_coords(self, idx):
        if np.isscalar(idx) or isinstance(idx, int):
            return tuple(int(c) for c in np.unravel_index(int(idx), self.factors))
        cs = np.unravel_index(np.asarray(idx), self.factors)
        return list(zip(*[c.tolist() for c in cs]))

    def add_indices(self, ia, ib):
        ca = np.unravel_index(np.asarray(ia), self.factors)
        cb = np.unravel_index(np.asarray(ib), self.factors)
        summed = tuple((a + b) % f for a, b, f in zip(ca, cb, self.factors))
        return np.ravel_multi_index(summed, self.factors)

    def neg_indices(self, ia):
        ca = np.unravel_index(np.asarray(ia), self.factors)
        return np.ravel_multi_index(tuple((-a) % f for a, f in zip(ca, self.factors)), self.factors)

    def sub_indices(self, ia, ib):
        return self.add_indices(ia, self.neg_indices(ib))

    def elements(self):
        return [self.index_to_coords(i) for i in range(self.order)]


_DESC_RE = re.compile(r"^F2\^(\d+)$|^Z(\d+)(?:xZ\d+)*$")


def parse_group(desc: str) -> Group:
    """Parse descriptors like "Z5", "F2^4", "Z2xZ3"."""
    desc = desc.strip()
    m = re.match(r"^F2\^(\d+)$", desc)
    if m:
        n = int(m.group(1))
        if n < 1:
            raise ValueError(f"bad descriptor {desc!r}")
        return Group((2,) * n)
    parts = desc.split("x")
    factors = []
    for p in parts:
        m = re.match(r"^Z(\d+)$", p)
        if not m:
            raise ValueError(f"bad group descriptor {desc!r}")
        factors.append(int(m.group(1)))
    return Group(tuple(factors))


@dataclass(frozen=True)
class Element:
    group: Group
    coords: tuple[int, ...]

    def __post_init__(self):
        if len(self.coords) != len(self.group.factors):
            raise ValueError("coordinate arity does not match the factor list")
        if any(not (0 <= c < f) for c, f in zip(self.coords, self.group.factors)):
            raise ValueError(f"coordinates {self.coords} out of range for {self.group.factors}")

    @property
    def index(self) -> int:
        idx = 0
        for c, f in zip(self.coords, self.group.factors):
            idx = idx * f + c
        return idx

    @classmethod
    def from_index(cls, group: Group, idx: int) -> "Element":
        return cls(group, group.index_to_coords(idx))


def elem_add(a: Element, b: Element) -> Element:
    if a.group != b.group:
        raise ValueError("elements from different groups")
    g = a.group
    return Element(g, tuple((x + y) % f for x, y, f in zip(a.coords, b.coords, g.factors)))


@dataclass(frozen=True)
class Character:
    """theta(x) = sum_i freq_i * x_i / f_i mod 1, exact over lcm(factors)."""

    group: Group
    freqs: tuple[int, ...]

    def __post_init__(self):
        if len(self.freqs) != len(self.group.factors):
            raise ValueError("frequency arity does not match the factor list")

    @property
    def denominator(self) -> int:
        return self.group.exponent

    def numerator(self, coords) -> int:
        # theta(x) = numerator(x) / denominator, already reduced mod 1
        L = self.denominator
        total = 0
        for r, c, f in zip(self.freqs, coords, self.group.factors):
            total += r * c * (L // f)
        return total % L

    def value(self, coords) -> Fraction:
        return Fraction(self.numerator(coords), self.denominator)

    def dist_to_int(self, coords) -> Fraction:
        v = self.numerator(coords)
        L = self.denominator
        return Fraction(min(v, L - v), L)

    def numerators_all(self) -> np.ndarray:
        """numerator(x) for every flat index x, vectorized."""
        g = self.group
        L = self.denominator
        idx = np.arange(g.order)
        cs = np.unravel_index(idx, g.factors)
        total = np.zeros(g.order, dtype=np.int64)
        for r, c, f in zip(self.freqs, cs, g.factors):
            total += r * c.astype(np.int64) * (L // f)
        return total % L


# ---------------------------------------------------------------------------
# F2 affine subspaces (bitmask vectors)


def _rref(vectors: tuple[int, ...], n: int):
    """Row-reduce bitmask vectors over F2. Returns (rows, pivots), rows in
    decreasing pivot-bit order with zeros above and below each pivot."""
    rows = [v for v in vectors if v]
    basis: list[int] = []
    pivots: list[int] = []
    for bit in reversed(range(n)):
        idx = next((i for i, r in enumerate(rows) if (r >> bit) & 1), None)
        if idx is None:
            continue
        cand = rows.pop(idx)
        rows = [r ^ cand if (r >> bit) & 1 else r for r in rows]
        rows = [r for r in rows if r]
        basis = [b ^ cand if (b >> bit) & 1 else b for b in basis]
        basis.append(cand)
        pivots.append(bit)
    return tuple(basis), tuple(pivots)


@dataclass(frozen=True)
class AffineSubspace:
    """shift + span(basis) inside F2^n; basis vectors are n-bit masks."""

    n: int
    basis: tuple[int, ...]
    shift: int = 0

    def __post_init__(self):
        reduced, _ = _rref(self.basis, self.n)
        if len(reduced) != len(self.basis):
            raise ValueError("basis vectors are not linearly independent")
        if not (0 <= self.shift < (1 << self.n)):
            raise ValueError("shift out of range")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def codim(self) -> int:
        return self.n - self.dim

    @property
    def size(self) -> int:
        return 1 << self.dim

    def members(self) -> list[int]:
        out = [self.shift]
        for v in self.basis:
            out += [x ^ v for x in out]
        return sorted(out)

    def contains(self, x: int) -> bool:
        y = x ^ self.shift
        for b, p in zip(*_rref(self.basis, self.n)):
            if (y >> p) & 1:
                y ^= b
        return y == 0

    def canonical(self) -> tuple:
        rows, pivots = _rref(self.basis, self.n)
        s = self.shift
        for b, p in zip(rows, pivots):
            if (s >> p) & 1:
                s ^= b
        return (tuple(sorted(rows)), s)

    def same_set(self, other: "AffineSubspace") -> bool:
        return self.n == other.n and self.canonical() == other.canonical()


def full_space(n: int) -> AffineSubspace:
    return AffineSubspace(n, tuple(1 << i for i in range(n)), 0)


def _gaussian_binomial(m: int, k: int) -> int:
    num, den = 1, 1
    for i in range(k):
        num *= 2 ** (m - i) - 1
        den *= 2 ** (k - i) - 1
    return num // den


def _rref_matrices(m: int, c: int):
    """All c x m RREF matrices over F2, rows as m-bit masks (bit j = column j).

    Standard bijection with c-dimensional subspaces of F2^m.
    """
    import itertools as it

    if c == 0:
        yield ()
        return
    for pivots in it.combinations(range(m), c):
        pivset = set(pivots)
        free_cols = [[j for j in range(m) if j > p and j not in pivset] for p in pivots]
        counts = [len(fc) for fc in free_cols]
        for bits in it.product(*[range(1 << cnt) for cnt in counts]):
            rows = []
            for i, p in enumerate(pivots):
                row = 1 << p
                for b, j in enumerate(free_cols[i]):
                    if (bits[i] >> b) & 1:
                        row |= 1 << j
                rows.append(row)
            yield tuple(rows)


def enumerate_affine_subspaces(ambient: AffineSubspace, max_codim: int,
                               budget: int = 1_000_000):
    """Every affine subspace of `ambient` with relative codimension <= max_codim,
    exactly once, ordered by codimension then enumeration order.

    Exact only for max_codim <= 2; the subspace count explodes beyond that.
    Raises BudgetExceeded with the count estimate when the enumeration would
    be larger than `budget`.
    """
    if max_codim > 2:
        raise ValueError(f"exact enumeration supports codimension <= 2, got {max_codim}")
    m = ambient.dim
    est = sum(_gaussian_binomial(m, c) * 2**c for c in range(min(max_codim, m) + 1))
    if est > budget:
        raise BudgetExceeded(f"about {est} subspaces exceed the budget of {budget}")
    for c in range(min(max_codim, m) + 1):
        for phi in _rref_matrices(m, c):
            # the pivot of each row is its lowest set bit by construction
            pivots = [(row & -row).bit_length() - 1 for row in phi]
            pivset = set(pivots)
            free = [j for j in range(m) if j not in pivset]
            # kernel basis in coefficient space: one vector per free column
            kernel = []
            for j in free:
                v = 1 << j
                for i, row in enumerate(phi):
                    if (row >> j) & 1:
                        v |= 1 << pivots[i]
                kernel.append(v)
            for t in range(1 << c):
                x0 = 0
                for i in range(c):
                    if (t >> i) & 1:
                        x0 |= 1 << pivots[i]
                # map coefficient space through the ambient basis
                def tomain(coef: int) -> int:
                    out = 0
                    for j in range(m):
                        if (coef >> j) & 1:
                            out ^= ambient.basis[j]
                    return out

                yield AffineSubspace(
                    ambient.n,
                    tuple(tomain(v) for v in kernel),
                    ambient.shift ^ tomain(x0),
                )


# ---------------------------------------------------------------------------
# raw multiplication tables


@dataclass
class GroupTable:
    """A finite group given by its full multiplication table.

    mul[a][b] is the product. Validated on construction: a two-sided
    identity, inverses, and (for order <= 64) full associativity.
    """

    mul: np.ndarray
    identity: int = field(init=False)
    inv: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mul = np.asarray(self.mul, dtype=np.int64)
        n = self.order
        if self.mul.shape != (n, n) or self.mul.min() < 0 or self.mul.max() >= n:
            raise ValueError("multiplication table entries out of range")
        ids = [e for e in range(n)
               if np.array_equal(self.mul[e], np.arange(n)) and np.array_equal(self.mul[:, e], np.arange(n))]
        if len(ids) != 1:
            raise ValueError("table has no two-sided identity")
        self.identity = ids[0]
        inv = np.full(n, -1, dtype=np.int64)
        for a in range(n):
            hits = np.nonzero(self.mul[a] == self.identity)[0]
            if len(hits) != 1 or self.mul[hits[0], a] != self.identity:
                raise ValueError(f"element {a} has no two-sided inverse")
            inv[a] = hits[0]
        self.inv = inv
        if n <= 64:
            lhs = self.mul[self.mul, :]            # (a*b)*c over [a,b,c]
            rhs = self.mul[:, self.mul]            # a*(b*c) over [a,b,c]
            if not np.array_equal(lhs, rhs):
                bad = np.argwhere(lhs != rhs)[0]
                raise ValueError(f"associativity fails at {tuple(int(v) for v in bad)}")

    @property
    def order(self) -> int:
        return self.mul.shape[0]

    def is_abelian(self) -> bool:
        return np.array_equal(self.mul, self.mul.T)

    @classmethod
    def cyclic(cls, n: int) -> "GroupTable":
        a = np.arange(n)
        return cls((a[:, None] + a[None, :]) % n)

    @classmethod
    def from_group(cls, g: Group) -> "GroupTable":
        idx = np.arange(g.order)
        return cls(np.asarray(g.add_indices(idx[:, None], idx[None, :])))

    @classmethod
    def from_file(cls, path) -> "GroupTable":
        with open(path) as fh:
            tokens = fh.read().split()
        if not tokens or tokens[0] != "order":
            raise ValueError("expected header line 'order k'")
        n = int(tokens[1])
        body = [int(t) for t in tokens[2:]]
        if len(body) != n * n:
            raise ValueError(f"expected {n * n} entries after the header, got {len(body)}")
        return cls(np.array(body, dtype=np.int64).reshape(n, n))

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"order {self.order}\n")
            for row in self.mul:
                fh.write(" ".join(str(int(v)) for v in row) + "\n")


def _closure(t: GroupTable, gens: frozenset[int]) -> frozenset[int]:
    out = {t.identity} | set(gens)
    frontier = list(out)
    while frontier:
        a = frontier.pop()
        for b in list(out):
            for c in (int(t.mul[a, b]), int(t.mul[b, a]), int(t.inv[a])):
                if c not in out:
                    out.add(c)
                    frontier.append(c)
    return frozenset(out)


def largest_abelian_subgroup(t: GroupTable) -> frozenset[int]:
    """Largest abelian subgroup of a table group, order <= 24 enforced.

    Enumerates the full subgroup lattice by closure of generator sets, then
    filters for commutativity. Ties break toward the lexicographically
    smallest sorted element tuple, so the answer is deterministic.
    """
    if t.order > 24:
        raise ValueError(f"subgroup enumeration supports order <= 24, got {t.order}")
    seen = {_closure(t, frozenset())}
    queue = list(seen)
    while queue:
        h = queue.pop()
        for g in range(t.order):
            if g in h:
                continue
            h2 = _closure(t, h | {g})
            if h2 not in seen:
                seen.add(h2)
                queue.append(h2)
    abelian = []
    for h in seen:
        hl = sorted(h)
        if all(t.mul[a, b] == t.mul[b, a] for i, a in enumerate(hl) for b in hl[i + 1:]):
            abelian.append(h)
    return max(abelian, key=lambda h: (len(h), [-x for x in sorted(h)]))
