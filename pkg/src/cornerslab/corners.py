"""Corners, the averaged trilinear form, and corner-free constructions.

A corner in A x A ... in a set A of pairs over an abelian group G is a triple
(x, y), (x+d, y), (x, y+d) with d != 0. Counting is ordered over (x, y, d).
The controlling trilinear average is

    phi(f1, f2, f3) = E_{x,y,z} f1(x, y) f2(z - y, y) f3(x, z - x),

whose z-sum is a matrix product, so phi * |G|^3 is computed exactly in int64
for indicator inputs. For groups of exponent 2 the substitution z -> x+y+z
rewrites the same average as E[f1(x,y) f2(y+z, y) f3(x, x+z)]. Setting all
three arguments to 1_A gives the exact identity

    phi * |G|^3 = (ordered corner count with d != 0) + |A|,

the d = 0 layer contributing one triple per point of A.

Integer-grid corners ([N]^2 with no wraparound, both signs of d) are a
separate mode used by the progression-free lifts and the protocol compiler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .group import Group, GroupTable
from .setfun import GridFunction, SubsetInd

__all__ = [
    "CornerReport",
    "phi",
    "count_corners",
    "count_corners_grid",
    "behrend_apfree",
    "cornerfree_from_apfree",
    "embed_grid_in_cyclic",
    "find_bmz_corner",
    "roth_nonabelian_lift",
    "abelian_projection",
    "find_product_triple",
]


@dataclass(frozen=True)
class CornerReport:
    total: int
    includes_trivial: int
    witness: Optional[tuple[int, int, int]]  # flat indices (x, y, d)


def _sub_table(g: Group) -> np.ndarray:
    idx = np.arange(g.order)
    return np.asarray(g.sub_indices(idx[:, None], idx[None, :]))


def _phi_contraction(g: Group, f1: np.ndarray, f2: np.ndarray, f3: np.ndarray):
    """sum over x,y,z of f1(x,y) f2(z-y,y) f3(x,z-x) via one matmul."""
    n = g.order
    sub = _sub_table(g)  # sub[a, b] = index of a - b
    rows = np.arange(n)
    p = f3[rows[:, None], sub.T]          # p[x, z] = f3(x, z - x)
    q = f2[sub, rows[None, :]]            # q[z, y] = f2(z - y, y)
    return (f1 * (p @ q)).sum()


def phi(g: Group, f1: GridFunction, f2: GridFunction, f3: GridFunction) -> float:
    """The trilinear average E_{x,y,z} f1(x,y) f2(z-y,y) f3(x,z-x)."""
    n = g.order
    for f in (f1, f2, f3):
        if f.shape != (n, n):
            raise ValueError(f"arguments must be {n}x{n} grids")
    return float(_phi_contraction(g, f1.values, f2.values, f3.values)) / n**3


def phi_exact(g: Group, a1: SubsetInd, a2: SubsetInd, a3: SubsetInd) -> Fraction:
    """phi on indicator inputs, exact. Subsets live over |G|^2, row-major (x,y)."""
    n = g.order
    mats = []
    for a in (a1, a2, a3):
        if a.size != n * n:
            raise ValueError("indicator subsets must cover |G|^2 cells")
        mats.append(a.bits.reshape(n, n).astype(np.int64))
    total = int(_phi_contraction(g, *mats))
    return Fraction(total, n**3)


def count_corners(g: Group, a: SubsetInd) -> CornerReport:
    """Ordered corner count of A inside G x G, with the d = 0 layer reported
    separately. |G| <= 512 keeps the contraction exact in int64."""
    n = g.order
    if a.size != n * n:
        raise ValueError(f"subset covers {a.size} cells, expected {n * n}")
    if n > 512:
        raise ValueError("corner counting is capped at |G| <= 512")
    f = a.bits.reshape(n, n).astype(np.int64)
    triples = int(_phi_contraction(g, f, f, f))
    count = triples - a.cardinality
    witness = _first_corner_group(g, f) if count > 0 else None
    return CornerReport(total=count, includes_trivial=a.cardinality, witness=witness)


def _first_corner_group(g: Group, f: np.ndarray):
    n = g.order
    idx = np.arange(n)
    add = np.asarray(g.add_indices(idx[:, None], idx[None, :]))
    for x in range(n):
        if not f[x].any():
            continue
        # m1[y, d] = f(x + d, y), m2[y, d] = f(x, y + d)
        m1 = f[add[x], :].T
        m2 = f[x, add]
        w = (f[x][:, None] & m1.astype(bool) & m2.astype(bool))
        w[:, 0] = False  # d = 0 excluded; flat index 0 is the identity
        # identity has flat index 0 for any factor list
        ys, ds = np.nonzero(w)
        if len(ys):
            return (x, int(ys[0]), int(ds[0]))
    return None


def count_corners_grid(N: int, a: SubsetInd) -> CornerReport:
    """Integer-grid corners: (x,y), (x+d,y), (x,y+d) inside [N]^2, d != 0 of
    either sign, no wraparound."""
    if a.size != N * N:
        raise ValueError(f"subset covers {a.size} cells, expected {N * N}")
    f = a.bits.reshape(N, N)
    count = 0
    for d in range(-(N - 1), N):
        if d == 0:
            continue
        x0, x1 = max(0, -d), N - max(0, d)   # x and x + d both in range
        y0, y1 = x0, x1
        if x0 >= x1:
            continue
        block = f[x0:x1, y0:y1] & f[x0 + d:x1 + d, y0:y1] & f[x0:x1, y0 + d:y1 + d]
        count += int(block.sum())
    witness = None
    if count:
        witness = _first_corner_grid(N, f)
    return CornerReport(total=count, includes_trivial=a.cardinality, witness=witness)


def _first_corner_grid(N: int, f: np.ndarray):
    for x in range(N):
        for y in range(N):
            if not f[x, y]:
                continue
            for d in range(-(N - 1), N):
                if d == 0 or not (0 <= x + d < N and 0 <= y + d < N):
                    continue
                if f[x + d, y] and f[x, y + d]:
                    return (x, y, d)
    return None


# ---------------------------------------------------------------------------
# progression-free sets


def _apfree_violation(members) -> Optional[tuple[int, int, int]]:
    mem = set(int(v) for v in members)
    lst = sorted(mem)
    for i, x in enumerate(lst):
        for z in lst[i + 1:]:
            if (x + z) % 2 == 0 and (x + z) // 2 in mem:
                return (x, (x + z) // 2, z)
    return None


def _digit_numbers(N: int, base: int, dmax: int):
    """All integers < N whose base-`base` digits are all < dmax, with the
    squared euclidean norm of the digit vector."""
    out = [(0, 0)]
    place = 1
    while place < N:
        nxt = []
        for v, q in out:
            top = min(dmax - 1, (N - 1 - v) // place)
            for dig in range(top + 1):
                nxt.append((v + dig * place, q + dig * dig))
        out = nxt
        place *= base
    return out


def behrend_apfree(N: int):
    """A large 3-AP-free subset of {0..N-1} plus a construction report.

    Two no-carry families are swept. Digits restricted to {0,1} in base 3 or
    5 give a set that is AP-free as a whole: x + z = 2y forces equality
    digitwise because no column can carry. For digit range {0..d-1} with
    d >= 3 the base is 2d+1 and the set is split into shells of constant
    squared digit norm; on a sphere the midpoint of two distinct points is
    strictly inside, so each shell is AP-free. Best candidate wins by size,
    ties broken toward smaller digit range, then base, then shell norm.

    The winner is re-verified by a quadratic pair scan for N <= 10^4.
    """
    if N < 1:
        raise ValueError("N must be positive")
    candidates = []  # (size, d, base, norm, members)
    for base in (3, 5):
        nums = [v for v, _ in _digit_numbers(N, base, 2)]
        candidates.append((len(nums), 2, base, 0, sorted(nums)))
    # shell families need at least two digits to beat the sets above, and
    # wide digit ranges stop paying off quickly, so the sweep is capped
    d = 3
    while d <= 40 and (2 * d + 1) ** 2 <= N:
        base = 2 * d + 1
        shells: dict[int, list[int]] = {}
        for v, q in _digit_numbers(N, base, d):
            shells.setdefault(q, []).append(v)
        for q, vals in sorted(shells.items()):
            candidates.append((len(vals), d, base, q, sorted(vals)))
        d += 1
    size, d, base, norm, members = max(
        candidates, key=lambda c: (c[0], -c[1], -c[2], -c[3]))
    if N <= 10_000:
        bad = _apfree_violation(members)
        if bad is not None:
            raise AssertionError(f"construction produced the progression {bad}")
    report = {"size": size, "digit_range": d, "base": base, "shell_norm": norm}
    return SubsetInd.from_indices(N, members), report


def cornerfree_from_apfree(N: int, b: SubsetInd) -> SubsetInd:
    """Lift a 3-AP-free B to the corner-free A = {(x,y) : x + 2y in B} in [N]^2.

    A corner (x,y), (x+d,y), (x,y+d) maps to the progression v, v+d, v+2d
    with v = x + 2y, so corner-freeness is inherited. The input is checked
    first; a violating triple is reported if it is not AP-free.
    """
    if b.size != N:
        raise ValueError("B must be a subset of {0..N-1}")
    bad = _apfree_violation(b.indices())
    if bad is not None:
        raise ValueError(f"input contains the 3-term progression {bad}")
    xs, ys = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    v = xs + 2 * ys
    inb = np.zeros(3 * N, dtype=bool)
    inb[b.indices()] = True
    return SubsetInd(N * N, inb[v].reshape(-1))


def embed_grid_in_cyclic(N: int, a: SubsetInd):
    """Place an integer-grid set into (Z/4N)^2, where wraparound corners
    cannot appear: both legs of a cyclic corner of the image have difference
    representatives in (-N, N), an interval too short to wrap mod 4N."""
    if a.size != N * N:
        raise ValueError("expected a subset of [N]^2")
    g = Group((4 * N,))
    f = a.bits.reshape(N, N)
    big = np.zeros((4 * N, 4 * N), dtype=bool)
    big[:N, :N] = f
    return g, SubsetInd(16 * N * N, big.reshape(-1))


# ---------------------------------------------------------------------------
# nonabelian corners on multiplication tables


def find_bmz_corner(t: GroupTable, a: SubsetInd, variant: str = "bmz"):
    """First corner in scan order (x, y, g) or None. Variant "bmz" means
    (x,y), (xg,y), (x,gy); "naive" means (x,y), (xg,y), (x,yg). g != 1."""
    if variant not in ("bmz", "naive"):
        raise ValueError(f"unknown variant {variant!r}")
    n = t.order
    if n > 24:
        raise ValueError("corner scans are capped at order <= 24")
    if a.size != n * n:
        raise ValueError("subset must cover order^2 pairs")
    f = a.bits.reshape(n, n)
    mul = t.mul
    for x in range(n):
        for y in range(n):
            if not f[x, y]:
                continue
            for g in range(n):
                if g == t.identity:
                    continue
                third = f[x, mul[g, y]] if variant == "bmz" else f[x, mul[y, g]]
                if f[mul[x, g], y] and third:
                    return (x, y, g)
    return None


def roth_nonabelian_lift(t: GroupTable, a: SubsetInd) -> SubsetInd:
    """S = {(x, y) : x^-1 y in A} as a subset of order^2 pairs.

    S has a corner (x,y), (xg,y), (x,yg) with g != 1 exactly when A contains
    X, Y, Z, not all equal, with XY = Z^2; see find_product_triple.
    """
    n = t.order
    if a.size != n:
        raise ValueError("A must be a subset of the group")
    mem = a.bits
    xinv_y = t.mul[t.inv[:, None], np.arange(n)[None, :]]
    return SubsetInd(n * n, mem[xinv_y].reshape(-1))


def find_product_triple(t: GroupTable, a: SubsetInd):
    """X, Y, Z in A, not all equal, with X Y = Z^2, or None."""
    n = t.order
    mem = a.indices()
    sq = {z: int(t.mul[z, z]) for z in mem}
    prods = {}
    for x in mem:
        for y in mem:
            prods.setdefault(int(t.mul[x, y]), []).append((int(x), int(y)))
    for z in mem:
        for (x, y) in prods.get(sq[z], []):
            if not (x == y == z):
                return (x, y, int(z))
    return None


def abelian_projection(t: GroupTable, a: SubsetInd, x: int, y: int) -> SubsetInd:
    """A_{x,y} = {(h1, h2) : (x h1, h2 y) in A}, the pair-set seen through
    left and right translation."""
    n = t.order
    if a.size != n * n:
        raise ValueError("subset must cover order^2 pairs")
    f = a.bits.reshape(n, n)
    h = np.arange(n)
    return SubsetInd(n * n, f[t.mul[x, h][:, None], t.mul[h, y][None, :]].reshape(-1))
