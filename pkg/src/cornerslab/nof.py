"""Exactly-N protocols from corner-free colorings, and cylinder restriction.

Three players each see two of the inputs (x, y, z) and must decide whether
x + y + z = N. Each player derives a plane point from what it sees: player 1
computes (N-y-z, y), player 2 computes (x, N-x-z), player 3 computes (x, y).
With d = N-x-y-z the three points are (x+d, y), (x, y+d), (x, y), so they
coincide exactly when the sum is N and otherwise form a corner with offset
d != 0. Coloring the plane so that every color class is corner-free therefore
turns "all three points share a color" into a sound certificate for the sum.

The classes come from a greedy covering of the grid by random translates of
one corner-free set: each class is a subset of a translate, so corner
freedom is inherited, and leftover cells become singleton classes. One level
up, the same coloring idea drives the restriction of a cylinder intersection
in G^3 to the slice of one color where a fourth-point argument pins every
surviving cell of that color to a single plane x + y + z = g.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import numpy as np

from .corners import count_corners, count_corners_grid
from .group import Group, parse_group
from .reports import InequalityReport
from .setfun import SubsetInd

__all__ = [
    "CflProtocol",
    "Coloring",
    "CylinderIntersection",
    "ProtocolTranscript",
    "coloring_from_cornerfree",
    "compile_cfl_protocol",
    "corner_injection_report",
    "exactly_n",
    "find_mono_3dcorner",
    "restrict_cylinder",
]


UNCOLORED = -1


@dataclass(eq=False)
class Coloring:
    """A map from grid or cube cells to colors 0..L-1, with -1 uncolored.

    The domain is the array shape: (N, N) for the plane protocol, three
    equal axes plus a group for cube colorings. Classes are extracted
    exactly from the dense array.
    """

    colors: np.ndarray
    num_colors: int
    group: Optional[Group] = None
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.int64)
        if self.colors.ndim not in (2, 3):
            raise ValueError("the color array must be 2- or 3-dimensional")
        if self.num_colors < 1:
            raise ValueError("at least one color is required")
        if self.colors.size:
            lo, hi = int(self.colors.min()), int(self.colors.max())
            if lo < UNCOLORED or hi >= self.num_colors:
                raise ValueError(f"colors must lie in [-1, {self.num_colors})")
        if self.group is not None:
            n = self.group.order
            if any(s != n for s in self.colors.shape):
                raise ValueError("axis lengths must equal the group order")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.colors.shape

    @property
    def uncolored_count(self) -> int:
        return int((self.colors == UNCOLORED).sum())

    def class_mask(self, c: int) -> np.ndarray:
        if not 0 <= c < self.num_colors:
            raise ValueError(f"color {c} outside [0, {self.num_colors})")
        return self.colors == c

    def class_cells(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.class_mask(c).reshape(-1))

    def recolor(self, c: int) -> "Coloring":
        """A copy with class c erased to uncolored; the palette size stays."""
        out = self.colors.copy()
        out[self.class_mask(c)] = UNCOLORED
        return Coloring(out, self.num_colors, self.group, dict(self.details))

    def to_json(self) -> dict[str, Any]:
        return {"kind": "coloring",
                "shape": list(self.colors.shape),
                "num_colors": self.num_colors,
                "group": self.group.descriptor() if self.group else None,
                "colors": [int(v) for v in self.colors.reshape(-1)]}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Coloring":
        shape = tuple(int(s) for s in doc["shape"])
        arr = np.asarray(doc["colors"], dtype=np.int64).reshape(shape)
        grp = parse_group(doc["group"]) if doc.get("group") else None
        return cls(arr, int(doc["num_colors"]), grp)


@dataclass(eq=False)
class CylinderIntersection:
    """{(x,y,z) : (x,y) in S_XY, (y,z) in S_YZ, (x,z) in S_XZ} over G^3."""

    g: Group
    s_xy: SubsetInd
    s_yz: SubsetInd
    s_xz: SubsetInd

    def __post_init__(self):
        n = self.g.order
        for name in ("s_xy", "s_yz", "s_xz"):
            if getattr(self, name).size != n * n:
                raise ValueError(f"{name} must index |G|^2 = {n * n} cells")

    @classmethod
    def full(cls, g: Group) -> "CylinderIntersection":
        f = SubsetInd.full(g.order ** 2)
        return cls(g, f, f, f)

    def membership(self) -> np.ndarray:
        n = self.g.order
        xy = self.s_xy.bits.reshape(n, n)
        yz = self.s_yz.bits.reshape(n, n)
        xz = self.s_xz.bits.reshape(n, n)
        return xy[:, :, None] & yz[None, :, :] & xz[:, None, :]

    @property
    def cardinality(self) -> int:
        return int(self.membership().sum())

    def contains(self, x: int, y: int, z: int) -> bool:
        n = self.g.order
        return bool(self.s_xy.bits[x * n + y] and self.s_yz.bits[y * n + z]
                    and self.s_xz.bits[x * n + z])

    def to_json(self) -> dict[str, Any]:
        return {"kind": "cylinder", "group": self.g.descriptor(),
                "s_xy": self.s_xy.to_hex(), "s_yz": self.s_yz.to_hex(),
                "s_xz": self.s_xz.to_hex()}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "CylinderIntersection":
        g = parse_group(doc["group"])
        sz = g.order ** 2
        return cls(g, SubsetInd.from_hex(sz, doc["s_xy"]),
                   SubsetInd.from_hex(sz, doc["s_yz"]),
                   SubsetInd.from_hex(sz, doc["s_xz"]))


@dataclass(frozen=True)
class ProtocolTranscript:
    inputs: tuple[int, int, int]
    messages: tuple[tuple[int, str], ...]
    verdict: str
    bits_total: int

    def to_json(self) -> dict[str, Any]:
        return {"inputs": list(self.inputs),
                "messages": [[p, b] for p, b in self.messages],
                "verdict": self.verdict, "bits_total": self.bits_total}


def exactly_n(x: int, y: int, z: int, n: int) -> bool:
    """The reference predicate x + y + z = n on inputs from [0, n)."""
    if n < 1:
        raise ValueError("n must be positive")
    for v in (x, y, z):
        if not 0 <= v < n:
            raise ValueError(f"input {v} outside [0, {n})")
    return x + y + z == n


def _derived_points(x: int, y: int, z: int, n: int):
    # player i misses input i and computes its point from the other two
    return ((n - y - z, y), (x, n - x - z), (x, y))


@dataclass(eq=False)
class CflProtocol:
    """Compiled deterministic Exactly-N protocol over a corner-free coloring.

    Players speak in the fixed order 1, 2, 3. Each sends one range bit for
    its derived point; an out-of-range point rejects immediately and later
    players stay silent. In-range points are followed by the point's color
    in ceil(log2 L) bits, and the verdict is accept exactly when all three
    colors agree.
    """

    n: int
    coloring: Coloring
    color_bits: int
    details: dict[str, Any] = field(default_factory=dict)

    def bits_bound(self, nondeterministic: bool = False) -> int:
        # the nondeterministic figure (guess one color, three confirmations)
        # is for cost accounting only; run() is always deterministic
        if nondeterministic:
            return self.color_bits + 3
        return 3 * (self.color_bits + 1)

    def run(self, x: int, y: int, z: int) -> ProtocolTranscript:
        n = self.n
        for v in (x, y, z):
            if not 0 <= v < n:
                raise ValueError(f"input {v} outside [0, {n})")
        points = _derived_points(x, y, z, n)
        messages = []
        seen = []
        verdict = "accept"
        for player, (px, py) in zip((1, 2, 3), points):
            if not (0 <= px < n and 0 <= py < n):
                messages.append((player, "0"))
                verdict = "reject"
                break
            c = int(self.coloring.colors[px, py])
            word = format(c, "b").zfill(self.color_bits) if self.color_bits else ""
            messages.append((player, "1" + word))
            seen.append(c)
        else:
            if len(set(seen)) != 1:
                verdict = "reject"
        total = sum(len(b) for _, b in messages)
        return ProtocolTranscript((x, y, z), tuple(messages), verdict, total)

    def decide(self, x: int, y: int, z: int) -> bool:
        return self.run(x, y, z).verdict == "accept"

    def verify_exhaustive(self) -> dict[str, Any]:
        """Compare the protocol verdict with arithmetic on every triple.

        Vectorized over the full cube; the replay path run() is spot-checked
        against this table by the test suite.
        """
        n = self.n
        if n > 128:
            raise ValueError("exhaustive verification is capped at n <= 128")
        col = self.coloring.colors
        x = np.arange(n)[:, None, None]
        y = np.arange(n)[None, :, None]
        z = np.arange(n)[None, None, :]
        p1x = n - y - z
        p2y = n - x - z
        ok1 = (p1x >= 0) & (p1x < n)
        ok2 = (p2y >= 0) & (p2y < n)
        c0 = col[x, y]
        c1 = col[np.clip(p1x, 0, n - 1), y]
        c2 = col[x, np.clip(p2y, 0, n - 1)]
        accept = ok1 & ok2 & (c0 == c1) & (c0 == c2)
        expected = (x + y + z) == n
        mism = int((accept != expected).sum())
        return {"n": n, "triples": n ** 3, "mismatches": mism,
                "ok": mism == 0}


def coloring_from_cornerfree(a: SubsetInd, seed: int) -> Coloring:
    """Cover [N]^2 by translates of the corner-free A, one color each.

    A is verified corner-free first (both offset signs, no wraparound).
    When A is also corner-free as a subset of (Z/N)^2 the translates wrap
    cyclically and each cell is covered with probability |A|/N^2 exactly;
    otherwise the translates slide without wrapping over the doubled shift
    range, which costs about a factor 4 in the coupon-collector count and
    is flagged in the details. Cells never claimed become singleton
    classes. Every class with three or more cells is re-verified; smaller
    classes cannot contain a corner.
    """
    nn = a.size
    n = math.isqrt(nn)
    if n * n != nn:
        raise ValueError("A must index an [N] x [N] grid")
    if a.cardinality == 0:
        raise ValueError("A is empty")
    rep = count_corners_grid(n, a)
    if rep.total:
        raise ValueError(f"A contains the corner {rep.witness}")
    if n == 1:
        return Coloring(np.zeros((1, 1), dtype=np.int64), 1,
                        details={"mode": "cyclic", "translates": 1,
                                 "productive": 1, "singletons": 0,
                                 "bound": 1, "within_bound": True})

    a2 = a.bits.reshape(n, n)
    cyclic = count_corners(Group((n,)), a).total == 0
    card = a.cardinality
    coupon = 2 * math.log(n) + 2
    if cyclic:
        m = math.ceil(n * n / card * coupon)
    else:
        m = math.ceil((2 * n - 1) ** 2 / card * coupon)

    rng = np.random.default_rng(seed)
    colors = np.full((n, n), UNCOLORED, dtype=np.int64)
    next_c = 0
    if cyclic:
        shifts = rng.integers(0, n, size=(m, 2))
        for s, t in shifts:
            tr = np.roll(a2, (int(s), int(t)), axis=(0, 1))
            new = tr & (colors == UNCOLORED)
            if new.any():
                colors[new] = next_c
                next_c += 1
    else:
        shifts = rng.integers(-(n - 1), n, size=(m, 2))
        for s, t in shifts:
            s, t = int(s), int(t)
            tr = np.zeros((n, n), dtype=bool)
            tr[max(0, s):n + min(0, s), max(0, t):n + min(0, t)] = \
                a2[max(0, -s):n - max(0, s), max(0, -t):n - max(0, t)]
            new = tr & (colors == UNCOLORED)
            if new.any():
                colors[new] = next_c
                next_c += 1
    productive = next_c

    leftover = np.argwhere(colors == UNCOLORED)
    for cx, cy in leftover:
        colors[cx, cy] = next_c
        next_c += 1

    col = Coloring(colors, next_c,
                   details={"mode": "cyclic" if cyclic else "integer",
                            "translates": m, "productive": productive,
                            "singletons": len(leftover), "bound": m,
                            "within_bound": next_c <= m})
    for c in range(col.num_colors):
        mask = col.class_mask(c)
        if int(mask.sum()) < 3:
            continue
        crep = count_corners_grid(n, SubsetInd(nn, mask.reshape(-1)))
        if crep.total:
            raise AssertionError(
                f"class {c} contains the corner {crep.witness}; "
                "the translate covering is broken")
    return col


def compile_cfl_protocol(col: Coloring) -> CflProtocol:
    """Check the coloring and build the deterministic Exactly-N protocol.

    Every class is verified corner-free (a violation is a compile error
    carrying the witness) and the coloring must be total. For n <= 64 the
    compiled protocol is verified against arithmetic on every input triple
    before it is returned.
    """
    if col.group is not None or col.colors.ndim != 2:
        raise ValueError("the protocol needs a plane coloring on [N] x [N]")
    n, n2 = col.colors.shape
    if n != n2:
        raise ValueError("the coloring must be square")
    if (col.colors == UNCOLORED).any():
        raise ValueError("the coloring must be total")
    for c in range(col.num_colors):
        mask = col.class_mask(c)
        if int(mask.sum()) < 3:
            continue
        rep = count_corners_grid(n, SubsetInd(n * n, mask.reshape(-1)))
        if rep.total:
            raise ValueError(f"class {c} contains the corner {rep.witness}")
    bits = max(0, (col.num_colors - 1).bit_length())
    proto = CflProtocol(n, col, bits,
                        details={"num_colors": col.num_colors,
                                 "bits_bound": 3 * (bits + 1)})
    if n <= 64:
        res = proto.verify_exhaustive()
        proto.details["verified"] = res
        if not res["ok"]:
            raise AssertionError(
                f"{res['mismatches']} triples disagree with arithmetic; "
                "the corner-free argument is broken")
    return proto


def find_mono_3dcorner(col: Coloring):
    """First monochromatic (x,y,z), (x+d,y,z), (x,y+d,z), (x,y,z+d), d != 0.

    Lex-first in (x, y, z, d) over flat group indices, or None. Uncolored
    cells never count as monochromatic.
    """
    if col.group is None or col.colors.ndim != 3:
        raise ValueError("a cube coloring over a group is required")
    g = col.group
    n = g.order
    if n > 16:
        raise ValueError("the corner scan is capped at |G| <= 16")
    c = col.colors
    idx = np.arange(n)
    best = None
    for d in range(1, n):
        perm = np.asarray(g.add_indices(idx, d))
        mono = ((c >= 0) & (c == c[perm, :, :]) & (c == c[:, perm, :])
                & (c == c[:, :, perm]))
        if mono.any():
            x, y, z = np.argwhere(mono)[0]
            cand = (int(x), int(y), int(z), d)
            if best is None or cand[:3] < best[:3]:
                best = cand
    return best


def _mono_corner_among(m: np.ndarray, col: Coloring):
    """Like find_mono_3dcorner but restricted to the cells of m."""
    g = col.group
    n = g.order
    c = np.where(m, col.colors, -2)
    idx = np.arange(n)
    best = None
    for d in range(1, n):
        perm = np.asarray(g.add_indices(idx, d))
        mono = ((c >= 0) & (c == c[perm, :, :]) & (c == c[:, perm, :])
                & (c == c[:, :, perm]))
        if mono.any():
            x, y, z = np.argwhere(mono)[0]
            cand = (int(x), int(y), int(z), d)
            if best is None or cand[:3] < best[:3]:
                best = cand
    return best


def restrict_cylinder(a: CylinderIntersection, col: Coloring):
    """Restrict A to the best monochromatic slice and project it.

    Preconditions are verified: no monochromatic corner among A's colored
    cells (an exhaustive scan, capped at |G| <= 12). The slice T of color c
    on the plane x + y + z = g is chosen to maximize |T|, lex-first in
    (c, g), and the pigeonhole floor |T| >= (|A| - U) / (L |G|) is asserted
    exactly with U the number of uncolored A-cells. The projections of T
    give a new cylinder intersection A' inside A, and the fourth-point
    argument pins every c-colored cell of A' to the slice, which yields
    |A' restricted to colors {c, uncolored}| <= U + |G|^2, asserted exactly
    and returned as the report. Callers continue with col.recolor(c).
    """
    n = a.g.order
    if n > 12:
        raise ValueError("cylinder restriction is capped at |G| <= 12")
    if col.group is None or col.group.factors != a.g.factors:
        raise ValueError("the coloring must live on the cylinder's group")
    if col.colors.ndim != 3:
        raise ValueError("a cube coloring is required")
    m = a.membership()
    witness = _mono_corner_among(m, col)
    if witness is not None:
        raise ValueError(f"A holds the monochromatic 3D corner {witness}")

    size_a = int(m.sum())
    u = int((m & (col.colors == UNCOLORED)).sum())
    ell = col.num_colors
    idx = np.arange(n)
    add = np.asarray(a.g.add_indices(idx[:, None], idx[None, :]))
    rows = idx[:, None]
    cols_ = idx[None, :]

    zfs = [np.asarray(a.g.sub_indices(g_val, add)) for g_val in range(n)]
    a_slices = [m[rows, cols_, zf] for zf in zfs]
    c_slices = [col.colors[rows, cols_, zf] for zf in zfs]
    # strict improvement keeps the lex-first (c, g) among maximizers
    best_size, best_c, best_g, best_t = -1, -1, -1, None
    for c in range(ell):
        for g_val in range(n):
            t = a_slices[g_val] & (c_slices[g_val] == c)
            sz = int(t.sum())
            if sz > best_size:
                best_size, best_c, best_g, best_t = sz, c, g_val, t
    best_zf = zfs[best_g]

    floor = Fraction(size_a - u, ell * n)
    assert Fraction(best_size) >= floor, \
        "the pigeonhole floor failed; the slice accounting is broken"

    txs, tys = np.nonzero(best_t)
    tzs = best_zf[txs, tys]
    yz = np.zeros((n, n), dtype=bool)
    xz = np.zeros((n, n), dtype=bool)
    yz[tys, tzs] = True
    xz[txs, tzs] = True
    aprime = CylinderIntersection(a.g, SubsetInd(n * n, best_t.reshape(-1)),
                                  SubsetInd(n * n, yz.reshape(-1)),
                                  SubsetInd(n * n, xz.reshape(-1)))
    assert not (aprime.s_xy.bits & ~a.s_xy.bits).any(), \
        "the projected sides escaped the original cylinder"
    assert not (aprime.s_yz.bits & ~a.s_yz.bits).any(), \
        "the projected sides escaped the original cylinder"
    assert not (aprime.s_xz.bits & ~a.s_xz.bits).any(), \
        "the projected sides escaped the original cylinder"
    mp = aprime.membership()
    assert not (mp & ~m).any(), "the restricted cylinder escaped A"

    cstar = int((mp & ((col.colors == best_c)
                       | (col.colors == UNCOLORED))).sum())
    bound = u + n * n
    assert cstar <= bound, \
        "the slice-pinning count failed; the fourth-point argument is broken"
    report = InequalityReport(
        "cylinder-restriction", float(cstar), float(bound), relation="<=",
        tol=0.0,
        details={"c": best_c, "g": best_g, "t_size": best_size,
                 "floor": str(floor), "a_size": size_a, "u": u,
                 "num_colors": ell, "a_prime_size": int(mp.sum()),
                 "recolored_class_cells": int(col.class_mask(best_c).sum())})
    return aprime, best_c, report


def corner_injection_report(a: CylinderIntersection, g_slice: int) -> InequalityReport:
    """Verify |A'| >= (corner count of S'_XY) by the explicit injection.

    A corner ((x,y), (x+d,y), (x,y+d)) of the XY side maps to the cell
    (x, y, g - x - y - d), which the two shifted corner points place in A'.
    The map is injective since d is recoverable from the cell, so the
    corner count is a lower bound on |A'|; every image is checked.
    """
    g = a.g
    n = g.order
    if not 0 <= g_slice < n:
        raise ValueError("g_slice must be a flat group index")
    t = a.s_xy.bits.reshape(n, n)
    m = a.membership()
    idx = np.arange(n)
    count = count_corners(g, a.s_xy).total
    images = 0
    for d in range(1, n):
        perm = np.asarray(g.add_indices(idx, d))
        corner = t & t[perm, :] & t[:, perm]
        xs, ys = np.nonzero(corner)
        if len(xs) == 0:
            continue
        zs = np.asarray(g.sub_indices(g_slice,
                                      g.add_indices(g.add_indices(xs, ys), d)))
        if not m[xs, ys, zs].all():
            raise AssertionError(
                "a corner image left A'; the projection arithmetic is broken")
        images += len(xs)
    if images != count:
        raise AssertionError(
            "the per-offset corner enumeration disagrees with the counter")
    size = int(m.sum())
    return InequalityReport("corner-injection", float(count), float(size),
                            relation="<=", tol=0.0,
                            details={"corners": count, "a_prime_size": size,
                                     "images_verified": images,
                                     "g_slice": g_slice})
