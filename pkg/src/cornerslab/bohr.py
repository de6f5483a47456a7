"""Bohr sets with exact rational membership.

A Bohr set collects the group elements whose images under a list of
characters all sit within a rational radius of an integer. Everything here
is decided in integer arithmetic: a character on a finite abelian group
takes values in (1/L)Z with L the group exponent, so membership at radius
p/q is the integer comparison dist_num * q <= p * L. Sizes of dilates form
a right-continuous step function of the radius whose jumps sit at the
attained distances, which is what makes the regularity check finite and
complete.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from .constants import constant
from .group import Character, Group, parse_group
from .gridnorm import gowers_grid_norm
from .reports import InequalityReport
from .setfun import GroupFunction, SubsetInd, convolve
from .spread import SpreadCertificate, is_l1_spread

__all__ = [
    "BohrSet",
    "BohrSequence",
    "bohr_members",
    "bohr_from_json",
    "bohr_to_json",
    "is_regular",
    "find_regular_dilate",
    "shift_invariance_error",
    "make_sequence",
    "is_bohr_alg_spread",
    "bohr_spread_extract",
    "check_bohr_upper_bound",
    "check_bohr_conv_lower",
    "check_bohr_conv_lower_2",
    "check_bohr_product_spread",
]

REGULARITY_CONST = constant("REGULARITY_CONST")
SHIFT_INV_CONST = constant("SHIFT_INV_CONST")
BOHR_EXTRACT_REG_C = constant("BOHR_EXTRACT_REG_C")
BOHR_UPPER_ERR_C = constant("BOHR_UPPER_ERR_C")
BOHR_CONV_SQRT_C = constant("BOHR_CONV_SQRT_C")
BOHR_CONV_ETA_C = constant("BOHR_CONV_ETA_C")
BOHR_CONV_RESIDUAL_C = constant("BOHR_CONV_RESIDUAL_C")
BOHR_PRODUCT_RESIDUAL_C = constant("BOHR_PRODUCT_RESIDUAL_C")

# Member tables are materialized over the whole group.
BOHR_MAX_ORDER = 1 << 20


def _as_character(group: Group, f) -> Character:
    if isinstance(f, Character):
        if f.group != group:
            raise ValueError("character belongs to a different group")
        return f
    if isinstance(f, int):
        f = (f,)
    return Character(group, tuple(int(c) for c in f))


@dataclass(eq=False)
class BohrSet:
    """Bohr(freqs, radius) = {x : every character lands within radius of Z}."""

    group: Group
    freqs: tuple[Character, ...]
    radius: Fraction
    _md: Optional[np.ndarray] = field(default=None, repr=False)
    _md_sorted: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.freqs = tuple(_as_character(self.group, f) for f in self.freqs)
        self.radius = Fraction(self.radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.freqs)

    def _tables(self) -> np.ndarray:
        """Worst distance numerator per element, over the common denominator L."""
        if self._md is None:
            if self.group.order > BOHR_MAX_ORDER:
                raise ValueError(f"group order {self.group.order} exceeds "
                                 f"the member-table cap {BOHR_MAX_ORDER}")
            L = self.group.exponent
            md = np.zeros(self.group.order, dtype=np.int64)
            for ch in self.freqs:
                nums = ch.numerators_all()
                np.maximum(md, np.minimum(nums, L - nums), out=md)
            self._md = md
        return self._md

    def _sorted_tables(self) -> np.ndarray:
        if self._md_sorted is None:
            self._md_sorted = np.sort(self._tables())
        return self._md_sorted

    def _count_at(self, rho: Fraction) -> int:
        """|Bohr(freqs, rho)| in O(log |G|) after the one-time sort."""
        L = self.group.exponent
        thr = (rho.numerator * L) // rho.denominator
        return int(np.searchsorted(self._sorted_tables(), thr, side="right"))

    def member_mask(self, rho: Optional[Fraction] = None) -> np.ndarray:
        rho = self.radius if rho is None else Fraction(rho)
        L = self.group.exponent
        return self._tables() * rho.denominator <= rho.numerator * L

    def members(self) -> np.ndarray:
        return np.nonzero(self.member_mask())[0]

    def size(self) -> int:
        return self._count_at(self.radius)

    def contains(self, x: int) -> bool:
        rho = self.radius
        return bool(self._tables()[x] * rho.denominator
                    <= rho.numerator * self.group.exponent)

    def attained_distances(self) -> np.ndarray:
        """Sorted distinct worst-distance numerators; the jump points."""
        return np.unique(self._tables())

    def dilate(self, factor) -> "BohrSet":
        factor = Fraction(factor)
        out = BohrSet(self.group, self.freqs, self.radius * factor)
        out._md = self._md          # same frequency family, tables carry over
        out._md_sorted = self._md_sorted
        return out

    def with_extra_freqs(self, extra: Sequence, rho: Fraction) -> "BohrSet":
        out = BohrSet(self.group, self.freqs + tuple(extra), Fraction(rho))
        if self._md is not None and extra:
            L = self.group.exponent
            md = self._md.copy()
            for ch in out.freqs[len(self.freqs):]:
                nums = ch.numerators_all()
                np.maximum(md, np.minimum(nums, L - nums), out=md)
            out._md = md
        elif not extra:
            out._md = self._md
            out._md_sorted = self._md_sorted
        return out


def bohr_to_json(b: BohrSet) -> dict[str, Any]:
    return {
        "group": b.group.descriptor(),
        "freqs": [list(ch.freqs) for ch in b.freqs],
        "radius": str(b.radius),
    }


def bohr_from_json(desc: dict[str, Any]) -> BohrSet:
    g = parse_group(desc["group"])
    freqs = tuple(Character(g, tuple(int(c) for c in f)) for f in desc["freqs"])
    return BohrSet(g, freqs, Fraction(desc["radius"]))


def bohr_members(b: BohrSet) -> SubsetInd:
    """Member subset, with the size floor |B| >= radius^dim * |G| checked exactly.

    The floor is the pigeonhole lower bound; it is closed under the <= in
    the membership test, so it holds with exact rationals, and a failure
    here means the tables are corrupted.
    """
    mask = b.member_mask()
    if not mask[0]:
        raise AssertionError("0 must lie in every Bohr set")
    neg = b.group.neg_indices(np.arange(b.group.order))
    if not np.array_equal(mask, mask[neg]):
        raise AssertionError("Bohr sets are symmetric under negation")
    size = int(mask.sum())
    eps = min(b.radius, Fraction(1, 2))
    if Fraction(size) < eps ** b.dim * b.group.order:
        raise AssertionError("Bohr set smaller than the pigeonhole floor")
    return SubsetInd(b.group.order, mask)


def _d_eff(b: BohrSet) -> int:
    return max(1, b.dim)


def _regularity_points(b: BohrSet, grid: int) -> list[Fraction]:
    """Jump points of c -> |(1+c)B| inside the window, edges, and a grid."""
    d = _d_eff(b)
    w = Fraction(1, REGULARITY_CONST * d)
    L = b.group.exponent
    rho = b.radius
    points = {-w, w}
    lo = (1 - w) * rho     # dist/L in [(1-w) rho, (1+w) rho]
    hi = (1 + w) * rho
    dists = b.attained_distances()
    lo_i = np.searchsorted(dists * lo.denominator, lo.numerator * L, side="left")
    hi_i = np.searchsorted(dists * hi.denominator, hi.numerator * L, side="right")
    for dist in dists[lo_i:hi_i]:
        points.add(Fraction(int(dist), L) / rho - 1)
    for j in range(-grid, grid + 1):
        points.add(Fraction(j, grid) * w if grid else Fraction(0))
    return sorted(points)


def is_regular(b: BohrSet, grid: int = 0) -> InequalityReport:
    """Check |(1+c)B| against (1 +- 100 d |c|) |B| across the whole window.

    The size of a dilate is a right-continuous step function of c, so
    evaluating at every jump point plus both window edges decides the
    condition for all c; `grid` adds evenly spaced extra points on top,
    which can only find additional slack violations on the shrinking side.
    All comparisons are exact rationals. The report's lhs is the worst
    relative excess over the allowed band, 0 when regular.
    """
    d = _d_eff(b)
    s0 = b._count_at(b.radius)
    worst = Fraction(-1)
    worst_c = Fraction(0)
    worst_ratio = Fraction(1)
    npts = 0
    for c in _regularity_points(b, grid):
        s = b._count_at((1 + c) * b.radius)
        npts += 1
        ratio = Fraction(s, s0)
        if c >= 0:
            exc = ratio - (1 + REGULARITY_CONST * d * c)
        else:
            exc = (1 - REGULARITY_CONST * d * (-c)) - ratio
        if c == 0:
            exc = Fraction(0)
        if exc > worst:
            worst, worst_c, worst_ratio = exc, c, ratio
    regular = worst <= 0
    lhs = float(worst)
    if regular and lhs > 0.0:
        lhs = 0.0
    if not regular and lhs <= 0.0:
        lhs = 1e-300
    return InequalityReport(
        "bohr-regularity", lhs, 0.0, relation="<=", tol=0.0,
        details={
            "size": s0,
            "dimension": b.dim,
            "window": str(Fraction(1, REGULARITY_CONST * d)),
            "worst_c": str(worst_c),
            "worst_ratio": float(worst_ratio),
            "points_checked": npts,
        })


def find_regular_dilate(b: BohrSet) -> BohrSet:
    """First regular dilate alpha*B with alpha in [1/2, 1], searched downward.

    Candidates are the breakpoints of alpha -> |alpha B| in [1/2, 1], the
    midpoints between consecutive ones, and both endpoints. Sizes are
    constant between breakpoints, so the midpoints probe every open
    interval. The dilate-existence argument guarantees a regular scale in
    this range; exhausting the list indicates corrupted tables.
    """
    L = b.group.exponent
    rho = b.radius
    cands = {Fraction(1), Fraction(1, 2)}
    dists = b.attained_distances()
    lo = rho / 2
    lo_i = np.searchsorted(dists * lo.denominator, lo.numerator * L, side="left")
    hi_i = np.searchsorted(dists * rho.denominator, rho.numerator * L, side="right")
    for dist in dists[lo_i:hi_i]:
        a = Fraction(int(dist), L) / rho
        if Fraction(1, 2) <= a <= 1:
            cands.add(a)
    srt = sorted(cands)
    mids = [(x + y) / 2 for x, y in zip(srt, srt[1:])]
    for alpha in sorted(set(srt + mids), reverse=True):
        cand = b.dilate(alpha)
        if is_regular(cand).holds:
            return cand
    raise RuntimeError("no regular dilate in [1/2, 1]; the existence argument "
                       "rules this out, so the membership tables are suspect")


def shift_invariance_error(f: GroupFunction, b: BohrSet, bp: BohrSet) -> float:
    """Worst |E_{n~B} f(n) - E_{n~B} f(n+s)| over shifts s in the narrower set.

    bp must be a dilate of b by some c <= 1/(100 d). For regular b the
    error is bounded by SHIFT_INV_CONST * c * d, which is asserted; for an
    irregular b the value is returned unasserted.
    """
    if f.group != b.group or bp.group != b.group:
        raise ValueError("function and Bohr sets must share a group")
    if tuple(ch.freqs for ch in bp.freqs) != tuple(ch.freqs for ch in b.freqs):
        raise ValueError("shift set must be a dilate: same frequency family")
    c = bp.radius / b.radius
    d = _d_eff(b)
    if c > Fraction(1, REGULARITY_CONST * d):
        raise ValueError("dilate factor exceeds the regularity window")
    vals = np.asarray(f.values, dtype=float)
    if np.abs(vals).max() > 1 + 1e-12:
        raise ValueError("shift invariance needs |f| <= 1")
    mem = b.members()
    shifts = bp.members()
    tbl = b.group.add_indices(mem[:, None], shifts[None, :])
    means = vals[tbl].mean(axis=0)
    base = vals[mem].mean()
    err = float(np.abs(means - base).max())
    if is_regular(b).holds:
        bound = SHIFT_INV_CONST * float(c) * d
        assert err <= bound + 1e-12, \
            f"shift error {err} above {bound} on a regular set"
    return err


@dataclass
class BohrSequence:
    """Nested regular Bohr sets with controlled radius ratios."""

    sets: list[BohrSet]
    eta: Fraction
    exactness: str
    ratios: list[Fraction]
    degenerate_tail: bool = False
    regular_verified: bool = True

    def __len__(self) -> int:
        return len(self.sets)

    def to_json(self) -> dict[str, Any]:
        return {
            "eta": str(self.eta),
            "exactness": self.exactness,
            "sets": [bohr_to_json(s) for s in self.sets],
            "ratios": [str(r) for r in self.ratios],
            "degenerate_tail": self.degenerate_tail,
        }


def make_sequence(b1: BohrSet, eta, length: int,
                  exactness: str = "small") -> BohrSequence:
    """Chain of regular dilates with consecutive radius ratios tied to eta.

    Each step regularizes eta times the previous set, so the realized
    ratio lands in [eta/2, eta]; "small" only promises <= eta while
    "exact" asserts the two-sided window. A sequence that shrinks to the
    singleton {0} is flagged degenerate, not an error, and stops early.
    """
    eta = Fraction(eta)
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if exactness not in ("small", "exact"):
        raise ValueError("exactness must be 'small' or 'exact'")
    if length < 1:
        raise ValueError("length must be at least 1")
    cur = find_regular_dilate(b1)
    sets = [cur]
    ratios: list[Fraction] = []
    degenerate = cur.size() == 1
    while len(sets) < length and not degenerate:
        nxt = find_regular_dilate(cur.dilate(eta))
        ratio = nxt.radius / cur.radius
        assert ratio <= eta, "dilate search must not grow the radius"
        if exactness == "exact":
            assert ratio >= eta / 2, "exact mode requires ratio >= eta/2"
        sets.append(nxt)
        ratios.append(ratio)
        if nxt.size() == 1:
            degenerate = True
        cur = nxt
    assert all(x.radius >= y.radius for x, y in zip(sets, sets[1:]))
    return BohrSequence(sets, eta, exactness, ratios, degenerate_tail=degenerate)


def _shift_counts(x_mask: np.ndarray, mem_mask: np.ndarray,
                  group: Group) -> np.ndarray:
    """|X intersect (s + M)| for every shift s, via one FFT convolution.

    M is symmetric, so the cross-correlation equals the convolution.
    Counts are integers below 2^20, far inside double precision, so the
    rounding is exact.
    """
    fx = GroupFunction(group, x_mask.astype(float))
    fm = GroupFunction(group, mem_mask.astype(float))
    conv = convolve(fx, fm).values * group.order
    return np.rint(conv).astype(np.int64)


def is_bohr_alg_spread(x: SubsetInd, b: BohrSet, r: int, eta_s, eps: float,
                       pool: Sequence = ()) -> SpreadCertificate:
    """Density test of X <= B against shifted sub-Bohr sets from a pool.

    The searched family: augment the frequency list by up to r characters
    drawn from `pool`, shrink the radius to any breakpoint at or above
    eta_s * radius, and translate by any group element. A violation
    (density above (1+eps) times the density of X in B) is exact and
    final. A "spread" verdict is only relative to the pool; the details
    say so.
    """
    eta_s = Fraction(eta_s)
    if not 0 < eta_s <= 1:
        raise ValueError("eta_s must lie in (0, 1]")
    if r < 0:
        raise ValueError("r must be nonnegative")
    g = b.group
    if x.size != g.order:
        raise ValueError("X must be indexed by the group")
    bmask = b.member_mask()
    if (x.bits & ~bmask).any():
        raise ValueError("X must be contained in the Bohr set")
    nx = int(x.bits.sum())
    if nx == 0:
        raise ValueError("X must be nonempty")
    delta = Fraction(nx, int(bmask.sum()))
    thr = (1 + Fraction(eps)) * delta
    L = g.exponent
    lo_num = eta_s * b.radius

    pool = [_as_character(g, p) for p in pool]
    best_gap = None
    candidates = 0
    radii_tested = 0
    for j in range(0, min(r, len(pool)) + 1):
        for combo in itertools.combinations(pool, j):
            candidates += 1
            aug = b.with_extra_freqs(combo, b.radius)
            dists = aug.attained_distances()
            lo_i = np.searchsorted(dists * lo_num.denominator,
                                   lo_num.numerator * L, side="left")
            hi_i = np.searchsorted(dists * b.radius.denominator,
                                   b.radius.numerator * L, side="right")
            radii = {Fraction(int(u), L) for u in dists[lo_i:hi_i]}
            radii.add(lo_num)        # bottom of the allowed range
            for rho in sorted(radii, reverse=True):
                radii_tested += 1
                mm = aug.member_mask(rho)
                msize = int(mm.sum())
                counts = _shift_counts(x.bits, mm, g)
                shift = int(counts.argmax())
                dens = Fraction(int(counts[shift]), msize)
                gap = dens - thr
                if best_gap is None or gap > best_gap:
                    best_gap = gap
                if dens > thr:
                    return SpreadCertificate(
                        "not_spread", float(gap),
                        counterexample={
                            "freqs": [list(ch.freqs) for ch in combo],
                            "radius": str(rho),
                            "shift": shift,
                        },
                        details={
                            "search": "pool-relative",
                            "density": float(dens),
                            "base_density": float(delta),
                            "threshold": float(thr),
                            "verified": True,
                        })
    return SpreadCertificate(
        "spread", float(-best_gap) if best_gap is not None else float(thr),
        details={
            "search": "pool-relative",
            "pool_size": len(pool),
            "candidates": candidates,
            "radii_tested": radii_tested,
            "base_density": float(delta),
            "verified": False,   # only the searched family was ruled out
        })


def bohr_spread_extract(x: SubsetInd, b: BohrSet, r: int, eta_s, eps: float,
                        pool: Sequence = ()):
    """Drive X to a pool-relative spread position by density increments.

    Returns (B', shift, X', trace). While the pool search finds a denser
    shifted sub-Bohr set, descend into it, regularize the radius with the
    pinned constant, and recenter on the best shift; each accepted step
    multiplies the density by at least 1 + eps/2, so the loop is bounded
    by log(1/delta0) / log(1+eps/2) steps. If no recentering preserves
    the increment the trace is flagged stalled, which the caller must
    treat as an unverified extraction.
    """
    g = b.group
    eps_f = Fraction(eps).limit_denominator(10 ** 6)
    if eps_f <= 0:
        raise ValueError("eps must be positive")
    bcur = b
    scur = 0
    xcur = x
    bmask = bcur.member_mask()
    delta = Fraction(int(xcur.bits.sum()), int(bmask.sum()))
    if delta == 0:
        raise ValueError("X must be nonempty")
    cap = int(math.floor(math.log(1 / float(delta))
                         / math.log(1 + float(eps_f) / 2))) + 2
    steps: list[dict[str, Any]] = []
    stalled = False
    final_cert = None
    for _ in range(cap):
        rel_idx = g.sub_indices(xcur.indices(), scur)
        xrel = SubsetInd.from_indices(g.order, rel_idx)
        cert = is_bohr_alg_spread(xrel, bcur, r, eta_s, eps, pool)
        if cert.spread:
            final_cert = cert
            break
        ce = cert.counterexample
        extra = [Character(g, tuple(f)) for f in ce["freqs"]]
        rho = Fraction(ce["radius"])
        braw = bcur.with_extra_freqs(extra, rho)
        s1 = int(g.add_indices(scur, int(ce["shift"])))
        m1 = braw.member_mask()
        x1_mask = xcur.bits & m1[g.sub_indices(np.arange(g.order), s1)]
        d1 = Fraction(int(x1_mask.sum()), int(m1.sum()))

        dprime = max(1, braw.dim)
        etap = eps_f * d1 / (BOHR_EXTRACT_REG_C * dprime)
        accepted = False
        if etap > 0 and braw.size() > 1:
            breg = find_regular_dilate(braw.dilate(etap))
            counts = _shift_counts(x1_mask, breg.member_mask(), g)
            y = int(counts.argmax())
            d2 = Fraction(int(counts[y]), breg.size())
            if d2 >= (1 + eps_f / 2) * delta:
                bcur = breg
                scur = y
                x1 = np.zeros(g.order, dtype=bool)
                sh = g.add_indices(breg.members(), y)
                x1[sh] = x1_mask[sh]
                xcur = SubsetInd(g.order, x1)
                delta = d2
                steps.append({"rank": bcur.dim, "radius": str(bcur.radius),
                              "density": float(delta), "regularized": True})
                accepted = True
        if not accepted:
            if d1 >= (1 + eps_f / 2) * delta:
                bcur, scur, delta = braw, s1, d1
                xcur = SubsetInd(g.order, x1_mask)
                steps.append({"rank": bcur.dim, "radius": str(bcur.radius),
                              "density": float(delta), "regularized": False})
            else:
                stalled = True
                break
    else:
        stalled = True
    trace = {
        "steps": steps,
        "stalled": stalled,
        "final_density": float(delta),
        "degenerate": bcur.size() == 1,
        "spread_certified": final_cert is not None,
    }
    return bcur, scur, xcur, trace


def _bohr_mean(vals: np.ndarray, mem: np.ndarray) -> float:
    return float(vals[mem].mean())


def _sum_mean(v1: np.ndarray, v2: np.ndarray, vg: np.ndarray,
              m1: np.ndarray, m2: np.ndarray, group: Group) -> float:
    """E_{x~B1, y~B2} v1(x) v2(y) vg(x+y), by one member-table pass."""
    tbl = group.add_indices(m1[:, None], m2[None, :])
    return float((v1[m1][:, None] * v2[m2][None, :] * vg[tbl]).mean())


def _check_unit_range(*fns: GroupFunction) -> None:
    for f in fns:
        v = np.asarray(f.values, dtype=float)
        if v.min() < -1e-12 or v.max() > 1 + 1e-12:
            raise ValueError("container checks need values in [0, 1]")


def _seq_eta_d(seq: BohrSequence) -> tuple[float, int]:
    eta = float(max(seq.ratios)) if seq.ratios else float(seq.eta)
    return eta, max(1, seq.sets[0].dim)


def _skipped(name: str, why: str, lhs: float, rhs: float,
             extra: Optional[dict] = None) -> InequalityReport:
    det = {"why": why}
    if extra:
        det.update(extra)
    return InequalityReport(name + "-skipped", lhs, rhs, relation="<=",
                            details=det)


def check_bohr_upper_bound(f1: GroupFunction, f2: GroupFunction,
                           g: GroupFunction, seq: BohrSequence,
                           K: int, eps: float) -> InequalityReport:
    """Bilinear sum bounded through the grid norm of g over the chain.

    E f1(x) f2(y) g(x+y) <= tau (1+3 eps) E[f1] E[f2] + error, where tau
    is the computed grid norm of g rooted over (B1, B3, B4) and the error
    carries the chain's eta and dimension with the pinned constant. The
    norm is computed, not assumed, so there is no skip branch.
    """
    if len(seq) < 4:
        raise ValueError("needs a chain of at least 4 sets")
    if K < 2 or K % 2:
        raise ValueError("K must be even and at least 2")
    _check_unit_range(f1, f2, g)
    group = seq.sets[0].group
    m1, m2 = seq.sets[0].members(), seq.sets[1].members()
    m3, m4 = seq.sets[2].members(), seq.sets[3].members()
    v1 = np.asarray(f1.values, dtype=float)
    v2 = np.asarray(f2.values, dtype=float)
    vg = np.asarray(g.values, dtype=float)
    tau = gowers_grid_norm(g, m1, m3, m4, K, K).value
    lhs = _sum_mean(v1, v2, vg, m1, m2, group)
    base = _bohr_mean(v1, m1) * _bohr_mean(v2, m2)
    eta, d = _seq_eta_d(seq)
    if tau > 0:
        err = BOHR_UPPER_ERR_C * (math.exp(-eps * K) + tau ** (-K * K) * eta * d)
    else:
        err = math.inf
    rhs = tau * (1 + 3 * eps) * base + err
    return InequalityReport(
        "bohr-upper", lhs, rhs, relation="<=",
        details={"tau": tau, "base": base, "eta": eta, "d": d, "K": K,
                 "eps": eps})


def _norm_hypothesis(f: GroupFunction, ma, mb, mc, K: int,
                     eps: float, mean: float) -> tuple[bool, float]:
    nv = gowers_grid_norm(f, ma, mb, mc, K, K).value
    return nv <= (1 + eps) * mean + 1e-12, nv


def check_bohr_conv_lower(f1: GroupFunction, f2: GroupFunction,
                          g: GroupFunction, seq: BohrSequence,
                          K: int, eps: float) -> InequalityReport:
    """Convolution sum close to its f2-averaged value under norm control.

    Hypotheses (checked, skip when violated): the grid norms of f1 over
    (B1, B4, B5) and of f2 over (B2, B4, B5) stay within (1+eps) of their
    plain means. Conclusion: |E f1(x) f2(y) g(x+y) - E[f1 g] E[f2]| is at
    most the pinned sqrt(eps) term plus the chain term (eta d)^(1/2K)
    plus the pinned residual, which absorbs what an asymptotic K would
    kill off.
    """
    if len(seq) < 5:
        raise ValueError("needs a chain of at least 5 sets")
    if K < 2 or K % 2:
        raise ValueError("K must be even and at least 2")
    _check_unit_range(f1, f2, g)
    group = seq.sets[0].group
    m1, m2 = seq.sets[0].members(), seq.sets[1].members()
    m4, m5 = seq.sets[3].members(), seq.sets[4].members()
    v1 = np.asarray(f1.values, dtype=float)
    v2 = np.asarray(f2.values, dtype=float)
    vg = np.asarray(g.values, dtype=float)
    e1, e2 = _bohr_mean(v1, m1), _bohr_mean(v2, m2)
    ok1, n1 = _norm_hypothesis(f1, m1, m4, m5, K, eps, e1)
    ok2, n2 = _norm_hypothesis(f2, m2, m4, m5, K, eps, e2)
    if not (ok1 and ok2):
        return _skipped("bohr-conv-lower", "norm hypothesis not met",
                        n1 if not ok1 else n2,
                        (1 + eps) * (e1 if not ok1 else e2),
                        {"norm_f1": n1, "norm_f2": n2, "e1": e1, "e2": e2})
    ones = np.ones_like(v2)
    full = _sum_mean(v1, v2, vg, m1, m2, group)
    f1g = _sum_mean(v1, ones, vg, m1, m2, group)
    eg = _sum_mean(np.ones_like(v1), ones, vg, m1, m2, group)
    lhs = abs(full - f1g * e2)
    eta, d = _seq_eta_d(seq)
    rhs = (BOHR_CONV_SQRT_C * math.sqrt(eps) * e1 * e2 * eg
           + BOHR_CONV_ETA_C * (eta * d) ** (1 / (2 * K))
           + BOHR_CONV_RESIDUAL_C)
    return InequalityReport(
        "bohr-conv-lower", lhs, rhs, relation="<=",
        details={"full": full, "f1g": f1g, "e1": e1, "e2": e2, "eg": eg,
                 "norm_f1": n1, "norm_f2": n2, "eta": eta, "d": d, "K": K,
                 "eps": eps})


def check_bohr_conv_lower_2(f1: GroupFunction, f2: GroupFunction,
                            g: GroupFunction, seq: BohrSequence,
                            K: int, eps: float) -> InequalityReport:
    """Product form of the convolution bound: f1, f2 on B1 and g on B2.

    Same hypotheses and error budget as check_bohr_conv_lower, with both
    norm conditions taken over (B1, B4, B5) and the conclusion comparing
    E f1(x) g(y) f2(x+y) against the product of the three means.
    """
    if len(seq) < 5:
        raise ValueError("needs a chain of at least 5 sets")
    if K < 2 or K % 2:
        raise ValueError("K must be even and at least 2")
    _check_unit_range(f1, f2, g)
    group = seq.sets[0].group
    m1, m2 = seq.sets[0].members(), seq.sets[1].members()
    m4, m5 = seq.sets[3].members(), seq.sets[4].members()
    v1 = np.asarray(f1.values, dtype=float)
    v2 = np.asarray(f2.values, dtype=float)
    vg = np.asarray(g.values, dtype=float)
    e1, e2 = _bohr_mean(v1, m1), _bohr_mean(v2, m1)
    eg = _bohr_mean(vg, m2)
    ok1, n1 = _norm_hypothesis(f1, m1, m4, m5, K, eps, e1)
    ok2, n2 = _norm_hypothesis(f2, m1, m4, m5, K, eps, e2)
    if not (ok1 and ok2):
        return _skipped("bohr-conv-lower-2", "norm hypothesis not met",
                        n1 if not ok1 else n2,
                        (1 + eps) * (e1 if not ok1 else e2),
                        {"norm_f1": n1, "norm_f2": n2, "e1": e1, "e2": e2})
    lhs_sum = _sum_mean(v1, vg, v2, m1, m2, group)
    lhs = abs(lhs_sum - e1 * e2 * eg)
    eta, d = _seq_eta_d(seq)
    rhs = (BOHR_CONV_SQRT_C * math.sqrt(eps) * e1 * e2 * eg
           + BOHR_CONV_ETA_C * (eta * d) ** (1 / (2 * K))
           + BOHR_CONV_RESIDUAL_C)
    return InequalityReport(
        "bohr-conv-lower-2", lhs, rhs, relation="<=",
        details={"sum": lhs_sum, "e1": e1, "e2": e2, "eg": eg,
                 "norm_f1": n1, "norm_f2": n2, "eta": eta, "d": d, "K": K,
                 "eps": eps})


def check_bohr_product_spread(f: GroupFunction, g: GroupFunction,
                              seq: BohrSequence, K: int,
                              eps: float) -> InequalityReport:
    """Mixed sum factorizes when f has a tame norm and g is L1-spread.

    Hypotheses (skip when violated): grid norm of f over (B1, B3, B4)
    within (1+eps) of its mean, and g L1-spread for the pair (B1, B4) at
    eps. Conclusion: |E_{x~B1,y~B2} f(x) g(x+y) - E[f] E[g]| within the
    pinned sqrt(eps), chain, and residual terms.
    """
    if len(seq) < 4:
        raise ValueError("needs a chain of at least 4 sets")
    if K < 2 or K % 2:
        raise ValueError("K must be even and at least 2")
    _check_unit_range(f, g)
    group = seq.sets[0].group
    m1, m2 = seq.sets[0].members(), seq.sets[1].members()
    m3, m4 = seq.sets[2].members(), seq.sets[3].members()
    vf = np.asarray(f.values, dtype=float)
    vg = np.asarray(g.values, dtype=float)
    ef = _bohr_mean(vf, m1)
    eg = _bohr_mean(vg, m1)
    okf, nf = _norm_hypothesis(f, m1, m3, m4, K, eps, ef)
    if not okf:
        return _skipped("bohr-product-spread", "norm hypothesis not met",
                        nf, (1 + eps) * ef, {"norm_f": nf, "ef": ef})
    cert = is_l1_spread(g, seq.sets[0], seq.sets[3], eps)
    if not cert.spread:
        return _skipped("bohr-product-spread", "g is not L1-spread",
                        cert.margin, 0.0, {"ef": ef, "eg": eg})
    lhs_sum = _sum_mean(vf, np.ones_like(vg), vg, m1, m2, group)
    lhs = abs(lhs_sum - ef * eg)
    eta, d = _seq_eta_d(seq)
    rhs = (BOHR_CONV_SQRT_C * math.sqrt(eps) * ef * eg
           + BOHR_CONV_ETA_C * (eta * d) ** (1 / (2 * K))
           + BOHR_PRODUCT_RESIDUAL_C)
    return InequalityReport(
        "bohr-product-spread", lhs, rhs, relation="<=",
        details={"sum": lhs_sum, "ef": ef, "eg": eg, "norm_f": nf,
                 "eta": eta, "d": d, "K": K, "eps": eps})
