"""Independent brute-force oracles.

Nothing in this file imports from cornerslab. Every function here is a
from-scratch reimplementation used to cross-check the package's fast paths;
keeping the two routes disjoint is the point, so resist the urge to share
helpers with the package even where it would be convenient.

All group work is done on coordinate tuples over an explicit factor list,
all expectations are plain Python sums, and anything that needs to be exact
uses fractions.Fraction.
"""
from __future__ import annotations

import itertools
from fractions import Fraction


# ---------------------------------------------------------------------------
# tiny abelian-group toolkit (tuples over a factor list)


def elements(factors):
    return list(itertools.product(*[range(f) for f in factors]))


def add(factors, a, b):
    return tuple((x + y) % f for x, y, f in zip(a, b, factors))


def sub(factors, a, b):
    return tuple((x - y) % f for x, y, f in zip(a, b, factors))


def flat(factors, a):
    # row-major, first factor most significant (matches numpy C order)
    idx = 0
    for x, f in zip(a, factors):
        idx = idx * f + x
    return idx


# ---------------------------------------------------------------------------
# corners and the trilinear form


def naive_phi(factors, f1, f2, f3):
    """E_{x,y,z}[f1(x,y) f2(z-y,y) f3(x,z-x)] by the literal triple loop.

    f1, f2, f3 are dicts keyed by pairs of coordinate tuples (or any mapping
    supporting [(a, b)]). Returns a Fraction when the inputs are integral.
    """
    els = elements(factors)
    total = 0
    for x in els:
        for y in els:
            for z in els:
                total += (
                    f1[(x, y)]
                    * f2[(sub(factors, z, y), y)]
                    * f3[(x, sub(factors, z, x))]
                )
    n = len(els)
    return Fraction(total, n**3) if isinstance(total, int) else total / n**3


def naive_count_corners(factors, A):
    """Ordered corner count over a finite abelian group, d != 0.

    A is a set of pairs of coordinate tuples. Counts triples (x, y, d) with
    (x,y), (x+d,y), (x,y+d) all in A. Also returns the first witness in
    lexicographic flat-index order (x, then y, then d) or None.
    """
    els = elements(factors)
    count = 0
    witness = None
    for x in els:
        for y in els:
            if (x, y) not in A:
                continue
            for d in els:
                if all(v == 0 for v in d):
                    continue
                if (add(factors, x, d), y) in A and (x, add(factors, y, d)) in A:
                    count += 1
                    if witness is None:
                        witness = (x, y, d)
    return count, witness


def naive_count_corners_grid(N, A):
    """Integer-grid ordered corner count, both signs of d, no wraparound."""
    count = 0
    witness = None
    for x in range(N):
        for y in range(N):
            if (x, y) not in A:
                continue
            for d in range(-(N - 1), N):
                if d == 0:
                    continue
                if 0 <= x + d < N and 0 <= y + d < N:
                    if (x + d, y) in A and (x, y + d) in A:
                        count += 1
                        if witness is None:
                            witness = (x, y, d)
    return count, witness


# ---------------------------------------------------------------------------
# grid norms, the slow way


def naive_grid_norm_power(A, k, l):
    """E over all k-tuples of rows and l-tuples of columns of the product.

    A is a list of lists (rows x cols). Returns the kl-power, not the root,
    as an exact Fraction when entries are integral.
    """
    rows = range(len(A))
    cols = range(len(A[0]))
    total = Fraction(0)
    for xs in itertools.product(rows, repeat=k):
        for ys in itertools.product(cols, repeat=l):
            p = Fraction(1)
            for x in xs:
                for y in ys:
                    p *= Fraction(A[x][y]) if not isinstance(A[x][y], Fraction) else A[x][y]
            total += p
    return total / (len(A) ** k * len(A[0]) ** l)


def naive_grid_norm(A, k, l):
    p = naive_grid_norm_power(A, k, l)
    return abs(float(p)) ** (1.0 / (k * l))


def naive_gowers_grid_norm_power(f, B1, B2, B3, k, l, factors):
    """E_{x in B1, y_i in B2, z_j in B3} prod f(x + y_i + z_j), exact.

    f is a dict keyed by coordinate tuples, B1/B2/B3 are lists of tuples.
    """
    total = Fraction(0)
    for x in B1:
        for ys in itertools.product(B2, repeat=k):
            for zs in itertools.product(B3, repeat=l):
                p = Fraction(1)
                for y in ys:
                    for z in zs:
                        v = f[add(factors, add(factors, x, y), z)]
                        p *= Fraction(v) if not isinstance(v, Fraction) else v
                total += p
    return total / (len(B1) * len(B2) ** k * len(B3) ** l)


# ---------------------------------------------------------------------------
# convolution


def naive_convolve(factors, f, g):
    """(f * g)(x) = E_y f(y) g(x - y), dense dicts keyed by tuples."""
    els = elements(factors)
    n = len(els)
    out = {}
    for x in els:
        s = 0.0
        for y in els:
            s += f[y] * g[sub(factors, x, y)]
        out[x] = s / n
    return out


# ---------------------------------------------------------------------------
# progression-free sets


def is_apfree(S):
    """No x < z in S with (x+z)/2 in S. The middle is strictly between the
    endpoints, so distinctness is automatic. O(|S|^2)."""
    mem = set(S)
    lst = sorted(mem)
    for i, x in enumerate(lst):
        for z in lst[i + 1:]:
            if (x + z) % 2 == 0 and (x + z) // 2 in mem:
                return False
    return True


def max_apfree(N):
    """Exhaustive maximum size of a 3-AP-free subset of {0..N-1}, N <= 24ish.

    DFS over elements in increasing order; including i only needs checks
    against already-chosen pairs, and we prune on the remaining-count bound.
    """
    best = 0
    chosen = []
    chosen_set = set()

    def ok(i):
        for j in chosen:
            # j is the middle: third point 2j - i
            t = 2 * j - i
            if 0 <= t and t in chosen_set:
                return False
            # i and j are endpoints: middle (i+j)/2
            if (i + j) % 2 == 0 and (i + j) // 2 in chosen_set:
                return False
        return True

    def dfs(i):
        nonlocal best
        if len(chosen) + (N - i) <= best:
            return
        if i == N:
            best = max(best, len(chosen))
            return
        if ok(i):
            chosen.append(i)
            chosen_set.add(i)
            dfs(i + 1)
            chosen.pop()
            chosen_set.remove(i)
        dfs(i + 1)

    dfs(0)
    return best


# ---------------------------------------------------------------------------
# sifting witnesses, checked with plain loops


def witness_eval(f, g1, g2):
    """(E[f g1 g2], E[g1], E[g2], achieved ratio) with Python-float sums.

    f is rows x cols (list of lists); g1, g2 are sequences over rows / cols.
    Shares nothing with the package's evaluator on purpose.
    """
    n1, n2 = len(f), len(f[0])
    num = 0.0
    for x in range(n1):
        gx = g1[x]
        if gx == 0:
            continue
        row = f[x]
        for y in range(n2):
            num += gx * row[y] * g2[y]
    num /= n1 * n2
    e1 = sum(g1) / n1
    e2 = sum(g2) / n2
    achieved = num / (e1 * e2) if e1 > 0 and e2 > 0 else float("nan")
    return num, e1, e2, achieved


def witness_eval_exact(f, g1, g2):
    """Same as witness_eval but exact over Fractions (f integral or Fraction)."""
    n1, n2 = len(f), len(f[0])
    num = Fraction(0)
    for x in range(n1):
        for y in range(n2):
            num += Fraction(g1[x]) * Fraction(f[x][y]) * Fraction(g2[y])
    num /= n1 * n2
    e1 = Fraction(sum(g1), n1)
    e2 = Fraction(sum(g2), n2)
    return num, e1, e2


# ---------------------------------------------------------------------------
# spreadness by full enumeration (tiny sides only)


def naive_comb_spread(T, tau, gamma):
    """Max of E[T g1 g2] - tau E[g1] E[g2] over nonempty boolean pairs.

    T is rows x cols 0/1. Exponential in both sides; keep sides <= 12.
    Returns (best_value, best_g1, best_g2); spread iff best <= gamma.
    """
    n1, n2 = len(T), len(T[0])
    best = (0.0, None, None)
    for m1 in range(1, 1 << n1):
        g1 = [(m1 >> i) & 1 for i in range(n1)]
        for m2 in range(1, 1 << n2):
            g2 = [(m2 >> i) & 1 for i in range(n2)]
            num, e1, e2, _ = witness_eval(T, g1, g2)
            v = num - tau * e1 * e2
            if v > best[0]:
                best = (v, g1, g2)
    return best


def naive_asym_spread(f, s, t, eps):
    """Max of E[f g1 g2] - (1+eps) E[f] E[g1] E[g2] over boolean pairs with
    E[g1] >= 2^-s, E[g2] >= 2^-t. Sides <= 12."""
    n1, n2 = len(f), len(f[0])
    ef = sum(sum(r) for r in f) / (n1 * n2)
    best = (0.0, None, None)
    for m1 in range(1, 1 << n1):
        g1 = [(m1 >> i) & 1 for i in range(n1)]
        if sum(g1) * (2**s) < n1:
            continue
        for m2 in range(1, 1 << n2):
            g2 = [(m2 >> i) & 1 for i in range(n2)]
            if sum(g2) * (2**t) < n2:
                continue
            num, e1, e2, _ = witness_eval(f, g1, g2)
            v = num - (1 + eps) * ef * e1 * e2
            if v > best[0]:
                best = (v, g1, g2)
    return best


# ---------------------------------------------------------------------------
# F2 linear algebra (bitmask vectors), for subspace counting oracles


def gaussian_binomial(n, k):
    """Number of k-dimensional subspaces of F2^n."""
    num = 1
    den = 1
    for i in range(k):
        num *= 2 ** (n - i) - 1
        den *= 2 ** (k - i) - 1
    assert num % den == 0
    return num // den


def f2_span(vectors):
    """All XOR combinations of the given bitmask vectors."""
    out = {0}
    for v in vectors:
        out |= {x ^ v for x in out}
    return out


def affine_subspace_count(n, max_codim):
    """Number of affine subspaces of F2^n with codimension <= max_codim."""
    total = 0
    for c in range(max_codim + 1):
        total += gaussian_binomial(n, n - c) * 2**c
    return total


# ---------------------------------------------------------------------------
# 3D corner scan (independent of the package's)


def naive_mono_3dcorner(factors, coloring):
    """First monochromatic 3D corner in a coloring of G^3, or None.

    coloring maps coordinate-tuple triples to an int color or None for
    uncolored. A corner is (x,y,z), (x+d,y,z), (x,y+d,z), (x,y,z+d), d != 0,
    all colored the same actual color.
    """
    els = elements(factors)
    for x in els:
        for y in els:
            for z in els:
                c = coloring.get((x, y, z))
                if c is None:
                    continue
                for d in els:
                    if all(v == 0 for v in d):
                        continue
                    if (
                        coloring.get((add(factors, x, d), y, z)) == c
                        and coloring.get((x, add(factors, y, d), z)) == c
                        and coloring.get((x, y, add(factors, z, d))) == c
                    ):
                        return (x, y, z, d)
    return None


# ---------------------------------------------------------------------------
# nonabelian scans on raw multiplication tables


def naive_bmz_corner(mul, A, variant="bmz"):
    """First corner in A under a multiplication table, or None.

    mul is an n x n list of lists; A a set of index pairs. Variant "bmz"
    looks for (x,y), (xg,y), (x,gy); "naive" for (x,y), (xg,y), (x,yg).
    Identity is assumed to be whatever e satisfies mul[e][x] == x for all x.
    """
    n = len(mul)
    idents = [e for e in range(n) if all(mul[e][x] == x for x in range(n))]
    assert len(idents) == 1
    e = idents[0]
    for x in range(n):
        for y in range(n):
            if (x, y) not in A:
                continue
            for g in range(n):
                if g == e:
                    continue
                p2 = (mul[x][g], y)
                p3 = (x, mul[g][y]) if variant == "bmz" else (x, mul[y][g])
                if p2 in A and p3 in A:
                    return (x, y, g)
    return None


# ---------------------------------------------------------------------------
# Bohr sets over Z/N with exact rational radii


def bohr_members_oracle(N, freqs, radius):
    """Members of the Bohr set in Z/N for frequency list freqs, Fraction radius."""
    out = []
    for x in range(N):
        ok = True
        for r in freqs:
            v = Fraction(r * x, N) % 1
            if min(v, 1 - v) > radius:
                ok = False
                break
        if ok:
            out.append(x)
    return out


def bohr_regular_oracle(N, freqs, radius, d_override=None):
    """Complete regularity check for the Bohr set, reimplemented from scratch.

    Size S(c) = |Bohr(freqs, (1+c) radius)| must lie within
    [1 - 100 d |c|, 1 + 100 d |c|] times S(0) for all |c| <= 1/(100 d).
    The map c -> S(c) is a right-continuous step function whose jumps sit at
    c = dist/radius - 1 over attained distances dist, so checking every jump
    plus the left window edge is a complete verification.
    """
    d = d_override if d_override is not None else len(freqs)
    w = Fraction(1, 100 * d)

    def size(rho):
        return len(bohr_members_oracle(N, freqs, rho))

    s0 = size(radius)
    if s0 == 0:
        return False
    dists = set()
    for x in range(N):
        for r in freqs:
            v = Fraction(r * x, N) % 1
            dists.add(min(v, 1 - v))
    points = set()
    for dist in dists:
        c = dist / radius - 1
        if -w <= c <= w:
            points.add(c)
    points.add(-w)
    points.add(w)
    for c in sorted(points):
        s = size((1 + c) * radius)
        if c >= 0:
            if s > (1 + 100 * d * c) * s0:
                return False
        if c <= 0:
            if s < (1 - 100 * d * (-c)) * s0:
                return False
    return True
