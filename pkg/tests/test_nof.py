"""Exactly-N protocol compiler and cylinder restriction against brute oracles."""
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

import oracles
from cornerslab.corners import behrend_apfree, cornerfree_from_apfree, count_corners
from cornerslab.group import Group
from cornerslab.nof import (
    CflProtocol,
    Coloring,
    CylinderIntersection,
    coloring_from_cornerfree,
    compile_cfl_protocol,
    corner_injection_report,
    exactly_n,
    find_mono_3dcorner,
    restrict_cylinder,
)
from cornerslab.setfun import SubsetInd


def behrend_plane(n):
    """A corner-free subset of [n]^2 sitting in the [n//4]^2 corner."""
    m = max(1, n // 4)
    b, _ = behrend_apfree(m)
    small = cornerfree_from_apfree(m, b).bits.reshape(m, m)
    big = np.zeros((n, n), dtype=bool)
    big[:m, :m] = small
    return SubsetInd(n * n, big.reshape(-1))


def coloring_dict(col):
    """The oracle-side view: coordinate tuples to color or None."""
    g = col.group
    out = {}
    for idx, c in np.ndenumerate(col.colors):
        key = tuple(g.index_to_coords(i) for i in idx)
        out[key] = int(c) if c >= 0 else None
    return out


def compiled(n, seed=0):
    return compile_cfl_protocol(coloring_from_cornerfree(behrend_plane(n), seed))


# ---------------------------------------------------------------------------
# the reference predicate


def test_exactly_n_examples():
    assert exactly_n(1, 1, 2, 4)
    assert not exactly_n(1, 1, 1, 4)


def test_exactly_n_exhaustive_16():
    for x, y, z in itertools.product(range(16), repeat=3):
        assert exactly_n(x, y, z, 16) == (x + y + z == 16)


def test_exactly_n_range_errors():
    with pytest.raises(ValueError, match="outside"):
        exactly_n(4, 0, 0, 4)
    with pytest.raises(ValueError, match="outside"):
        exactly_n(0, -1, 0, 4)
    with pytest.raises(ValueError, match="positive"):
        exactly_n(0, 0, 0, 0)


# ---------------------------------------------------------------------------
# translate coverings


def test_single_cell_grid_one_color():
    col = coloring_from_cornerfree(SubsetInd.full(1), seed=3)
    assert col.num_colors == 1 and col.colors[0, 0] == 0


def test_full_grid_rejected_beyond_one():
    with pytest.raises(ValueError, match="corner"):
        coloring_from_cornerfree(SubsetInd.full(4), seed=0)


def test_classes_cornerfree_n8():
    col = coloring_from_cornerfree(behrend_plane(8), seed=11)
    assert col.uncolored_count == 0
    assert col.details["mode"] == "cyclic"
    for c in range(col.num_colors):
        cells = {divmod(int(i), 8) for i in col.class_cells(c)}
        count, _ = oracles.naive_count_corners_grid(8, cells)
        assert count == 0
    sizes = sum(len(col.class_cells(c)) for c in range(col.num_colors))
    assert sizes == 64


def test_color_count_within_bound_100_seeds():
    a = behrend_plane(8)
    for seed in range(100):
        col = coloring_from_cornerfree(a, seed)
        assert col.details["within_bound"]
        assert col.num_colors == (col.details["productive"]
                                  + col.details["singletons"])


def test_integer_translate_fallback():
    # corner-free on the integer grid but cornered cyclically (the corner
    # (3,0), (1,0), (3,4) wraps in x only), so the covering must not wrap
    n = 6
    a = SubsetInd.from_indices(n * n, [3 * n + 0, 1 * n + 0, 3 * n + 4])
    assert count_corners(Group((n,)), a).total > 0
    col = coloring_from_cornerfree(a, seed=5)
    assert col.details["mode"] == "integer"
    assert col.uncolored_count == 0
    for c in range(col.num_colors):
        cells = {divmod(int(i), n) for i in col.class_cells(c)}
        count, _ = oracles.naive_count_corners_grid(n, cells)
        assert count == 0


def test_coloring_argument_errors():
    with pytest.raises(ValueError, match="empty"):
        coloring_from_cornerfree(SubsetInd.empty(16), seed=0)
    with pytest.raises(ValueError, match="grid"):
        coloring_from_cornerfree(SubsetInd.full(12), seed=0)
    bad = SubsetInd.from_indices(16, [0, 1, 4])  # (0,0), (0,1), (1,0)
    with pytest.raises(ValueError, match="corner"):
        coloring_from_cornerfree(bad, seed=0)


def test_coloring_type_checks():
    with pytest.raises(ValueError, match="colors must lie"):
        Coloring(np.full((2, 2), 5), 4)
    with pytest.raises(ValueError, match="one color"):
        Coloring(np.zeros((2, 2), dtype=int), 0)
    with pytest.raises(ValueError, match="group order"):
        Coloring(np.zeros((3, 3, 3), dtype=int), 1, group=Group((4,)))
    col = Coloring(np.array([[0, 1], [1, 0]]), 2)
    assert list(col.class_cells(1)) == [1, 2]
    gone = col.recolor(1)
    assert gone.uncolored_count == 2 and gone.num_colors == 2


# ---------------------------------------------------------------------------
# the compiled protocol


def test_compile_matches_arithmetic_by_replay():
    proto = compiled(8)
    assert proto.details["verified"]["ok"]
    for x, y, z in itertools.product(range(8), repeat=3):
        t1 = proto.run(x, y, z)
        t2 = proto.run(x, y, z)
        assert t1 == t2  # replay determinism
        assert (t1.verdict == "accept") == exactly_n(x, y, z, 8)


def test_accepting_transcripts_use_full_budget():
    proto = compiled(16, seed=2)
    bound = 3 * (math.ceil(math.log2(proto.coloring.num_colors)) + 1)
    assert proto.bits_bound() <= bound
    seen_accept = False
    for x, y, z in itertools.product(range(16), repeat=3):
        t = proto.run(x, y, z)
        assert t.bits_total <= bound
        if t.verdict == "accept":
            assert t.bits_total == proto.bits_bound()
            seen_accept = True
    assert seen_accept


def test_sum_equal_n_always_accepts():
    proto = compiled(12, seed=4)
    for x in range(12):
        for y in range(12 - x):
            z = 12 - x - y
            if z < 12:
                assert proto.decide(x, y, z)


def test_out_of_range_rejects_before_colors():
    proto = compiled(8)
    # y + z > N puts player 1's point left of the grid
    t = proto.run(0, 7, 7)
    assert t.verdict == "reject"
    assert t.messages == ((1, "0"),)
    # player 1 fine, player 2's point out of range: x + z > N
    t2 = proto.run(7, 0, 7)
    assert t2.messages[0][1].startswith("1")
    assert t2.messages[1] == (2, "0")
    assert len(t2.messages) == 2


def test_nondeterministic_cost_accounting():
    proto = compiled(8)
    assert proto.bits_bound(nondeterministic=True) == proto.color_bits + 3
    assert proto.bits_bound() == 3 * (proto.color_bits + 1)


def test_compile_argument_errors():
    partial = Coloring(np.array([[0, -1], [0, 0]]), 1)
    with pytest.raises(ValueError, match="total"):
        compile_cfl_protocol(partial)
    cornered = np.ones((4, 4), dtype=int)
    cornered[0, 0] = cornered[1, 0] = cornered[0, 1] = 0
    with pytest.raises(ValueError, match="class 0"):
        compile_cfl_protocol(Coloring(cornered, 2))
    cube = Coloring(np.zeros((2, 2, 2), dtype=int), 1, group=Group((2,)))
    with pytest.raises(ValueError, match="plane"):
        compile_cfl_protocol(cube)


PROTO8 = compiled(8, seed=9)


@settings(max_examples=120, deadline=None)
@given(hst.integers(0, 7), hst.integers(0, 7), hst.integers(0, 7),
       hst.integers(0, 7))
def test_visibility_own_input_never_read(x, x2, y, z):
    # player 1 cannot see x: its message is a function of (y, z) alone
    t1 = PROTO8.run(x, y, z)
    t2 = PROTO8.run(x2, y, z)
    assert t1.messages[0] == t2.messages[0]


@settings(max_examples=120, deadline=None)
@given(hst.integers(0, 7), hst.integers(0, 7), hst.integers(0, 7),
       hst.integers(0, 7))
def test_visibility_player_two(x, y, y2, z):
    # changing y may change player 1's broadcast; while it does not,
    # player 2's message must stay fixed as well
    t1 = PROTO8.run(x, y, z)
    t2 = PROTO8.run(x, y2, z)
    if t1.messages[0] == t2.messages[0]:
        if len(t1.messages) > 1 and len(t2.messages) > 1:
            assert t1.messages[1] == t2.messages[1]


# ---------------------------------------------------------------------------
# cube colorings


def test_mono_corner_trivial_cases():
    g = Group((3,))
    one = Coloring(np.zeros((3, 3, 3), dtype=int), 1, group=g)
    assert find_mono_3dcorner(one) == (0, 0, 0, 1)
    distinct = Coloring(np.arange(27).reshape(3, 3, 3), 27, group=g)
    assert find_mono_3dcorner(distinct) is None


def test_mono_corner_matches_oracle():
    g = Group((6,))
    for seed in range(5):
        rng = np.random.default_rng(seed)
        arr = rng.integers(0, 3, size=(6, 6, 6))
        arr[rng.random((6, 6, 6)) < 0.1] = -1
        col = Coloring(arr, 3, group=g)
        got = find_mono_3dcorner(col)
        want = oracles.naive_mono_3dcorner((6,), coloring_dict(col))
        if want is None:
            assert got is None
        else:
            wx, wy, wz, wd = want
            assert got == (wx[0], wy[0], wz[0], wd[0])


def test_mono_corner_guards():
    with pytest.raises(ValueError, match="cube"):
        find_mono_3dcorner(Coloring(np.zeros((2, 2), dtype=int), 1))
    big = Group((17,))
    with pytest.raises(ValueError, match="capped"):
        find_mono_3dcorner(Coloring(np.zeros((17,) * 3, dtype=int), 1,
                                    group=big))


def test_cylinder_membership_is_three_constraints():
    g = Group((4,))
    rng = np.random.default_rng(8)
    cyl = CylinderIntersection(
        g, SubsetInd(16, rng.random(16) < 0.6),
        SubsetInd(16, rng.random(16) < 0.6),
        SubsetInd(16, rng.random(16) < 0.6))
    m = cyl.membership()
    for x, y, z in itertools.product(range(4), repeat=3):
        expect = (cyl.s_xy.bits[4 * x + y] and cyl.s_yz.bits[4 * y + z]
                  and cyl.s_xz.bits[4 * x + z])
        assert m[x, y, z] == expect == cyl.contains(x, y, z)


def test_json_roundtrips():
    g = Group((2, 2))
    cyl = CylinderIntersection.full(g)
    back = CylinderIntersection.from_json(cyl.to_json())
    assert back.g.factors == (2, 2) and back.cardinality == 64
    col = Coloring(np.arange(16).reshape(4, 4), 16)
    col2 = Coloring.from_json(col.to_json())
    assert (col2.colors == col.colors).all() and col2.group is None


# ---------------------------------------------------------------------------
# cylinder restriction


def diff_coloring(n):
    """color(x, y, z) = x - y, which no corner can hold fixed."""
    xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    plane = (xs - ys) % n
    return Coloring(np.repeat(plane[:, :, None], n, axis=2), n,
                    group=Group((n,)))


def test_restrict_difference_coloring():
    g = Group((4,))
    a = CylinderIntersection.full(g)
    col = diff_coloring(4)
    aprime, c, rep = restrict_cylinder(a, col)
    assert (c, rep.details["g"]) == (0, 0)
    assert rep.details["t_size"] == 4  # a full diagonal
    assert Fraction(rep.details["t_size"]) >= Fraction(rep.details["floor"])
    assert rep.holds
    assert not (aprime.membership() & ~a.membership()).any()
    after = col.recolor(c)
    assert after.uncolored_count == col.uncolored_count + 16


def test_restrict_two_coloring_found_by_search():
    # exhaustive sweep of the 16 difference patterns h((x - y) mod 4); the
    # valid two-color ones exist and drive a full restriction step
    n = 4
    g = Group((n,))
    xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    valid = []
    for bits in itertools.product((0, 1), repeat=n):
        if len(set(bits)) < 2:
            continue
        plane = np.asarray(bits)[(xs - ys) % n]
        col = Coloring(np.repeat(plane[:, :, None], n, axis=2), 2, group=g)
        if find_mono_3dcorner(col) is None:
            valid.append(col)
    assert valid
    a = CylinderIntersection.full(g)
    aprime, c, rep = restrict_cylinder(a, valid[0])
    assert rep.holds
    assert rep.details["t_size"] * 2 * n >= a.cardinality  # tight pigeonhole
    inj = corner_injection_report(aprime, rep.details["g"])
    assert inj.holds


def test_restrict_precondition_witness():
    g = Group((3,))
    a = CylinderIntersection.full(g)
    one = Coloring(np.zeros((3, 3, 3), dtype=int), 1, group=g)
    with pytest.raises(ValueError, match=r"corner \(0, 0, 0, 1\)"):
        restrict_cylinder(a, one)


def test_restrict_all_singletons_trivial():
    g = Group((3,))
    a = CylinderIntersection.full(g)
    col = Coloring(np.arange(27).reshape(3, 3, 3), 27, group=g)
    aprime, c, rep = restrict_cylinder(a, col)
    assert rep.details["t_size"] == 1
    assert rep.holds


def test_restrict_injection_positive_instance():
    # three cells of one color on the g = 0 slice whose XY projections hold
    # a corner; the injected fourth point (0,0,3) lands in A' off the slice
    n = 4
    g = Group((n,))
    colors = 1 + np.arange(n ** 3, dtype=np.int64).reshape(n, n, n)
    for x, y in ((0, 0), (1, 0), (0, 1)):
        colors[x, y, (-x - y) % n] = 0
    col = Coloring(colors, n ** 3 + 1, group=g)
    a = CylinderIntersection.full(g)
    aprime, c, rep = restrict_cylinder(a, col)
    assert c == 0 and rep.details["g"] == 0
    assert rep.details["t_size"] == 3
    inj = corner_injection_report(aprime, 0)
    assert inj.details["corners"] == 1
    assert inj.details["images_verified"] == 1
    assert inj.holds
    assert aprime.contains(0, 0, 3)


def oracle_best_slice(a, col):
    """Brute maximizer of |T|, first in (c, g) scan order."""
    g = a.g
    n = g.order
    m = a.membership()
    best = (-1, -1, -1)
    for c in range(col.num_colors):
        for gv in range(n):
            size = 0
            for x in range(n):
                for y in range(n):
                    z = int(g.sub_indices(gv, g.add_indices(x, y)))
                    if m[x, y, z] and col.colors[x, y, z] == c:
                        size += 1
            if size > best[0]:
                best = (size, c, gv)
    return best


def test_restrict_random_instances_match_oracle():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = int(rng.choice([4, 5, 6]))
        g = Group((n,))
        a = CylinderIntersection(
            g, SubsetInd(n * n, rng.random(n * n) < 0.8),
            SubsetInd(n * n, rng.random(n * n) < 0.8),
            SubsetInd(n * n, rng.random(n * n) < 0.8))
        ell = int(rng.integers(n * n, 2 * n * n))
        while True:
            arr = rng.integers(0, ell, size=(n, n, n))
            arr[rng.random((n, n, n)) < 0.15] = -1
            col = Coloring(arr, ell, group=g)
            try:
                aprime, c, rep = restrict_cylinder(a, col)
                break
            except ValueError:
                continue
        size, oc, og = oracle_best_slice(a, col)
        assert (size, oc, og) == (rep.details["t_size"], c, rep.details["g"])
        m, mp = a.membership(), aprime.membership()
        assert not (mp & ~m).any()
        u = rep.details["u"]
        assert u == int((m & (col.colors == -1)).sum())
        assert Fraction(size) >= Fraction(int(m.sum()) - u, ell * n)
        cstar = int((mp & ((col.colors == c) | (col.colors == -1))).sum())
        assert cstar == rep.lhs <= u + n * n
        inj = corner_injection_report(aprime, rep.details["g"])
        cnt, _ = oracles.naive_count_corners(
            (n,), {(g.index_to_coords(i // n), g.index_to_coords(i % n))
                   for i in aprime.s_xy.indices()})
        assert inj.details["corners"] == cnt
        assert inj.holds


def test_restrict_guards():
    g13 = Group((13,))
    a = CylinderIntersection.full(g13)
    col13 = Coloring(np.arange(13 ** 3).reshape(13, 13, 13), 13 ** 3,
                     group=g13)
    with pytest.raises(ValueError, match="capped"):
        restrict_cylinder(a, col13)
    g = Group((4,))
    with pytest.raises(ValueError, match="cylinder's group"):
        restrict_cylinder(CylinderIntersection.full(g), diff_coloring(5))
    with pytest.raises(ValueError, match="flat group index"):
        corner_injection_report(CylinderIntersection.full(g), 99)
