"""Grid norms against full multi-fold summation, plus the inequality checks."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerslab.gridnorm import (
    GridNormParams,
    check_gowers_holder,
    check_monotonicity,
    gowers_grid_norm,
    grid_norm,
    grid_norm_2k,
)
from cornerslab.group import Group
from cornerslab.setfun import GridFunction, GroupFunction

import oracles


def test_constant_explicit():
    a = GridFunction(np.full((5, 7), 0.6))
    for k, l in [(1, 1), (2, 2), (2, 5), (3, 3)]:
        r = grid_norm(a, GridNormParams(k, l))
        assert r.value == pytest.approx(0.6, abs=1e-12)
    assert grid_norm_2k(a, 9).value == pytest.approx(0.6, abs=1e-12)


def test_rectangle_indicator():
    # row density 1/2, column density 1/4, k = l = 2
    a = np.zeros((4, 8))
    a[:2, :2] = 1.0
    r = grid_norm(GridFunction(a), GridNormParams(2, 2))
    sigma, tau = 0.5, 0.25
    assert r.value == pytest.approx((sigma ** 2 * tau ** 2) ** 0.25, abs=1e-12)
    assert r.value == pytest.approx(0.3535533905932738, abs=1e-12)


def test_single_full_row():
    n1, n2 = 6, 5
    a = np.zeros((n1, n2))
    a[2, :] = 1.0
    for k in (2, 3, 5):
        r = grid_norm_2k(GridFunction(a), k)
        assert r.value == pytest.approx((1 / n1 ** 2) ** (1 / (2 * k)), rel=1e-12)


@pytest.mark.parametrize("k,l", [(2, 3), (1, 2), (3, 2), (2, 2)])
def test_exact_matches_naive(k, l):
    rng = np.random.default_rng(k * 10 + l)
    a = rng.random((4, 4))
    r = grid_norm(GridFunction(a), GridNormParams(k, l))
    want = oracles.naive_grid_norm(a.tolist(), k, l)
    assert r.value == pytest.approx(want, rel=1e-10)
    assert r.power == pytest.approx(float(oracles.naive_grid_norm_power(a.tolist(), k, l)), rel=1e-10)


def test_signed_odd_parameters_flagged():
    rng = np.random.default_rng(0)
    a = GridFunction(rng.random((4, 4)) * 2 - 1)
    r = grid_norm(a, GridNormParams(3, 1))
    assert r.norm_like
    want = oracles.naive_grid_norm(a.values.tolist(), 3, 1)
    assert r.value == pytest.approx(want, rel=1e-10)
    assert not grid_norm(a, GridNormParams(2, 2)).norm_like


def test_grid_norm_2k_matches_general():
    rng = np.random.default_rng(5)
    a = GridFunction(rng.random((6, 9)))
    for k in (1, 2, 3, 4):
        assert grid_norm_2k(a, k).value == pytest.approx(
            grid_norm(a, GridNormParams(2, k)).value, rel=1e-10)


def test_grid_norm_2k_huge_exponent_stable():
    rng = np.random.default_rng(6)
    a = GridFunction((rng.random((8, 16)) < 0.5).astype(float))
    b = (a.values @ a.values.T) / 16
    m = b.max()
    k = 2_000_000
    r = grid_norm_2k(a, k)
    assert math.isfinite(r.value)
    # dominated by the largest codegree entry
    assert r.value == pytest.approx(math.sqrt(m), rel=1e-4)


def test_work_budget_enforced():
    a = GridFunction(np.ones((200, 200)))
    with pytest.raises(ValueError, match="budget"):
        grid_norm(a, GridNormParams(7, 7))
    # transposed orientation rescues a thin matrix with large k
    thin = GridFunction(np.ones((500, 2)))
    r = grid_norm(thin, GridNormParams(12, 2))
    assert r.value == pytest.approx(1.0, abs=1e-12)


def test_montecarlo_within_four_stderr():
    rng = np.random.default_rng(7)
    a = GridFunction((rng.random((16, 16)) < 0.4).astype(float))
    exact = grid_norm(a, GridNormParams(2, 2))
    mc = grid_norm(a, GridNormParams(2, 2, mode="montecarlo",
                                     samples=200_000, seed=11))
    assert mc.stderr is not None and mc.stderr > 0
    assert abs(mc.power - exact.power) <= 4 * mc.stderr
    with pytest.raises(ValueError, match="seed"):
        GridNormParams(2, 2, mode="montecarlo", samples=100)


def test_montecarlo_unbiased_pooled():
    rng = np.random.default_rng(8)
    a = GridFunction((rng.random((12, 12)) < 0.5).astype(float))
    exact = grid_norm(a, GridNormParams(2, 2)).power
    runs = [grid_norm(a, GridNormParams(2, 2, mode="montecarlo",
                                        samples=4000, seed=s))
            for s in range(50)]
    pooled_mean = np.mean([r.power for r in runs])
    pooled_se = np.sqrt(np.mean([r.stderr ** 2 for r in runs]) / len(runs))
    assert abs(pooled_mean - exact) <= 5 * pooled_se


def test_triangle_inequality_even_params():
    rng = np.random.default_rng(9)
    p = GridNormParams(2, 2)
    for _ in range(20):
        a = rng.random((5, 5)) - 0.5
        b = rng.random((5, 5)) - 0.5
        na = grid_norm(GridFunction(a), p).value
        nb = grid_norm(GridFunction(b), p).value
        # halved to stay inside [-1,1]; the norm is homogeneous
        nab = grid_norm(GridFunction((a + b) / 2), p).value
        assert 2 * nab <= na + nb + 1e-9


def test_sparse_support_bound():
    rng = np.random.default_rng(10)
    for l in (2, 3):
        for frac in (0.05, 0.2):
            mask = rng.random((10, 10)) < frac
            vals = rng.random((10, 10)) * mask
            gamma = mask.mean()
            r = grid_norm(GridFunction(vals), GridNormParams(l, l))
            assert r.value <= gamma ** (1 / l) + 1e-9


def test_gowers_grid_norm_exact():
    g = Group((12,))
    rng = np.random.default_rng(11)
    f = GroupFunction(g, (rng.random(12) < 0.5).astype(float))
    b1, b2, b3 = [0, 1, 2, 11], [0, 1, 11], [0, 2]
    r = gowers_grid_norm(f, b1, b2, b3, 2, 2)
    fd = {g.index_to_coords(i): int(f.values[i]) for i in range(12)}
    tup = lambda idxs: [g.index_to_coords(i) for i in idxs]
    want = oracles.naive_gowers_grid_norm_power(
        fd, tup(b1), tup(b2), tup(b3), 2, 2, (12,))
    assert r.power == pytest.approx(float(want), rel=1e-10)
    assert r.value == pytest.approx(float(want) ** 0.25, rel=1e-10)


def test_gowers_grid_norm_trivials():
    g = Group((8,))
    const = GroupFunction(g, np.full(8, 0.3))
    r = gowers_grid_norm(const, range(8), range(8), range(8), 2, 3)
    assert r.value == pytest.approx(0.3, abs=1e-12)
    rng = np.random.default_rng(12)
    f = GroupFunction(g, rng.random(8))
    b1, b2, b3 = [0, 3], [1, 2], [0, 4, 5]
    r11 = gowers_grid_norm(f, b1, b2, b3, 1, 1)
    acc = np.mean([[np.mean([f.values[(x + y + z) % 8] for z in b3])
                    for y in b2] for x in b1])
    assert r11.power == pytest.approx(float(acc), rel=1e-12)
    with pytest.raises(ValueError, match="empty"):
        gowers_grid_norm(f, [], b2, b3, 1, 1)


def test_gowers_montecarlo_agrees():
    g = Group((64,))
    rng = np.random.default_rng(13)
    f = GroupFunction(g, (rng.random(64) < 0.5).astype(float))
    b = list(range(0, 64, 2))
    exact = gowers_grid_norm(f, b, b, b, 2, 2)
    mc = gowers_grid_norm(f, b, b, b, 2, 2, mode="montecarlo",
                          samples=300_000, seed=3)
    assert abs(mc.power - exact.power) <= 4 * mc.stderr


def test_gowers_holder():
    rng = np.random.default_rng(14)
    k = l = 2
    fs = [[GridFunction(rng.random((3, 3))) for _ in range(l)] for _ in range(k)]
    rep = check_gowers_holder(fs, k, l)
    assert rep.holds and rep.margin >= -1e-9
    same = GridFunction(rng.random((4, 4)))
    rep_eq = check_gowers_holder([[same, same], [same, same]], 2, 2)
    assert rep_eq.holds
    assert rep_eq.margin == pytest.approx(0.0, abs=1e-9)
    rep_11 = check_gowers_holder([[same]], 1, 1)
    assert rep_11.margin == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="egative"):
        check_gowers_holder([[GridFunction(-np.ones((2, 2)))]], 1, 1)


@given(st.integers(0, 2 ** 16 - 1), st.integers(1, 2), st.integers(1, 2))
@settings(max_examples=40, deadline=None)
def test_monotonicity_property(bits, dk, dl):
    vals = np.array([(bits >> i) & 1 for i in range(16)], dtype=float)
    a = GridFunction(vals.reshape(4, 4))
    rep = check_monotonicity(a, 1, 2, 1 + dk, 2 + dl)
    assert rep.holds


def test_monotonicity_rectangle():
    a = np.zeros((4, 4))
    a[:2, :1] = 1.0
    rep = check_monotonicity(GridFunction(a), 1, 1, 2, 3)
    sigma, tau = 0.5, 0.25
    assert rep.lhs == pytest.approx(sigma * tau, abs=1e-12)
    assert rep.rhs == pytest.approx(sigma ** (1 / 3) * tau ** (1 / 2), abs=1e-12)
    assert rep.holds
