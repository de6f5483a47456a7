"""Seeded verification suites behind the `verify` subcommand.

Each suite maps a seed index to one randomized instance, runs the matching
checker and tallies the outcome.  Instances whose hypotheses are not met are
skipped and counted separately from passes and failures, so a clean run
reports zero failures while still showing how often each hypothesis bound
actually bit.  Instance generation is a pure function of the seed index,
which keeps every summary byte-identical across runs and lets the seed
range be split across worker threads without changing the result.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .bohr import (
    BohrSet,
    check_bohr_conv_lower,
    check_bohr_conv_lower_2,
    check_bohr_product_spread,
    check_bohr_upper_bound,
    make_sequence,
)
from .constants import CONSTANTS
from .gridnorm import (
    GridNormParams,
    check_gowers_holder,
    check_monotonicity,
    grid_norm,
)
from .group import Group, full_space
from .increment import Container, IncrementState, container_size_check, von_neumann_check
from .reports import InequalityReport
from .setfun import GridFunction, GroupFunction, SubsetInd
from .sift import (
    SpreadMajorant,
    check_spectral_positivity,
    check_unbalancing,
    relative_sift,
    reverse_markov,
    sift,
)

__all__ = ["SUITES", "run_suite", "suite_names"]

UNBALANCING_P_FACTOR = int(CONSTANTS["UNBALANCING_P_FACTOR"])


def _outcome(report: InequalityReport) -> str:
    if report.name.endswith("-skipped"):
        return "skip"
    if report.name.endswith("-failed"):
        return "fail"
    return "pass" if report.holds else "fail"


# ---------------------------------------------------------------------------
# instance generators, one report (or skip marker) per seed


def _inst_gowers_holder(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    n1 = int(rng.integers(3, 7))
    n2 = int(rng.integers(3, 7))
    k = int(rng.integers(1, 4))
    l = int(rng.integers(1, 4))
    fs = [[GridFunction(rng.random((n1, n2))) for _ in range(l)]
          for _ in range(k)]
    return check_gowers_holder(fs, k, l)


def _inst_monotonicity(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    n1 = int(rng.integers(4, 9))
    n2 = int(rng.integers(4, 9))
    if seed % 2 == 0:
        a = GridFunction(rng.random((n1, n2)))
        k = int(rng.integers(1, 3))
        l = int(rng.integers(1, 3))
        k2 = min(3, k + int(rng.integers(0, 2)))
        l2 = min(3, l + int(rng.integers(0, 2)))
        return check_monotonicity(a, k, l, k2, l2)
    # triangle inequality at even parameters, checked through the norm
    # itself on the midpoint (a+b)/2 so both summands stay in range
    a = rng.uniform(-0.5, 0.5, (n1, n2))
    b = rng.uniform(-0.5, 0.5, (n1, n2))
    p = GridNormParams(2, 2)
    na = grid_norm(GridFunction(a), p).value
    nb = grid_norm(GridFunction(b), p).value
    nab = grid_norm(GridFunction((a + b) / 2.0), p).value
    return InequalityReport(
        "grid-triangle", 2.0 * nab, na + nb,
        details={"k": 2, "l": 2, "norm_a": na, "norm_b": nb,
                 "norm_midpoint": nab})


def _inst_unbalancing(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    eps = float(rng.choice([0.3, 0.4, 0.5]))
    k = int(rng.integers(1, 3))
    scale = float(rng.uniform(0.2, 1.2))
    values = rng.uniform(0.0, scale, 64)
    p = UNBALANCING_P_FACTOR * math.ceil(k / eps)
    moments = [float(np.mean(values ** r)) for r in range(p + 1)]
    if moments[k] < eps ** k - 1e-12:
        return InequalityReport(
            "unbalancing-skipped", moments[k], eps ** k,
            details={"why": "k-th moment below eps^k", "k": k, "eps": eps})
    return check_unbalancing(moments, eps, k)


def _inst_spectral(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    eps = float(rng.choice([0.3, 0.4, 0.5]))
    n1, n2 = 8, 8
    base = float(rng.uniform(0.2, 0.45))
    if seed % 3 == 2:
        # row-regular noise with exactly flat row means; the fluctuation
        # norm stays under eps * alpha, exercising the skip branch
        noise = rng.uniform(-1.0, 1.0, (n1, n2))
        noise -= noise.mean(axis=1, keepdims=True)
        vals = base * (1.0 + 0.05 * eps * noise)
    else:
        # identical rows with a +-1 column pattern: every row mean equals
        # the global mean and the fluctuation norm is the pattern's std
        signs = rng.choice([-1.0, 1.0], n2)
        row = base * (1.0 + 2.0 * eps * signs)
        vals = np.tile(row, (n1, 1))
    return check_spectral_positivity(GridFunction(np.clip(vals, 0.0, 1.0)),
                                     eps, 2)


def _inst_reverse_markov(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    mean = float(rng.uniform(0.5, 2.0))
    rho = float(rng.uniform(0.05, 0.4))
    gamma = float(rng.uniform(0.1, 0.9))
    u = rng.uniform(0.0, 1.0, 128)
    samples = mean * (1.0 - rho * (1.0 - u))
    return reverse_markov(rho, gamma, list(samples))


def _random_subset(rng, size: int, dens: float) -> SubsetInd:
    bits = rng.random(size) < dens
    if not bits.any():
        bits[0] = True
    return SubsetInd(size, bits)


def _inst_container(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 7))
    side = 1 << n
    w = full_space(n)
    dens = rng.uniform(0.55, 0.9, 3)
    c = Container(w, 0, 0,
                  _random_subset(rng, side, float(dens[0])),
                  _random_subset(rng, side, float(dens[1])),
                  _random_subset(rng, side, float(dens[2])))
    r = int(rng.integers(1, 3))
    eps = float(rng.choice([0.5, 1.0, 2.0, 5.0], p=[0.15, 0.3, 0.3, 0.25]))
    which = "one_side" if seed % 2 == 0 else "two_side"
    return container_size_check(c, r, eps, which)


_BOHR_KINDS = ("const", "noise", "noise", "smooth", "indicator", "spiky")


def _bohr_fn(rng, group, kind: str) -> GroupFunction:
    n = group.order
    if kind == "const":
        vals = np.full(n, float(rng.uniform(0.3, 1.0)))
    elif kind == "noise":
        vals = rng.uniform(0.0, 1.0, n)
    elif kind == "smooth":
        j = int(rng.integers(1, 4))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        xs = np.arange(n)
        vals = 0.5 + 0.4 * np.cos(2.0 * math.pi * j * xs / n + phase)
    elif kind == "indicator":
        vals = (rng.random(n) < float(rng.uniform(0.2, 0.8))).astype(float)
    else:  # spiky
        vals = np.full(n, 0.05)
        vals[rng.random(n) < 0.05] = 1.0
    return GroupFunction(group, vals)


def _inst_bohr_container(seed: int) -> list[InequalityReport]:
    rng = np.random.default_rng(seed)
    modulus = int(rng.choice([128, 256, 512]))
    d = int(rng.integers(1, 3))
    freqs = tuple((int(f),) for f in
                  rng.choice(np.arange(1, modulus), size=d, replace=False))
    radius = Fraction(int(rng.integers(16, 33)), 64)
    b = BohrSet(Group((modulus,)), freqs, radius)
    seq = make_sequence(b, Fraction(1, 2), 5, "small")
    eps = float(rng.choice([0.04, 0.09, 0.16]))
    kinds = rng.choice(_BOHR_KINDS, size=3)
    if len(seq) < 5:
        skip = InequalityReport(
            "bohr-chain-skipped", float(len(seq)), 5.0,
            details={"why": "chain degenerated before five sets"})
        return [skip] * 4
    group = seq.sets[0].group
    f1 = _bohr_fn(rng, group, str(kinds[0]))
    f2 = _bohr_fn(rng, group, str(kinds[1]))
    g = _bohr_fn(rng, group, str(kinds[2]))
    return [
        check_bohr_upper_bound(f1, f2, g, seq, 2, eps),
        check_bohr_conv_lower(f1, f2, g, seq, 2, eps),
        check_bohr_conv_lower_2(f1, f2, g, seq, 2, eps),
        check_bohr_product_spread(f1, g, seq, 2, eps),
    ]


def _exact_witness_eval(fv: np.ndarray, g1: np.ndarray,
                        g2: np.ndarray) -> tuple[Fraction, Fraction, Fraction]:
    """Recompute a witness correlation in exact rational arithmetic.

    Independent of the sift bookkeeping: only the raw arrays go in.  Floats
    convert to Fractions losslessly, so the result is the true rational
    value of E[g1 f g2] / (E[g1] E[g2]) for the arrays as stored.
    """
    n1, n2 = fv.shape
    num = Fraction(0)
    col = [Fraction(float(v)) for v in g2]
    for x in range(n1):
        gx = Fraction(float(g1[x]))
        if gx == 0:
            continue
        row = fv[x]
        num += gx * sum(c * Fraction(float(row[y]))
                        for y, c in enumerate(col) if c != 0)
    num /= n1 * n2
    m1 = sum(Fraction(float(v)) for v in g1) / n1
    m2 = sum(Fraction(float(v)) for v in g2) / n2
    return num / (m1 * m2), m1, m2


def _audit_witness(fv: np.ndarray, w, threshold: float, eps: float,
                   floors: tuple[float, float],
                   floor_is_product: bool) -> InequalityReport:
    achieved, m1, m2 = _exact_witness_eval(fv, w.g1, w.g2)
    ach = float(achieved)
    ok = (abs(ach - w.achieved) <= 1e-9
          and ach >= (1.0 - eps) * threshold - 1e-9)
    if floor_is_product:
        ok = ok and float(m1 * m2) >= floors[0] - 1e-12
    else:
        ok = ok and float(m1) >= floors[0] - 1e-12 \
            and float(m2) >= floors[1] - 1e-12
    name = "sift-audit" if ok else "sift-audit-failed"
    return InequalityReport(
        name, (1.0 - eps) * threshold, ach,
        details={"achieved_reported": w.achieved, "achieved_recomputed": ach,
                 "masses": (float(m1), float(m2)), "floors": floors,
                 "regime": w.regime, "threshold": threshold, "eps": eps})


def _inst_sifting(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    n1 = int(rng.integers(6, 13))
    n2 = int(rng.integers(6, 13))
    base = float(rng.uniform(0.05, 0.25))
    vals = rng.uniform(0.0, base, (n1, n2))
    rows = rng.choice(n1, size=max(2, n1 // 3), replace=False)
    cols = rng.choice(n2, size=max(2, n2 // 3), replace=False)
    vals[np.ix_(rows, cols)] = rng.uniform(0.6, 1.0, (len(rows), len(cols)))
    eps = float(rng.choice([0.1, 0.2]))

    mode = seed % 3
    if mode == 1:
        f = GridFunction(vals)
        k = int(rng.integers(2, 4))
        l = int(rng.integers(2, 4))
        v = grid_norm(f, GridNormParams(k, l)).value
        alpha = min(1.0, 0.95 * v)
        w = sift(f, k, l, eps, alpha)
        return _audit_witness(vals, w, alpha, eps,
                              (w.details["mass_floor"], 0.0), True)

    k = int(rng.integers(2, 4))
    if mode == 0:
        # full majorant; the relative run must agree with the plain one
        # on every array bit
        maj = SpreadMajorant(SubsetInd(n1 * n2, np.ones(n1 * n2, dtype=bool)),
                             1.0, 0.0)
        f = GridFunction(vals)
        v = grid_norm(f, GridNormParams(2, k)).value
        alpha = min(1.0, 0.95 * v)
        wr = relative_sift(f, maj, k, eps, alpha)
        wp = sift(f, 2, k, eps, alpha)
        if not (np.array_equal(wr.g1, wp.g1) and np.array_equal(wr.g2, wp.g2)
                and wr.achieved == wp.achieved and wr.masses == wp.masses):
            return InequalityReport(
                "sift-audit-failed", 0.0, 1.0,
                details={"why": "full-majorant relative run diverged from "
                                "the plain sift"})
        return _audit_witness(vals, wr, alpha, eps,
                              (wp.details["mass_floor"], 0.0), True)

    tmask = rng.random((n1, n2)) < float(rng.uniform(0.5, 0.85))
    tmask[np.ix_(rows, cols)] = True
    tau = float(tmask.mean())
    fv = vals * tmask
    f = GridFunction(fv)
    v = grid_norm(f, GridNormParams(2, k)).value
    alpha = min(1.0, 0.95 * v / tau)
    maj = SpreadMajorant(SubsetInd(n1 * n2, tmask.reshape(-1)), tau, 1e-6)
    w = relative_sift(f, maj, k, eps, alpha)
    return _audit_witness(fv, w, alpha * tau, eps,
                          w.details["mass_floors"], False)


def _gf8_mulx(y: int) -> int:
    y <<= 1
    return (y ^ 0b1011) if y & 0b1000 else y


def _inst_vnl(seed: int) -> InequalityReport:
    rng = np.random.default_rng(seed)
    n = 3
    side = 1 << n
    w = full_space(n)
    full = SubsetInd(side, np.ones(side, dtype=bool))
    c = Container(w, 0, 0, full, full, full)
    eps = float(rng.choice([0.2, 0.3]))
    mode = seed % 3
    if mode == 0:
        mask = np.ones((side, side), dtype=bool)
    elif mode == 1:
        # drop one cell per column along a field-multiplication graph;
        # x != 1 keeps the removed offsets (x+1)*y pairwise distinct
        x = int(rng.integers(2, side))
        mask = np.ones((side, side), dtype=bool)
        for y in range(side):
            acc, xx, yy = 0, x, y
            while xx:
                if xx & 1:
                    acc ^= yy
                xx >>= 1
                yy = _gf8_mulx(yy)
            mask[acc, y] = False
    else:
        mask = rng.random((side, side)) < 0.35
    st = IncrementState(c, SubsetInd(side * side, mask.reshape(-1)), [])
    return von_neumann_check(st, eps, 2)


# ---------------------------------------------------------------------------
# registry and the runner


SUITES: dict[str, Callable[[int], object]] = {
    "gowers-holder": _inst_gowers_holder,
    "monotonicity": _inst_monotonicity,
    "unbalancing": _inst_unbalancing,
    "spectral": _inst_spectral,
    "reverse-markov": _inst_reverse_markov,
    "container": _inst_container,
    "bohr-container": _inst_bohr_container,
    "sifting": _inst_sifting,
    "vnl": _inst_vnl,
}


def suite_names() -> list[str]:
    return list(SUITES)


def run_suite(name: str, seeds: int, threads: int = 1,
              base_seed: int = 0, collect_rows: bool = False) -> dict:
    """Run `seeds` instances of a named suite and tally the outcomes.

    Returns a summary dict with pass/fail/skip counts, a per-name outcome
    breakdown, every failing report and a bounded sample of passing ones.
    With collect_rows the summary also carries one flat row per check for
    delimited export.  Instance i always uses seed base_seed + i, so
    splitting the range over threads cannot change the summary.
    """
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {suite_names()}")
    if seeds < 1:
        raise ValueError("seeds must be positive")
    fn = SUITES[name]

    def one(i: int) -> list[InequalityReport]:
        out = fn(base_seed + i)
        return out if isinstance(out, list) else [out]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_seed = list(pool.map(one, range(seeds)))
    else:
        per_seed = [one(i) for i in range(seeds)]

    counts = {"pass": 0, "fail": 0, "skip": 0}
    by_name: dict[str, dict[str, int]] = {}
    failures = []
    sample = []
    rows = []
    for i, reports in enumerate(per_seed):
        for rep in reports:
            out = _outcome(rep)
            counts[out] += 1
            slot = by_name.setdefault(rep.name, {"pass": 0, "fail": 0,
                                                 "skip": 0})
            slot[out] += 1
            body = rep.to_json()
            body["seed"] = base_seed + i
            if out == "fail":
                failures.append(body)
            elif len(sample) < 5:
                sample.append(body)
            if collect_rows:
                rows.append((base_seed + i, rep.name, rep.lhs, rep.rhs,
                             rep.margin, out))
    summary = {
        "suite": name,
        "seeds": seeds,
        "base_seed": base_seed,
        "pass": counts["pass"],
        "fail": counts["fail"],
        "skip": counts["skip"],
        "by_name": by_name,
        "failures": failures[:50],
        "checks": sample,
    }
    if collect_rows:
        summary["rows"] = rows
    return summary
