"""Grid norms of two-variable functions, exactly and by Monte Carlo.

The (k,l)-grid norm of A on a product space is

    ||A||_{G(k,l)} = | E prod_{i<=k, j<=l} A(x_i, y_j) |^(1/(kl)),

all x_i, y_j independent and uniform. Collapsing one side turns the kl-fold
average into E over k-tuples of rows of (E_y prod_i A(x_i, y))^l, and the
evaluation picks whichever orientation costs less. For k = 2 the codegree
matrix B(x1,x2) = E_y A(x1,y) A(x2,y) gives the whole family G(2,k) at once,
stably even for enormous k.

The absolute value is applied at the very end: for odd k or l on signed
inputs the inner averages can be negative and the quantity is only
norm-like, which the result object flags.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .constants import constant
from .group import Group
from .reports import InequalityReport
from .setfun import GridFunction, GroupFunction

__all__ = [
    "GridNormParams",
    "GridNormResult",
    "grid_norm",
    "grid_norm_2k",
    "gowers_grid_norm",
    "check_gowers_holder",
    "check_monotonicity",
]

WORK_BUDGET = int(constant("GRID_WORK_BUDGET"))
_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True)
class GridNormParams:
    k: int
    l: int
    mode: str = "exact"
    samples: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be positive")
        if self.mode not in ("exact", "montecarlo"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "montecarlo":
            if not self.samples or self.samples < 1:
                raise ValueError("montecarlo mode needs a sample count")
            if self.seed is None:
                raise ValueError("montecarlo mode needs an explicit seed")


@dataclass(frozen=True)
class GridNormResult:
    value: float
    power: float  # signed kl-power average, the quantity inside |.|^(1/kl)
    k: int
    l: int
    mode: str
    stderr: Optional[float] = None  # standard error of `power`, Monte Carlo only
    samples: Optional[int] = None
    seed: Optional[int] = None
    norm_like: bool = False  # odd k or l on signed input: not a seminorm


def _root(power: float, k: int, l: int) -> float:
    return abs(power) ** (1.0 / (k * l)) if power != 0 else 0.0


def _collapsed_power(a: np.ndarray, k: int, l: int) -> float:
    """E over k-tuples of rows of (E_y prod_i a(x_i,y))^l, blockwise."""
    n1, n2 = a.shape
    ntup = n1 ** k
    shape = (n1,) * k
    block = max(1, _BLOCK_CELLS // max(1, n2))
    total = 0.0
    for start in range(0, ntup, block):
        idx = np.arange(start, min(start + block, ntup))
        digits = np.unravel_index(idx, shape)
        prod = a[digits[0]].copy()
        for dgt in digits[1:]:
            prod *= a[dgt]
        inner = prod.mean(axis=1)
        total += float((inner ** l).sum())
    return total / ntup


def _exact_power(a: np.ndarray, k: int, l: int) -> float:
    n1, n2 = a.shape
    cost_rows = n1 ** k * n2
    cost_cols = n2 ** l * n1
    if min(cost_rows, cost_cols) > WORK_BUDGET:
        raise ValueError(
            f"exact grid norm work {min(cost_rows, cost_cols)} exceeds the "
            f"budget {WORK_BUDGET}")
    if cost_rows <= cost_cols:
        return _collapsed_power(a, k, l)
    return _collapsed_power(a.T, l, k)


def _mc_power(a: np.ndarray, k: int, l: int, samples: int, seed: int):
    """Unbiased estimate of the kl-power with its standard error."""
    n1, n2 = a.shape
    rng = np.random.default_rng(seed)
    block = max(1, _BLOCK_CELLS // (k * l))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(block, samples - done)
        xs = rng.integers(0, n1, size=(m, k))
        ys = rng.integers(0, n2, size=(m, l))
        vals = a[xs[:, :, None], ys[:, None, :]].reshape(m, -1).prod(axis=1)
        total += float(vals.sum())
        total_sq += float((vals ** 2).sum())
        done += m
    mean = total / samples
    var = max(0.0, total_sq / samples - mean * mean)
    stderr = math.sqrt(var / samples) if samples > 1 else float("inf")
    return mean, stderr


def grid_norm(a: GridFunction, p: GridNormParams) -> GridNormResult:
    """The (k,l)-grid norm of a two-variable function."""
    flag = (p.k % 2 == 1 or p.l % 2 == 1) and not a.nonneg
    if p.mode == "exact":
        power = _exact_power(a.values, p.k, p.l)
        return GridNormResult(_root(power, p.k, p.l), power, p.k, p.l,
                              "exact", norm_like=flag)
    power, stderr = _mc_power(a.values, p.k, p.l, p.samples, p.seed)
    return GridNormResult(_root(power, p.k, p.l), power, p.k, p.l,
                          "montecarlo", stderr=stderr, samples=p.samples,
                          seed=p.seed, norm_like=flag)


def grid_norm_2k(a: GridFunction, k: int) -> GridNormResult:
    """||a||_{G(2,k)} through the codegree matrix, stable for huge k.

    The 2k-power is E[B^k] with B = a a^T / n2. Scaling B by its largest
    absolute entry m keeps the entrywise power from underflowing: the norm
    is sqrt(m) * (E[(B/m)^k])^(1/2k).
    """
    if k < 1:
        raise ValueError("k must be positive")
    v = a.values
    n1, n2 = v.shape
    b = (v @ v.T) / n2
    m = float(np.abs(b).max())
    if m == 0.0:
        return GridNormResult(0.0, 0.0, 2, k, "exact", norm_like=False)
    scaled_mean = float(np.mean((b / m) ** k))
    value = math.sqrt(m) * abs(scaled_mean) ** (1.0 / (2 * k)) if scaled_mean else 0.0
    # the unscaled power may underflow for huge k; reported best-effort
    power = scaled_mean * m ** k if k * math.log(m) > -700 else 0.0
    flag = not a.nonneg and k % 2 == 1
    return GridNormResult(value, power, 2, k, "exact", norm_like=flag)


def _as_member_array(b) -> np.ndarray:
    members = b.members() if hasattr(b, "members") else b
    arr = np.asarray(list(members), dtype=np.int64)
    if arr.size == 0:
        raise ValueError("empty Bohr set")
    return arr


def gowers_grid_norm(f: GroupFunction, b1, b2, b3, k: int, l: int,
                     mode: str = "exact", samples: Optional[int] = None,
                     seed: Optional[int] = None) -> GridNormResult:
    """Grid norm of f averaged over Bohr-set translates:

        E_{x in B1} [ kl-power of F_x on B2 x B3 ],   F_x(y,z) = f(x+y+z),

    rooted at the end. b1, b2, b3 are membership-index sequences or objects
    exposing members().
    """
    params = GridNormParams(k, l, mode=mode, samples=samples, seed=seed)
    g = f.group
    m1, m2, m3 = (_as_member_array(b) for b in (b1, b2, b3))
    vals = np.asarray(f.values, dtype=float)
    flag = (k % 2 == 1 or l % 2 == 1) and bool((vals < -1e-15).any())
    if mode == "exact":
        total = 0.0
        for x in m1:
            idx = g.add_indices(g.add_indices(int(x), m2)[:, None], m3[None, :])
            total += _exact_power(vals[idx], k, l)
        power = total / len(m1)
        return GridNormResult(_root(power, k, l), power, k, l, "exact",
                              norm_like=flag)
    rng = np.random.default_rng(seed)
    block = max(1, _BLOCK_CELLS // (k * l))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < params.samples:
        m = min(block, params.samples - done)
        xs = m1[rng.integers(0, len(m1), size=m)]
        ys = m2[rng.integers(0, len(m2), size=(m, k))]
        zs = m3[rng.integers(0, len(m3), size=(m, l))]
        idx = g.add_indices(g.add_indices(xs[:, None, None], ys[:, :, None]),
                            zs[:, None, :])
        prods = vals[idx].reshape(m, -1).prod(axis=1)
        total += float(prods.sum())
        total_sq += float((prods ** 2).sum())
        done += m
    mean = total / params.samples
    var = max(0.0, total_sq / params.samples - mean * mean)
    stderr = math.sqrt(var / params.samples)
    return GridNormResult(_root(mean, k, l), mean, k, l, "montecarlo",
                          stderr=stderr, samples=params.samples, seed=seed,
                          norm_like=flag)


def check_gowers_holder(fs: Sequence[Sequence[GridFunction]], k: int,
                        l: int) -> InequalityReport:
    """E prod_{ij} f_ij(x_i, y_j) <= prod_{ij} ||f_ij||_{G(k,l)} for
    nonnegative functions on a common rectangle."""
    if len(fs) != k or any(len(row) != l for row in fs):
        raise ValueError("need a k x l matrix of functions")
    shape = fs[0][0].shape
    for row in fs:
        for f in row:
            if f.shape != shape:
                raise ValueError("all functions must share one rectangle")
            if not f.nonneg:
                raise ValueError("negative entries")
    n1, n2 = shape
    if n1 ** k * max(1, n2) > WORK_BUDGET:
        raise ValueError("work bound exceeded")
    # lhs = E_{x-tuple} prod_j (E_y prod_i f_ij(x_i, y)),  y_j independent
    shape_k = (n1,) * k
    ntup = n1 ** k
    prod_over_j = np.ones(ntup)
    for j in range(l):
        idx = np.arange(ntup)
        digits = np.unravel_index(idx, shape_k)
        prod = fs[0][j].values[digits[0]].copy()
        for i in range(1, k):
            prod *= fs[i][j].values[digits[i]]
        prod_over_j *= prod.mean(axis=1)
    lhs = float(prod_over_j.mean())
    rhs = 1.0
    norms = []
    p = GridNormParams(k, l)
    for row in fs:
        for f in row:
            r = grid_norm(f, p)
            norms.append(r.value)
            rhs *= r.value
    return InequalityReport("grid-holder", lhs, rhs, "<=",
                            details={"k": k, "l": l, "factor_norms": norms})


def check_monotonicity(a: GridFunction, k: int, l: int, k2: int,
                       l2: int) -> InequalityReport:
    """||a||_{G(k,l)} <= ||a||_{G(k2,l2)} for nonnegative a, k <= k2, l <= l2."""
    if not (k <= k2 and l <= l2):
        raise ValueError("need k <= k2 and l <= l2")
    if not a.nonneg:
        raise ValueError("negative entries")
    lo = grid_norm(a, GridNormParams(k, l)).value
    hi = grid_norm(a, GridNormParams(k2, l2)).value
    return InequalityReport("grid-monotonicity", lo, hi, "<=",
                            details={"k": k, "l": l, "k2": k2, "l2": l2})
