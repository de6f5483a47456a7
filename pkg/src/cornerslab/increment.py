"""Density-increment engine over F2^n x F2^n.

The engine tracks a container (a linear frame W with coset shifts for the
three sides X, Y, D) together with a set A of cells inside the slab

    S(X, Y, D) = {(x, y) : x in X, y in Y, x xor y in D},

and pushes A toward a pseudorandom position by three moves: restricting to
a denser combinatorial rectangle, culling sparse rows, and re-spreading the
sides by passing to a piece of a two-dimensional partition.  Every move
recomputes the relative density exactly in rational arithmetic and asserts
the gain it claims; probabilistic selections from the underlying argument
are replaced by exhaustive scans that pick the lexicographically first
qualifying object.

All asymptotic constants are pinned in the constants table.  Conclusions
whose honest form is an astronomically small floor are still computed and
asserted; they guard against catastrophic collapse, not against slack.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .constants import constant
from .gridnorm import grid_norm_2k
from .group import AffineSubspace, full_space
from .reports import InequalityReport
from .setfun import GridFunction, SubsetInd
from .sift import SpreadMajorant, extract_correlation, relative_sift
from .spread import SpreadCertificate, is_alg_spread_f2, is_asym_spread

__all__ = [
    "Container",
    "IncrementState",
    "PartitionPiece",
    "PartitionResult",
    "container_size_check",
    "cull_sparse_rows",
    "grid_increment",
    "partition_2dim",
    "pseudorandomize",
    "obtain_spreadness",
    "von_neumann_check",
]

EPS_S_DIVISOR = int(constant("EPS_S_DIVISOR"))
BRIDGE_GAMMA = float(constant("GRID_INCR_BRIDGE_GAMMA"))
R_FLOOR_C = float(constant("R_FLOOR_C"))
PARTITION_DEPTH_C = int(constant("PARTITION_DEPTH_C"))
PARTITION_FLOOR_C = float(constant("PARTITION_FLOOR_C"))
PSEUDO_DIM_C = float(constant("PSEUDO_DIM_C"))
PSEUDO_RECT_C = float(constant("PSEUDO_RECT_C"))
OBTAIN_ITER_C = float(constant("OBTAIN_ITER_C"))
OBTAIN_EPS_S_DIVISOR = int(constant("OBTAIN_EPS_S_DIVISOR"))
OBTAIN_DELTA_D_C = float(constant("OBTAIN_DELTA_D_C"))
OBTAIN_RECT_C = float(constant("OBTAIN_RECT_C"))
OBTAIN_DIM_C = float(constant("OBTAIN_DIM_C"))
OBTAIN_ROW_C = float(constant("OBTAIN_ROW_C"))
VNL_P_C = float(constant("VNL_P_C"))
COMB_EXACT_SIDE = int(constant("COMB_EXACT_SIDE"))


@lru_cache(maxsize=32)
def _xor_table(side: int) -> np.ndarray:
    idx = np.arange(side)
    return idx[:, None] ^ idx[None, :]


def _coord_map(basis: tuple, shift: int, size: int) -> np.ndarray:
    """Element of shift + span(basis) for each coordinate vector, basis order."""
    arr = np.full(size, shift, dtype=np.int64)
    idx = np.arange(size)
    for j, b in enumerate(basis):
        arr[(idx >> j) & 1 == 1] ^= b
    return arr


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


# ---------------------------------------------------------------------------
# container and state


@dataclass(eq=False)
class Container:
    """Frame of the increment: X, Y, D as subsets of cosets of a common W.

    w is the linear frame (an AffineSubspace with zero shift); X lives in
    w + shift_x, Y in w + shift_y and D in w + (shift_x xor shift_y), each
    stored relative to its coset through the basis coordinate map.
    """

    w: AffineSubspace
    shift_x: int
    shift_y: int
    x: SubsetInd
    y: SubsetInd
    d: SubsetInd

    def __post_init__(self):
        if self.w.shift != 0:
            raise ValueError("the frame must be a linear subspace (zero shift)")
        side = self.w.size
        for name, s in (("X", self.x), ("Y", self.y), ("D", self.d)):
            if s.size != side:
                raise ValueError(f"{name} does not index the frame (size {s.size} vs {side})")
        lim = 1 << self.w.n
        if not (0 <= self.shift_x < lim and 0 <= self.shift_y < lim):
            raise ValueError("shift out of the ambient range")

    @property
    def side(self) -> int:
        return self.w.size

    def delta_x(self) -> Fraction:
        return Fraction(self.x.cardinality, self.side)

    def delta_y(self) -> Fraction:
        return Fraction(self.y.cardinality, self.side)

    def delta_d(self) -> Fraction:
        return Fraction(self.d.cardinality, self.side)

    def s_mask(self) -> np.ndarray:
        """Boolean side x side matrix of the slab S(X, Y, D), relative coords."""
        return (self.x.bits[:, None] & self.y.bits[None, :]
                & self.d.bits[_xor_table(self.side)])

    def s_count(self) -> int:
        return int(self.s_mask().sum())

    def to_json(self) -> dict:
        return {"ambient": self.w.n, "dim": self.w.dim,
                "shift_x": int(self.shift_x), "shift_y": int(self.shift_y),
                "x": self.x.to_hex(), "y": self.y.to_hex(), "d": self.d.to_hex()}


@dataclass(eq=False)
class IncrementState:
    """A container plus a cell set A inside its slab and the step history.

    Constructing a state re-verifies A subseteq S(X, Y, D) exhaustively, so
    every transition that builds a new state re-establishes the invariant.
    A is indexed row-major: cell (x, y) sits at x * side + y.
    """

    container: Container
    a: SubsetInd
    history: list = field(default_factory=list)

    def __post_init__(self):
        side = self.container.side
        if self.a.size != side * side:
            raise ValueError(f"A must index the {side}x{side} grid")
        if bool((self.a2() & ~self.container.s_mask()).any()):
            raise ValueError("A has cells outside S(X, Y, D)")

    def a2(self) -> np.ndarray:
        side = self.container.side
        return self.a.bits.reshape(side, side)

    @property
    def alpha(self) -> Fraction:
        c = self.container
        if self.a.cardinality == 0:
            return Fraction(0)
        return Fraction(self.a.cardinality * c.side,
                        c.x.cardinality * c.y.cardinality * c.d.cardinality)

    def row_counts(self) -> np.ndarray:
        """Cells of A per Y-member column, aligned with y.indices()."""
        return self.a2()[:, self.container.y.indices()].sum(axis=0)

    def f1_grid(self) -> tuple[GridFunction, np.ndarray, np.ndarray]:
        """F1(y, z) = A(y xor z, y) on Y x D, with the member index vectors."""
        yv = self.container.y.indices()
        zv = self.container.d.indices()
        vals = self.a2()[yv[:, None] ^ zv[None, :], yv[:, None]]
        return GridFunction(vals.astype(np.float64)), yv, zv

    def f2_grid(self) -> tuple[GridFunction, np.ndarray, np.ndarray]:
        """F2(x, z) = A(x, x xor z) on X x D, with the member index vectors."""
        xv = self.container.x.indices()
        zv = self.container.d.indices()
        vals = self.a2()[xv[:, None], xv[:, None] ^ zv[None, :]]
        return GridFunction(vals.astype(np.float64)), xv, zv

    def to_json(self) -> dict:
        return {"container": self.container.to_json(), "a": self.a.to_hex(),
                "alpha": str(self.alpha), "history": self.history}


def _cert_summary(cert: SpreadCertificate) -> dict:
    return {"verdict": cert.verdict, "margin": float(cert.margin),
            "mode": cert.details.get("mode"),
            "verified": bool(cert.details.get("verified", True))}


# ---------------------------------------------------------------------------
# container size check


def _skip(name: str, why: str, **extra) -> InequalityReport:
    return InequalityReport(name + "-skipped", 0.0, 0.0, relation="<=",
                            details={"why": why, **extra})


def _excess_float(exc: Fraction) -> float:
    # keep the sign faithful when the float rounding would hide a violation
    if exc > 0:
        return max(float(exc), 1e-300)
    return min(float(exc), 0.0)


def container_size_check(c: Container, r: int, eps: float,
                         which: str = "one_side") -> InequalityReport:
    """Compare |S(X, Y, D)| against the product-density prediction.

    one_side asserts |S| <= (1+eps) delta |W|^2 under spreadness of X or Y
    at (r, eps/8); two_side also asserts the matching lower bound and needs
    both sides spread at (r, eps/16).  The bound's own hypothesis demands r
    above a floor growing in 1/eps and log(1/delta); below the floor, and
    whenever the spreadness precondition cannot be verified exactly, the
    check reports a labeled skip instead of an assertion.
    """
    if which not in ("one_side", "two_side"):
        raise ValueError(f"unknown mode {which!r}")
    eps_f = _frac(eps)
    if eps_f <= 0:
        raise ValueError("eps must be positive")
    delta = c.delta_x() * c.delta_y() * c.delta_d()
    if delta == 0:
        raise ValueError("a container side is empty")
    floor = 0.0
    if delta < 1:
        floor = R_FLOOR_C * float(eps_f) ** -7 * math.log(1 / float(delta)) ** 8
    base = {"which": which, "eps": float(eps_f), "r": r, "r_floor": floor,
            "delta": float(delta), "s_count": c.s_count()}
    if r < floor:
        return _skip("container-size", "r below the regime floor", **base)
    if r > 2:
        return _skip("container-size",
                     "spreadness not exactly verifiable at this r", **base)

    vrel = full_space(c.w.dim)
    side_eps = eps_f / (8 if which == "one_side" else 16)
    cert_x = is_alg_spread_f2(c.x, vrel, r, float(side_eps))
    cert_y = is_alg_spread_f2(c.y, vrel, r, float(side_eps))
    base["spread_x"] = _cert_summary(cert_x)
    base["spread_y"] = _cert_summary(cert_y)
    if which == "one_side":
        if not (cert_x.spread or cert_y.spread):
            return _skip("container-size", "neither X nor Y is spread", **base)
    else:
        if not cert_x.spread:
            return _skip("container-size", "X is not spread", **base)
        if not cert_y.spread:
            return _skip("container-size", "Y is not spread", **base)

    n_s = c.s_count()
    expected = delta * c.side ** 2
    excess = Fraction(n_s) - (1 + eps_f) * expected
    if which == "two_side":
        excess = max(excess, (1 - eps_f) * expected - n_s)
    base["ratio"] = float(Fraction(n_s) / expected)
    base["expected"] = float(expected)
    return InequalityReport("container-size", _excess_float(excess), 0.0,
                            relation="<=", tol=0.0, details=base)


# ---------------------------------------------------------------------------
# row culling


def cull_sparse_rows(st: IncrementState, eps_tilde, eps_l) -> IncrementState:
    """Remove a block of sparse rows when they are plentiful.

    A row y is sparse when its cell count sits below (1 - eps_tilde) times
    the mean alpha delta_X delta_D |W|.  If at least an eps_l fraction of Y
    is sparse, the first ceil(eps_l |Y|) sparse rows go, and the density
    gain alpha' >= (1 + eps_tilde eps_l / 2) alpha is asserted exactly;
    otherwise the state comes back with a no-op verdict in its history.
    """
    et, el = _frac(eps_tilde), _frac(eps_l)
    if not (0 < et < 1):
        raise ValueError("eps_tilde must lie in (0,1)")
    if not (0 < el < 1):
        raise ValueError("eps_l must lie in (0,1)")
    c = st.container
    n_y = c.y.cardinality
    if n_y == 0:
        raise ValueError("Y is empty")
    alpha = st.alpha
    thr = (1 - et) * alpha * c.delta_x() * c.delta_d() * c.side
    yv = c.y.indices()
    counts = st.row_counts()
    sparse = [int(y) for y, cnt in zip(yv, counts) if Fraction(int(cnt)) < thr]

    if Fraction(len(sparse)) < el * n_y:
        entry = {"kind": "row-cull", "verdict": "no-op",
                 "sparse_rows": len(sparse), "alpha_before": str(alpha),
                 "alpha_after": str(alpha)}
        return IncrementState(c, st.a, st.history + [entry])

    m_rm = math.ceil(el * n_y)
    if m_rm >= n_y:
        raise ValueError("culling would empty Y")
    removed = sparse[:m_rm]
    new_y_bits = c.y.bits.copy()
    new_y_bits[removed] = False
    new_a = st.a2().copy()
    new_a[:, removed] = False
    new_c = Container(c.w, c.shift_x, c.shift_y, c.x,
                      SubsetInd(c.side, new_y_bits), c.d)
    bound = (1 + et * el / 2) * alpha
    entry = {"kind": "row-cull", "verdict": "culled", "removed": m_rm,
             "sparse_rows": len(sparse), "alpha_before": str(alpha),
             "alpha_after": None, "gain_bound": str(bound)}
    out = IncrementState(new_c, SubsetInd(c.side ** 2, new_a.ravel()),
                         st.history + [entry])
    entry["alpha_after"] = str(out.alpha)
    if out.alpha < bound:
        raise AssertionError(
            f"cull gained {out.alpha} < required {bound}; the threshold "
            "arithmetic is broken")
    return out


# ---------------------------------------------------------------------------
# grid-norm driven increment


def grid_increment(st: IncrementState, k: int, eps: float, which: str = "F1"):
    """Turn a large grid norm of F1 or F2 into a denser sub-rectangle.

    F1(y, z) = A(y xor z, y) on Y x D with threshold (1 + eps/32) alpha
    delta_X; F2(x, z) = A(x, x xor z) on X x D with threshold 2 alpha
    delta_Y.  Above threshold, relative sifting against the majorant
    T = {(u, z) : u xor z in X} (resp. Y) and exact boolean extraction give
    row and column subsets whose A-mass is recounted to beat the corrected
    density target.  Below threshold the verdict is a no-increment report.
    Returns (rows, cols, report) with rows, cols as SubsetInd over the
    frame, or (None, None, report) without an increment.
    """
    if which not in ("F1", "F2"):
        raise ValueError(f"unknown grid function {which!r}")
    if k < 1:
        raise ValueError("k must be positive")
    eps_f = _frac(eps)
    if not (0 < eps_f < 1):
        raise ValueError("eps must lie in (0,1)")
    c = st.container
    if c.d.cardinality == 0:
        raise ValueError("D is empty")
    if st.a.cardinality == 0:
        raise ValueError("A is empty")
    alpha = st.alpha
    eps_s = eps_f / EPS_S_DIVISOR

    if which == "F1":
        fg, rows_idx, cols_idx = st.f1_grid()
        if c.y.cardinality == 0:
            raise ValueError("Y is empty")
        base = alpha * c.delta_x()
        threshold = (1 + eps_f / 32) * base
        t_side = c.x
    else:
        fg, rows_idx, cols_idx = st.f2_grid()
        if c.x.cardinality == 0:
            raise ValueError("X is empty")
        base = alpha * c.delta_y()
        threshold = 2 * base
        t_side = c.y

    norm = grid_norm_2k(fg, k).value
    details = {"which": which, "k": k, "eps": float(eps_f),
               "norm": float(norm), "threshold": float(threshold),
               "alpha": str(alpha)}
    if Fraction(norm) < threshold:
        details["verdict"] = "no-increment"
        rep = InequalityReport("grid-increment-none", float(norm),
                               float(threshold), relation="<=",
                               details=details)
        return None, None, rep

    # bridge to relative sifting: the majorant rows are the t_side hits
    t_mask = t_side.bits[rows_idx[:, None] ^ cols_idx[None, :]]
    tau_f = (1 + 8 * eps_s) * Fraction(t_side.cardinality, c.side)
    tau_f = min(tau_f, Fraction(1))
    alpha_rel = min(threshold / tau_f, Fraction(1))
    maj = SpreadMajorant(SubsetInd(t_mask.size, t_mask.ravel()),
                         float(tau_f), BRIDGE_GAMMA)
    witness = relative_sift(fg, maj, k, float(eps_f / 512), float(alpha_rel))

    tau_corr = (1 - eps_f / 256) * alpha_rel * tau_f
    g1, g2 = extract_correlation(fg, witness.g1, witness.g2, float(tau_corr))
    sel_rows = rows_idx[np.asarray(g1, dtype=bool)]
    sel_cols = cols_idx[np.asarray(g2, dtype=bool)]
    mass = int(fg.values[np.ix_(np.asarray(g1, dtype=bool),
                                np.asarray(g2, dtype=bool))].sum())
    need = tau_corr * len(sel_rows) * len(sel_cols)
    if Fraction(mass) < need:
        raise AssertionError(
            f"recount {mass} misses the corrected target {float(need):.6g}")

    # side condition, reported but not gating: the majorant side should be
    # algebraically spread for the bridge to be in regime
    side_cert = is_alg_spread_f2(t_side, full_space(c.w.dim), 1, float(eps_f))
    details.update({
        "verdict": "increment", "tau": float(tau_f),
        "alpha_rel": float(alpha_rel), "tau_corr": float(tau_corr),
        "rows": len(sel_rows), "cols": len(sel_cols), "mass": mass,
        "regime": witness.regime,
        "out_of_regime": bool(witness.details.get("out_of_regime", False)),
        "side_spread": _cert_summary(side_cert)})
    rep = InequalityReport("grid-increment", float(need), float(mass),
                           relation="<=", details=details)
    rows_out = SubsetInd.from_indices(c.side, sel_rows)
    cols_out = SubsetInd.from_indices(c.side, sel_cols)
    return rows_out, cols_out, rep


# ---------------------------------------------------------------------------
# two-dimensional partition


@dataclass(frozen=True)
class PartitionPiece:
    """One certified cell of the partition: X_i x Y_i inside cosets of v."""

    v: AffineSubspace
    shift_x: int
    shift_y: int
    x: SubsetInd
    y: SubsetInd
    weight: Fraction
    certs: tuple = ()


@dataclass
class PartitionResult:
    pieces: list
    leftover_pairs: int
    partial: bool
    details: dict


def partition_2dim(x: SubsetInd, y: SubsetInd, w: AffineSubspace, r: int,
                   eps: float, eta) -> PartitionResult:
    """Split X x Y into spread-certified coset rectangles plus a leftover.

    Nodes whose side fails the spreadness test at (r, eps) split along the
    violating subspace's linear part, into all coset pairs; nodes where
    both sides certify become pieces.  A node is demoted to the leftover
    when its depth exceeds the budget PARTITION_DEPTH_C log2(1/eta) + 1 or
    when a side density falls below delta 2^(-(PARTITION_FLOOR_C/2)
    log2(1/eta)^2).  On normal termination the leftover holds at most
    eta |X||Y| pairs; when the budget is exhausted first, the result is
    labeled partial instead.  eta = 1 allows the empty partition.
    """
    if w.shift != 0:
        raise ValueError("the frame must be a linear subspace (zero shift)")
    m = w.dim
    size = 1 << m
    if x.size != size or y.size != size:
        raise ValueError("X and Y must index the frame")
    eta_f = _frac(eta)
    if not (0 < eta_f <= 1):
        raise ValueError("eta must lie in (0,1]")
    r_eff = min(r, 2)
    total = x.cardinality * y.cardinality
    details = {"r": r, "r_eff": r_eff, "clamped_r": r > 2,
               "eps": float(eps), "eta": float(eta_f)}
    if total == 0:
        return PartitionResult([], 0, False, {**details, "empty_input": True})

    log_inv = 0.0 if eta_f == 1 else math.log2(1 / float(eta_f))
    depth_cap = int(PARTITION_DEPTH_C * log_inv) + 1
    floor_exp = (PARTITION_FLOOR_C / 2) * log_inv ** 2
    floor_x = float(Fraction(x.cardinality, size)) * 2.0 ** -floor_exp
    floor_y = float(Fraction(y.cardinality, size)) * 2.0 ** -floor_exp
    details.update({"depth_cap": depth_cap, "floor_x": floor_x,
                    "floor_y": floor_y})

    pieces: list[PartitionPiece] = []
    leftover = 0
    demoted_depth = demoted_floor = 0
    from collections import deque
    lin_full = tuple(1 << i for i in range(m))
    queue = deque([(lin_full, 0, 0, x, y, 0)])
    while queue:
        basis, sx, sy, xc, yc, depth = queue.popleft()
        if xc.cardinality == 0 or yc.cardinality == 0:
            continue
        sub_size = 1 << len(basis)
        if (xc.cardinality / sub_size < floor_x - 1e-12
                or yc.cardinality / sub_size < floor_y - 1e-12):
            leftover += xc.cardinality * yc.cardinality
            demoted_floor += 1
            continue
        frame_x = AffineSubspace(m, basis, sx)
        frame_y = AffineSubspace(m, basis, sy)
        cert_x = is_alg_spread_f2(xc, frame_x, r_eff, float(eps))
        cert_y = is_alg_spread_f2(yc, frame_y, r_eff, float(eps))
        if cert_x.spread and cert_y.spread:
            pieces.append(PartitionPiece(
                AffineSubspace(m, basis, 0), sx, sy, xc, yc,
                Fraction(xc.cardinality * yc.cardinality, total),
                (cert_x, cert_y)))
            continue
        if depth + 1 > depth_cap:
            leftover += xc.cardinality * yc.cardinality
            demoted_depth += 1
            continue
        violator = cert_x if not cert_x.spread else cert_y
        sub = violator.counterexample
        lin_basis = sub.basis
        lin_mask = np.zeros(size, dtype=bool)
        lin_mask[_coord_map(lin_basis, 0, 1 << len(lin_basis))] = True
        # coset representatives of the split subspace inside each parent coset
        reps_x = _split_reps(basis, sx, lin_mask, m)
        reps_y = _split_reps(basis, sy, lin_mask, m)
        idx = np.arange(size)
        for cx in reps_x:
            x_child = SubsetInd(size, xc.bits & lin_mask[idx ^ cx])
            for cy in reps_y:
                y_child = SubsetInd(size, yc.bits & lin_mask[idx ^ cy])
                queue.append((lin_basis, cx, cy, x_child, y_child, depth + 1))

    covered = sum(p.x.cardinality * p.y.cardinality for p in pieces)
    if covered + leftover != total:
        raise AssertionError("partition lost pairs; the coset split is broken")
    partial = Fraction(leftover) > eta_f * total
    details.update({"pieces": len(pieces), "leftover_pairs": leftover,
                    "leftover_fraction": str(Fraction(leftover, total)),
                    "demoted_depth": demoted_depth,
                    "demoted_floor": demoted_floor})
    return PartitionResult(pieces, leftover, partial, details)


def _split_reps(parent_basis: tuple, parent_shift: int, lin_mask: np.ndarray,
                m: int) -> list[int]:
    """Lex-least representatives of lin-cosets covering parent + shift."""
    members = _coord_map(parent_basis, parent_shift, 1 << len(parent_basis))
    members = np.sort(members)
    idx = np.arange(lin_mask.size)
    taken = np.zeros(lin_mask.size, dtype=bool)
    reps = []
    for t in members:
        if taken[t]:
            continue
        reps.append(int(t))
        taken |= lin_mask[idx ^ int(t)]
    return reps


# ---------------------------------------------------------------------------
# pseudorandomization


def _restrict_state(st: IncrementState, piece: PartitionPiece,
                    entry: dict) -> IncrementState:
    """Move the state into a partition piece, rebuilding the frame."""
    c = st.container
    vmap = _coord_map(piece.v.basis, 0, piece.v.size)
    sub_x = vmap ^ piece.shift_x
    sub_y = vmap ^ piece.shift_y
    sub_d = vmap ^ (piece.shift_x ^ piece.shift_y)
    parent_map = _coord_map(c.w.basis, 0, c.side)

    def to_ambient(rel: int) -> int:
        return int(parent_map[rel])

    new_basis = tuple(to_ambient(b) for b in piece.v.basis)
    new_w = AffineSubspace(c.w.n, new_basis, 0)
    new_c = Container(new_w,
                      c.shift_x ^ to_ambient(piece.shift_x),
                      c.shift_y ^ to_ambient(piece.shift_y),
                      SubsetInd(piece.v.size, piece.x.bits[sub_x]),
                      SubsetInd(piece.v.size, piece.y.bits[sub_y]),
                      SubsetInd(piece.v.size, c.d.bits[sub_d]))
    a_child = st.a2()[sub_x[:, None], sub_y[None, :]]
    return IncrementState(new_c, SubsetInd(piece.v.size ** 2, a_child.ravel()),
                          st.history + [entry])


def pseudorandomize(st: IncrementState, r: int, eps: float) -> IncrementState:
    """Pass to the first partition piece on which A keeps its density.

    The piece scan is exhaustive in construction order; a piece qualifies
    when |A cap S_i| >= (1-4 eps) alpha |S_i| + eps alpha delta_D |X_i||Y_i|.
    The new state re-asserts five conclusions: bounded dimension drop,
    delta_D' >= (eps alpha / 2) delta_D, the rectangle density floor, piece
    spreadness, and |A'| >= (1-5 eps) alpha delta' |W'|^2.  No qualifying
    piece contradicts the averaging argument and raises.
    """
    eps_f = _frac(eps)
    if eps_f >= Fraction(1, 5):
        raise ValueError("eps must be below 1/5")
    if eps_f <= 0:
        raise ValueError("eps must be positive")
    if st.a.cardinality == 0:
        raise ValueError("A is empty")
    c = st.container
    alpha = st.alpha
    vrel = full_space(c.w.dim)
    cert_x = is_alg_spread_f2(c.x, vrel, min(r, 2), float(eps_f))
    cert_y = is_alg_spread_f2(c.y, vrel, min(r, 2), float(eps_f))

    eta = min(eps_f * alpha * c.delta_d() / 16, Fraction(1))
    part = partition_2dim(c.x, c.y, c.w, r, float(eps_f / 16), eta)

    a2 = st.a2()
    xor = _xor_table(c.side)
    idx = np.arange(c.side)
    q = float(eps_f * alpha * c.delta_d())
    dim_bound = PSEUDO_DIM_C * max(0.0, math.log2(1 / q))
    rect_floor = 2.0 ** -(PSEUDO_RECT_C * max(0.0, math.log2(1 / q)) ** 2)

    for i, piece in enumerate(part.pieces):
        lin_mask = np.zeros(c.side, dtype=bool)
        lin_mask[_coord_map(piece.v.basis, 0, piece.v.size)] = True
        d_i = c.d.bits & lin_mask[idx ^ (piece.shift_x ^ piece.shift_y)]
        s_i = piece.x.bits[:, None] & piece.y.bits[None, :] & d_i[xor]
        mass = int((a2 & s_i).sum())
        s_size = int(s_i.sum())
        need = ((1 - 4 * eps_f) * alpha * s_size
                + eps_f * alpha * c.delta_d()
                * piece.x.cardinality * piece.y.cardinality)
        if Fraction(mass) < need:
            continue

        entry = {"kind": "pseudorandomize", "piece_index": i,
                 "alpha_before": str(alpha), "alpha_after": None,
                 "precondition_spread": {"x": _cert_summary(cert_x),
                                         "y": _cert_summary(cert_y)},
                 "partition_partial": part.partial}
        out = _restrict_state(st, piece, entry)
        oc = out.container

        drop = c.w.dim - oc.w.dim
        if drop > dim_bound + 1e-9:
            raise AssertionError(
                f"dimension dropped by {drop} > bound {dim_bound:.3f}")
        dd_floor = (eps_f * alpha / 2) * c.delta_d()
        if oc.delta_d() < dd_floor:
            raise AssertionError(
                f"delta_D' = {oc.delta_d()} < floor {dd_floor}")
        rect = float(oc.delta_x() * oc.delta_y())
        if rect < rect_floor - 1e-12:
            raise AssertionError(
                f"rectangle density {rect:.3e} < floor {rect_floor:.3e}")
        if not (piece.certs and piece.certs[0].spread and piece.certs[1].spread):
            raise AssertionError("selected piece lost its spread certificates")
        a_floor = ((1 - 5 * eps_f) * alpha * oc.delta_x() * oc.delta_y()
                   * oc.delta_d() * oc.side ** 2)
        if Fraction(out.a.cardinality) < a_floor:
            raise AssertionError(
                f"|A'| = {out.a.cardinality} < floor {float(a_floor):.6g}")

        entry["alpha_after"] = str(out.alpha)
        entry["conclusions"] = {
            "dim_drop": drop, "dim_bound": dim_bound,
            "delta_d": str(oc.delta_d()), "delta_d_floor": str(dd_floor),
            "rect": rect, "rect_floor": rect_floor,
            "piece_spread": [_cert_summary(t) for t in piece.certs],
            "a_count": out.a.cardinality, "a_floor": float(a_floor)}
        return out

    raise RuntimeError(
        "no partition piece meets the averaging bound"
        + ("; the partition was partial" if part.partial else
           "; the selection argument guarantees one, so a bug is upstream"))


# ---------------------------------------------------------------------------
# the alternating loop


def _asym_certificate(st: IncrementState, s: int, t: int, eps: float):
    c = st.container
    grid = st.a2()[np.ix_(c.x.indices(), c.y.indices())]
    mode = ("exact" if min(c.x.cardinality, c.y.cardinality) <= COMB_EXACT_SIDE
            else "alternating")
    cert = is_asym_spread(GridFunction(grid.astype(np.float64)), s, t,
                          float(eps), mode)
    return cert, mode


def _comb_restrict(st: IncrementState, cert: SpreadCertificate,
                   eps_f: Fraction) -> IncrementState:
    """Restrict X x Y to the violating rectangle and assert the gain."""
    c = st.container
    g1, g2 = cert.counterexample
    rows = c.x.indices()[np.asarray(g1, dtype=bool)]
    cols = c.y.indices()[np.asarray(g2, dtype=bool)]
    new_x = SubsetInd.from_indices(c.side, rows)
    new_y = SubsetInd.from_indices(c.side, cols)
    keep = new_x.bits[:, None] & new_y.bits[None, :]
    alpha = st.alpha
    entry = {"kind": "comb-increment", "alpha_before": str(alpha),
             "alpha_after": None, "rows": len(rows), "cols": len(cols)}
    out = IncrementState(
        Container(c.w, c.shift_x, c.shift_y, new_x, new_y, c.d),
        SubsetInd(c.side ** 2, (st.a2() & keep).ravel()),
        st.history + [entry])
    entry["alpha_after"] = str(out.alpha)
    if out.alpha < (1 + eps_f) * alpha:
        raise AssertionError(
            "the rectangle violation did not survive exact recounting")
    return out


def obtain_spreadness(a: SubsetInd, r: int, s: int, t: int,
                      eps: float) -> IncrementState:
    """Alternate rectangle restriction and pseudorandomization until A is
    combinatorially spread, then cull sparse rows and certify the endgame.

    Starts from the full container over F2^n x F2^n (n inferred from the
    cell count, at most 8).  Each loop iteration either certifies
    (s+1, t, eps)-spreadness of A's rectangle grid and moves to the
    endgame, or restricts to a violating rectangle (exact density gain
    1+eps) and re-spreads the sides by pseudorandomize at eps/16, for a
    net gain of 1+eps/2 per iteration.  The endgame drops the sparse rows
    outright when they are few, or culls and loops again.  Six conclusions
    are asserted on the result; the iteration count must stay within
    OBTAIN_ITER_C / eps * log(1/alpha_0), with a diagnostic failure at ten
    times the bound.
    """
    side = math.isqrt(a.size)
    if side * side != a.size or side & (side - 1):
        raise ValueError("A must index a 2^n x 2^n grid")
    n = side.bit_length() - 1
    if n > 8:
        raise ValueError("the exhaustive loop needs n <= 8")
    if a.cardinality == 0:
        raise ValueError("A is empty")
    eps_f = _frac(eps)
    if not (0 < eps_f < Fraction(1, 16)):
        raise ValueError("the endgame culling needs eps in (0, 1/16)")

    st = IncrementState(
        Container(full_space(n), 0, 0, SubsetInd.full(side),
                  SubsetInd.full(side), SubsetInd.full(side)), a, [])
    alpha0 = st.alpha
    eps_pr = 8 * eps_f / OBTAIN_EPS_S_DIVISOR
    itmax = 1
    if alpha0 < 1:
        itmax = math.ceil(OBTAIN_ITER_C / float(eps_f)
                          * math.log(1 / float(alpha0)))
    se = Fraction(math.sqrt(float(eps_f))).limit_denominator(10 ** 6)

    iters = 0
    grid_mode = "exact"
    while True:
        cert, grid_mode = _asym_certificate(st, s + 1, t, float(eps_f))
        if cert.spread:
            counts = st.row_counts()
            c = st.container
            thr = (1 - se) * st.alpha * c.delta_x() * c.delta_d() * c.side
            sparse = int(sum(1 for v in counts if Fraction(int(v)) < thr))
            if Fraction(sparse) > 4 * se * c.y.cardinality:
                st = cull_sparse_rows(st, se, 4 * se)
                iters += 1
            else:
                break
        else:
            st = _comb_restrict(st, cert, eps_f)
            alpha_mid = st.alpha
            st = pseudorandomize(st, r, float(eps_pr))
            prev = Fraction(st.history[-2]["alpha_before"])
            if st.alpha < (1 + eps_f / 2) * prev:
                raise AssertionError(
                    f"net gain {st.alpha / prev} fell below 1 + eps/2")
            iters += 1
        if iters > 10 * itmax:
            raise RuntimeError(
                "no convergence at ten times the iteration bound; "
                f"diagnostics: {st.to_json()}")

    # endgame: drop every remaining sparse row at the sqrt(eps) threshold
    c = st.container
    counts = st.row_counts()
    yv = c.y.indices()
    thr = (1 - se) * st.alpha * c.delta_x() * c.delta_d() * c.side
    drop = [int(y) for y, v in zip(yv, counts) if Fraction(int(v)) < thr]
    alpha_star = st.alpha
    entry = {"kind": "row-cull", "verdict": "endgame-drop",
             "removed": len(drop), "alpha_before": str(alpha_star),
             "alpha_after": None}
    if drop:
        new_y = c.y.bits.copy()
        new_y[drop] = False
        new_a = st.a2().copy()
        new_a[:, drop] = False
        st = IncrementState(
            Container(c.w, c.shift_x, c.shift_y, c.x,
                      SubsetInd(c.side, new_y), c.d),
            SubsetInd(c.side ** 2, new_a.ravel()), st.history + [entry])
    else:
        st = IncrementState(c, st.a, st.history + [entry])
    entry["alpha_after"] = str(st.alpha)

    _assert_obtain_conclusions(st, r, s, t, eps_f, se, alpha0, iters, itmax,
                               entry)
    return st


def _assert_obtain_conclusions(st, r, s, t, eps_f, se, alpha0, iters, itmax,
                               entry):
    c = st.container
    vrel = full_space(c.w.dim)
    five_se = float(5 * se)

    cert_x = is_alg_spread_f2(c.x, vrel, min(r, 2), five_se)
    cert_y = is_alg_spread_f2(c.y, vrel, min(r, 2), five_se)
    if not (cert_x.spread and cert_y.spread):
        raise AssertionError("a side lost algebraic spreadness in the endgame")

    lv = math.log(1 / float(alpha0)) if alpha0 < 1 else 0.0
    ev = float(eps_f)
    dd_floor = math.exp(-OBTAIN_DELTA_D_C * (t * lv / ev + (lv / ev) ** 2))
    if float(c.delta_d()) < dd_floor - 1e-12:
        raise AssertionError(f"delta_D = {float(c.delta_d())} < {dd_floor}")
    rect_floor = 2.0 ** -(OBTAIN_RECT_C * (s + t + lv / ev))
    if float(c.delta_x() * c.delta_y()) < rect_floor - 1e-12:
        raise AssertionError("the rectangle density fell through its floor")
    dim_bound = OBTAIN_DIM_C * (1 + r * lv / ev)
    drop = c.w.n - c.w.dim
    if drop > dim_bound + 1e-9:
        raise AssertionError(f"dimension drop {drop} exceeds {dim_bound}")

    comb_cert, comb_mode = _asym_certificate(st, s, t, five_se)
    if not comb_cert.spread:
        raise AssertionError("the final grid is not combinatorially spread")

    counts = st.row_counts()
    row_floor = (1 - OBTAIN_ROW_C * se) * st.alpha * c.delta_x() \
        * c.delta_d() * c.side
    if counts.size and Fraction(int(counts.min())) < row_floor:
        raise AssertionError("a surviving row sits below the endgame floor")

    entry["conclusions"] = {
        "alg_spread": {"x": _cert_summary(cert_x), "y": _cert_summary(cert_y),
                       "eps": five_se},
        "delta_d": str(c.delta_d()), "delta_d_floor": dd_floor,
        "rect": float(c.delta_x() * c.delta_y()), "rect_floor": rect_floor,
        "dim_drop": drop, "dim_bound": dim_bound,
        "comb_spread": {**_cert_summary(comb_cert), "mode": comb_mode,
                        "s": s, "t": t, "eps": five_se},
        "row_min": int(counts.min()) if counts.size else 0,
        "row_floor": float(row_floor), "row_coeff": str(1 - OBTAIN_ROW_C * se),
        "sqrt_eps": str(se), "iterations": iters, "iteration_bound": itmax,
        "alpha0": str(alpha0), "alpha": str(st.alpha)}


# ---------------------------------------------------------------------------
# the transfer check


def _norm_power_exact(vals: np.ndarray, p: int) -> Fraction:
    """||f||_{G(2,p)}^(2p) of a 0/1 matrix as an exact rational."""
    n1, n2 = vals.shape
    cnt = (vals.astype(np.int64) @ vals.astype(np.int64).T)
    total = sum(int(v) ** p for v in cnt.flat)
    return Fraction(total, n1 * n1 * n2 ** p)


def von_neumann_check(st: IncrementState, eps: float, p: int) -> InequalityReport:
    """Exact transfer test: small grid norms force many corner patterns.

    Hypotheses, all evaluated in rational arithmetic: (1) ||F1||_{G(2,p)}
    below (1 + eps^2/36) alpha delta_X, (2) ||F2||_{G(2,p)} below 2 alpha
    delta_Y, (3) every Y-row of A holds at least (1 - eps^2/36) alpha
    delta_X delta_D |W| cells.  When they hold, the corner functional
    Phi = E[A(x,y) A(x+d,y) A(x,y+d)] is computed exactly and asserted to
    be at least (1-4 eps) alpha^3 (delta_X delta_Y delta_D)^2.  Hypothesis
    failures are reported, never thrown.
    """
    if p < 1:
        raise ValueError("p must be positive")
    eps_f = _frac(eps)
    if not (0 < eps_f < 1):
        raise ValueError("eps must lie in (0,1)")
    c = st.container
    alpha = st.alpha
    if st.a.cardinality == 0:
        return InequalityReport("von-neumann", 0.0, 0.0, relation="<=",
                                details={"why": "A is empty", "alpha": "0",
                                         "phi": "0", "bound": "0"})

    f1, _, _ = st.f1_grid()
    f2, _, _ = st.f2_grid()
    pw1 = _norm_power_exact(f1.values, p)
    pw2 = _norm_power_exact(f2.values, p)
    b1 = (1 + eps_f ** 2 / 36) * alpha * c.delta_x()
    b2 = 2 * alpha * c.delta_y()
    h1 = pw1 < b1 ** (2 * p)
    h2 = pw2 < b2 ** (2 * p)
    counts = st.row_counts()
    row_floor = (1 - eps_f ** 2 / 36) * alpha * c.delta_x() * c.delta_d() * c.side
    row_min = int(counts.min()) if counts.size else 0
    h3 = Fraction(row_min) >= row_floor

    details = {
        "norm_f1": float(pw1) ** (1 / (2 * p)),
        "norm_f2": float(pw2) ** (1 / (2 * p)),
        "bound_f1": float(b1), "bound_f2": float(b2),
        "row_min": row_min, "row_floor": float(row_floor),
        "hypotheses": {"norm_f1": bool(h1), "norm_f2": bool(h2),
                       "rows": bool(h3)},
        "p": p, "eps": float(eps_f), "alpha": str(alpha)}

    a2 = st.a2()
    idx = np.arange(c.side)
    total = 0
    for d in range(c.side):
        perm = idx ^ d
        total += int((a2 & a2[perm, :] & a2[:, perm]).sum())
    phi = Fraction(total, c.side ** 3)
    bound = (_frac(VNL_P_C) * (1 - 4 * eps_f) * alpha ** 3
             * (c.delta_x() * c.delta_y() * c.delta_d()) ** 2)
    details["phi"] = str(phi)
    details["phi_float"] = float(phi)
    details["bound"] = str(bound)
    details["bound_float"] = float(bound)

    if not (h1 and h2 and h3):
        failed = [k for k, v in details["hypotheses"].items() if not v]
        details["why"] = "hypothesis not met: " + ", ".join(failed)
        return InequalityReport("von-neumann-skipped", 0.0, 0.0,
                                relation="<=", details=details)

    excess = bound - phi
    return InequalityReport("von-neumann", _excess_float(excess), 0.0,
                            relation="<=", tol=0.0, details=details)
