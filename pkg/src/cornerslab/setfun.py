"""Subsets and bounded functions with exact expectations.

Expectations are always normalized (E over the stated domain), densities are
exact Fractions, and the JSON interchange format is shared by every CLI
subcommand: {"domain": "<group descriptor or int size>", "kind": "subset" |
"grid", "data": "<hex bits or row-major float list>"}. Grid payloads carry
explicit "rows" and "cols". Bits are packed little-endian within bytes.

Dense arrays only; sides are expected to stay at or below about 4096, which
is all the desk-scale suites need.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .group import Group, parse_group

__all__ = [
    "SubsetInd",
    "GridFunction",
    "GroupFunction",
    "convolve",
    "p_norm",
    "restrict",
    "load_set",
    "save_set",
]


@dataclass
class SubsetInd:
    """Indicator of a subset of {0..size-1} with a cached cardinality."""

    size: int
    bits: np.ndarray
    cardinality: int = field(init=False)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.size,):
            raise ValueError(f"expected {self.size} bits, got shape {self.bits.shape}")
        self.cardinality = int(self.bits.sum())

    @classmethod
    def from_indices(cls, size: int, indices) -> "SubsetInd":
        bits = np.zeros(size, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= size):
            raise ValueError("index out of range")
        bits[idx] = True
        return cls(size, bits)

    @classmethod
    def full(cls, size: int) -> "SubsetInd":
        return cls(size, np.ones(size, dtype=bool))

    @classmethod
    def empty(cls, size: int) -> "SubsetInd":
        return cls(size, np.zeros(size, dtype=bool))

    def density(self) -> Fraction:
        return Fraction(self.cardinality, self.size)

    def contains(self, i: int) -> bool:
        return bool(self.bits[i])

    def indices(self) -> np.ndarray:
        return np.nonzero(self.bits)[0]

    def complement(self) -> "SubsetInd":
        return SubsetInd(self.size, ~self.bits)

    def intersect(self, other: "SubsetInd") -> "SubsetInd":
        if other.size != self.size:
            raise ValueError("size mismatch")
        return SubsetInd(self.size, self.bits & other.bits)

    def to_hex(self) -> str:
        return np.packbits(self.bits, bitorder="little").tobytes().hex()

    @classmethod
    def from_hex(cls, size: int, hexdata: str) -> "SubsetInd":
        raw = np.frombuffer(bytes.fromhex(hexdata), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")
        if len(bits) < size:
            raise ValueError(f"hex payload holds {len(bits)} bits, need {size}")
        return cls(size, bits[:size].astype(bool))


@dataclass
class GridFunction:
    """A function on a product domain, stored dense, entries in [-1, 1]."""

    values: np.ndarray
    nonneg: bool = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("grid functions are two dimensional")
        lo, hi = float(self.values.min(initial=0.0)), float(self.values.max(initial=0.0))
        if lo < -1 - 1e-12 or hi > 1 + 1e-12:
            raise ValueError(f"entries must lie in [-1,1], saw [{lo}, {hi}]")
        self.nonneg = bool(lo >= -1e-15)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def from_subset_pair(cls, s: SubsetInd, rows: int, cols: int) -> "GridFunction":
        if rows * cols != s.size:
            raise ValueError(f"{rows}x{cols} grid cannot hold {s.size} bits")
        return cls(s.bits.reshape(rows, cols).astype(np.float64))

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass
class GroupFunction:
    group: Group
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.group.order,):
            raise ValueError("value vector does not match the group order")

    def mean(self) -> float:
        return float(self.values.mean())


def convolve(f: GroupFunction, g: GroupFunction) -> GroupFunction:
    """(f * g)(x) = E_y f(y) g(x - y).

    One FFT per factor, tensored: for factor 2 the transform is the
    two-point DFT, which is the same butterfly the Walsh-Hadamard transform
    applies, so a single fftn covers cyclic and F2^n domains alike.
    """
    if f.group != g.group:
        raise ValueError("convolution needs a common group")
    shape = f.group.factors
    fa = np.fft.fftn(f.values.reshape(shape))
    ga = np.fft.fftn(g.values.reshape(shape))
    out = np.fft.ifftn(fa * ga).real / f.group.order
    return GroupFunction(f.group, out.reshape(-1))


def p_norm(values, k) -> float:
    """Power mean (E|f|^k)^(1/k) over the whole array."""
    if k <= 0:
        raise ValueError(f"p_norm needs k > 0, got {k}")
    a = np.abs(np.asarray(values, dtype=np.float64))
    return float(np.mean(a**k) ** (1.0 / k))


def restrict(f: GridFunction, rows: SubsetInd, cols: SubsetInd) -> GridFunction:
    """Submatrix of f on the given row and column subsets.

    An empty subset is an error (the restricted expectation would be over an
    empty domain); this is deliberately distinct from a zero-density but
    nonempty restriction, which is fine.
    """
    n1, n2 = f.shape
    if rows.size != n1 or cols.size != n2:
        raise ValueError("subset sizes do not match the grid")
    if rows.cardinality == 0 or cols.cardinality == 0:
        raise ValueError("restriction to an empty subset")
    return GridFunction(f.values[np.ix_(rows.indices(), cols.indices())])


# ---------------------------------------------------------------------------
# JSON interchange


def _domain_size(domain) -> int:
    if isinstance(domain, int):
        return domain
    if isinstance(domain, str) and domain.isdigit():
        return int(domain)
    return parse_group(domain).order


def load_set(path):
    """Load a SubsetInd or GridFunction from the shared JSON format."""
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "subset":
        size = _domain_size(doc["domain"])
        if "rows" in doc and "cols" in doc:
            size = int(doc["rows"]) * int(doc["cols"])
        return SubsetInd.from_hex(size, doc["data"])
    if kind == "grid":
        rows, cols = int(doc["rows"]), int(doc["cols"])
        data = np.asarray(doc["data"], dtype=np.float64)
        if data.size != rows * cols:
            raise ValueError(f"grid payload holds {data.size} values, need {rows * cols}")
        return GridFunction(data.reshape(rows, cols))
    raise ValueError(f"unknown set kind {kind!r}")


def save_set(path, obj, domain=None, rows=None, cols=None) -> None:
    if isinstance(obj, SubsetInd):
        doc = {"domain": domain if domain is not None else obj.size,
               "kind": "subset", "data": obj.to_hex()}
        if rows is not None:
            doc["rows"], doc["cols"] = rows, cols
    elif isinstance(obj, GridFunction):
        r, c = obj.shape
        doc = {"domain": domain if domain is not None else r * c, "kind": "grid",
               "rows": r, "cols": c, "data": [float(v) for v in obj.values.reshape(-1)]}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
