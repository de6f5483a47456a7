"""cornerslab: a desk-scale laboratory for corner-free sets and their tools.

Everything here runs on instances small enough that the exact object (a
corner count, a grid norm, a sifting witness, a Bohr set) can be computed and
checked against an independent brute-force oracle. The package covers:

- finite abelian groups, subsets, and grid functions with exact expectations
- corner counting and the averaged trilinear form that controls it
- grid norms G(k,l), their Gowers-style variants over Bohr sets, and the
  inequalities they satisfy (Holder, monotonicity, triangle)
- sifting: turning a large grid norm into a structured witness pair
- spreadness notions (combinatorial, algebraic over F2 and Bohr sets,
  asymmetric, l1) with certified search
- the density-increment / pseudorandomization engine over F2^n
- Behrend-style progression-free sets, their corner-free lifts, and the
  number-on-forehead protocol compiler built from them
"""
from __future__ import annotations

from .constants import CONSTANTS, TABLE_DIGEST

__version__ = "0.1.0"

__all__ = ["CONSTANTS", "TABLE_DIGEST", "__version__"]
