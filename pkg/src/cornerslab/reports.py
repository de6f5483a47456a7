"""Inequality reports shared by every numeric check in the package.

A report records one asserted inequality: its name, both sides, the claimed
direction, and the slack in that direction. Checks never raise on a numeric
violation; they return a report with holds == False so callers can decide.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

__all__ = ["InequalityReport"]


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    relation: str = "<="
    tol: float = 1e-9
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.relation not in ("<=", ">="):
            raise ValueError(f"relation must be <= or >=, got {self.relation!r}")

    @property
    def margin(self) -> float:
        """Slack in the claimed direction; nonnegative when the claim holds."""
        if self.relation == "<=":
            return self.rhs - self.lhs
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.margin >= -self.tol

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "margin": self.margin,
            "holds": self.holds,
            "details": self.details,
        }
