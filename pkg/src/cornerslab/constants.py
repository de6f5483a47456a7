"""Pinned implementation constants.

Every checked inequality in this package has concrete constants in the slots
where the underlying mathematics only promises "some constant". They are all
pinned in one checked-in table, constants.json, so a report can state exactly
which numbers it asserted. The sha256 digest of that file is embedded in CLI
reports; changing any constant changes the digest and thereby invalidates any
recorded baseline.
"""
from __future__ import annotations

import hashlib
import json
from importlib import resources

__all__ = ["CONSTANTS", "TABLE_DIGEST", "constant"]


def _load() -> tuple[dict, str]:
    raw = resources.files("cornerslab").joinpath("constants.json").read_bytes()
    return json.loads(raw), hashlib.sha256(raw).hexdigest()


CONSTANTS, TABLE_DIGEST = _load()


def constant(name: str):
    """Look up a pinned constant by name. Unknown names are a hard error."""
    if name not in CONSTANTS:
        raise KeyError(f"unknown pinned constant {name!r}")
    return CONSTANTS[name]
