"""Small helpers for deterministic text output.

All CSV files produced by this package go through :func:`write_csv`, so
the float formatting (17 significant digits, enough to round-trip a
float64) and the line endings are identical everywhere.
"""

from __future__ import annotations

import hashlib
import os


def fmt(value) -> str:
    """Format a value for CSV output."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: str | os.PathLike, header: list[str], rows) -> None:
    """Write rows of values as CSV with a fixed float format and LF endings."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def sha256_of(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
