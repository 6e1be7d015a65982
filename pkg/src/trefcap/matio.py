"""Matrix export/import in CSV and JSON.

CSV: one row per line, entries comma-separated, 17 significant digits
(lossless round trip for doubles).  JSON: {"dims": [rows, cols],
"entries": [... row-major ...]}.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ComparisonError

__all__ = ["export_matrix", "import_matrix"]


def export_matrix(matrix, path, fmt: str | None = None) -> None:
    """Write a dense matrix; fmt defaults from the file extension."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for row in m:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    elif fmt == "json":
        payload = {"dims": [int(m.shape[0]), int(m.shape[1])], "entries": m.ravel().tolist()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    else:
        raise ValueError(f"unknown matrix format {fmt!r} (expected csv or json)")


def import_matrix(path) -> np.ndarray:
    """Read a matrix written by export_matrix (format sniffed)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        try:
            rows, cols = payload["dims"]
            entries = payload["entries"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ComparisonError(f"{path}: malformed matrix JSON: {exc}") from exc
        m = np.asarray(entries, dtype=float)
        if m.size != rows * cols:
            raise ComparisonError(
                f"{path}: dims {rows}x{cols} do not match {m.size} entries"
            )
        return m.reshape(rows, cols)
    rows = [
        [float(v) for v in line.split(",")]
        for line in text.splitlines()
        if line.strip()
    ]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ComparisonError(f"{path}: ragged or empty CSV matrix")
    return np.array(rows)
