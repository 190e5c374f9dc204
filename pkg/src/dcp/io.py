"""CSV dataset reading/writing and atomic file output.

Schema: UTF-8, header row, first column ``y``, remaining columns ``x1..xp``,
decimal points and no thousands separators.  Rows are in time order when the
dataset is time ordered.  Floats are written with shortest round-trip
formatting, so identical datasets produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import Dataset
from .errors import DataFormatError


def _expected_header(n_features: int) -> list[str]:
    return ["y"] + [f"x{i + 1}" for i in range(n_features)]


def read_dataset_csv(path: str | Path, time_ordered: bool = False) -> Dataset:
    """Load a dataset, reporting schema violations with line numbers."""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "y":
            raise DataFormatError(
                f"{path} line 1: header must start with column 'y', got {header!r}")
        expected = _expected_header(len(header) - 1)
        if header != expected:
            missing = [c for c in expected if c not in header]
            name = missing[0] if missing else "x1..xp in order"
            raise DataFormatError(
                f"{path} line 1: expected columns {expected}, got {header!r} "
                f"(missing or misplaced column: {name})")
        ys, xs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path} line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise DataFormatError(f"{path} line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError(f"{path} line {lineno}: non-finite value")
            ys.append(vals[0])
            xs.append(vals[1:])
    if len(ys) < 2:
        raise DataFormatError(f"{path}: need at least two data rows")
    return Dataset(np.array(ys), np.array(xs), time_ordered=time_ordered)


def format_float(v: float) -> str:
    return repr(float(v))


def dataset_csv_text(columns: list[str], rows: list[list[float]]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def write_text_atomic(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so outputs are all-or-nothing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_json_text(payload: dict) -> str:
    """Deterministic JSON serialization (sorted keys, round-trip floats)."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def bins_csv_text(bins: list[dict]) -> str:
    """Plot-ready per-bin table."""
    lines = ["lo,hi,coverage,length,n"]
    for b in bins:
        cells = [b["lo"], b["hi"], b["coverage"], b["length"]]
        text = [("" if c is None else format_float(c)) for c in cells]
        lines.append(",".join(text + [str(b["n"])]))
    return "\n".join(lines) + "\n"
