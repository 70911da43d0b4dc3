"""Artifact loading with schema checks.

Tables arrive as headed CSV.  Numeric columns are parsed to float arrays;
anything that fails to parse stays a string column (the regime tag, for
example).  All validation happens here so the figure code can assume its
columns exist and are non-empty.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class PlotDataError(Exception):
    """Input artifact is missing, empty, or lacks required columns."""


def load_table(path, required: tuple = ()) -> dict:
    """Read a headed CSV into a dict of column arrays.

    Raises PlotDataError when the file cannot be read, has no data rows,
    or is missing any of `required`.  The error message names the columns
    involved so a wrong --in file is diagnosable from the CLI alone.
    """
    p = Path(path)
    try:
        with open(p, newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise PlotDataError(f"cannot read table {p}: {exc}") from exc
    if not rows:
        raise PlotDataError(f"table {p} is empty (no header)")
    header = [name.strip() for name in rows[0]]
    body = rows[1:]
    if not body:
        raise PlotDataError(f"table {p} has a header but no data rows")
    missing = [name for name in required if name not in header]
    if missing:
        raise PlotDataError(
            f"table {p} is missing column(s) {', '.join(missing)}; "
            f"found {', '.join(header)}"
        )
    cols: dict = {}
    by_name = list(zip(header, zip(*body)))
    for name, values in by_name:
        try:
            cols[name] = np.array([float(v) for v in values])
        except ValueError:
            cols[name] = np.array([str(v) for v in values])
    return cols


def load_fit_json(path) -> dict:
    """Read an auxiliary fit/scan JSON; None path returns an empty dict."""
    if path is None:
        return {}
    p = Path(path)
    try:
        with open(p) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PlotDataError(f"cannot read fit file {p}: {exc}") from exc
