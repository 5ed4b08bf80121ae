"""Conversion of results to JSON- and CSV-friendly values."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math

import numpy as np


def to_jsonable(obj):
    """Recursively convert ``obj`` to plain JSON types.

    Complex numbers become ``[re, im]``, arrays become nested lists, tuple
    keys of dicts are joined with commas, and non-finite floats become
    strings.

    >>> to_jsonable({(1, 2): 1 + 2j})
    {'1,2': [1.0, 2.0]}
    """
    if isinstance(obj, dict):
        return {_key(k): to_jsonable(v) for k, v in obj.items()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj) if not f.name.startswith("_")})
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_float(obj.real), _float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _float(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _key(k) -> str:
    if isinstance(k, tuple):
        return ",".join(str(x) for x in k)
    return str(k)


def dumps(obj, indent: int = 2) -> str:
    return json.dumps(to_jsonable(obj), indent=indent)


def rows_to_csv(rows) -> str:
    """CSV text from a header row followed by data rows; complex cells as ``re+imj``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_cell(c) for c in row])
    return buf.getvalue()


def _cell(c):
    if isinstance(c, (complex, np.complexfloating)):
        return f"{c.real:.17g}{c.imag:+.17g}j"
    if isinstance(c, (float, np.floating)):
        return f"{float(c):.17g}"
    if isinstance(c, (list, tuple, np.ndarray)):
        return " ".join(str(_cell(x)) for x in c)
    return c
