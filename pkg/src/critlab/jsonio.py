"""Deterministic JSON/CSV emission: 17 significant digits, non-finite floats as strings."""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA = "critlab/1"


def format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.17g" % x


def _plain(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    return obj


def dumps(obj: Any, indent: int = 1) -> str:
    out: list[str] = []
    _emit(obj, out, 0, indent)
    return "".join(out) + "\n"


def _emit(obj, out: list[str], level: int, indent: int):
    obj = _plain(obj)
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, str)):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, (key, val) in enumerate(obj.items()):
            out.append(("," if k else "") + pad + json.dumps(str(key)) + ": ")
            _emit(val, out, level + 1, indent)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            out.append("[" + ", ".join(format_float(float(v)) if isinstance(_plain(v), float)
                                       else str(_plain(v)) for v in obj) + "]")
            return
        out.append("[")
        for k, val in enumerate(obj):
            out.append(("," if k else "") + pad)
            _emit(val, out, level + 1, indent)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def loads(text: str) -> Any:
    """Inverse of :func:`dumps`; the strings ``"inf"``, ``"-inf"``, ``"nan"`` stay strings."""
    return json.loads(text)


def document(command: str, config: dict, result: Any) -> dict:
    return {"schema": SCHEMA, "command": command, "config": config, "result": result}


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([("%.17g" % v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
