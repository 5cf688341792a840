"""Reading and writing problem, target and report files.

Complex numbers are stored as ``[re, im]``. Matrices are lists of columns.
Reports are written with every float at 17 significant digits so that
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .engineering import SetSpec
from .errors import ParseError
from .kvb_core import ExtensionProblem, GapInterval


def _number(x) -> float:
    if isinstance(x, str):
        try:
            return float(x.strip())
        except ValueError:
            raise ParseError(f"not a number: {x!r}") from None
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"not a number: {x!r}")
    return float(x)


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ParseError(f"complex entries need two components, got {x!r}")
        return complex(_number(x[0]), _number(x[1]))
    return complex(_number(x))


def encode_complex(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def decode_columns(columns, rows: int | None = None) -> np.ndarray:
    """List of columns (each a list of complex entries) to an ``(rows, k)`` array."""
    if not isinstance(columns, list):
        raise ParseError("expected a list of columns")
    cols = []
    for col in columns:
        if not isinstance(col, list):
            raise ParseError("each column must be a list")
        cols.append([_complex(x) for x in col])
    if not cols:
        return np.zeros((rows or 0, 0), dtype=complex)
    lengths = {len(c) for c in cols}
    if len(lengths) != 1 or (rows is not None and lengths != {rows}):
        raise ParseError(f"columns have lengths {sorted(lengths)}, expected {rows}")
    return np.array(cols, dtype=complex).T


def encode_columns(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[encode_complex(x) for x in m[:, j]] for j in range(m.shape[1])]


def decode_gap(data) -> GapInterval:
    if not isinstance(data, dict) or "b" not in data:
        raise ParseError('gap must be an object with keys "a" and "b"')
    a = _number(data.get("a", "-inf"))
    b = _number(data["b"])
    try:
        return GapInterval(a, b)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def encode_gap(g: GapInterval) -> dict:
    return {"a": "-inf" if math.isinf(g.a) else g.a, "b": g.b}


def _load_json(source) -> Any:
    try:
        if isinstance(source, (str, Path)) and Path(source).exists():
            return json.loads(Path(source).read_text())
        if isinstance(source, (str, bytes)):
            return json.loads(source)
        return source
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed JSON: {exc}") from None


def problem_from_json(source) -> ExtensionProblem:
    """Parse a problem file; the domain basis need not be orthonormal."""
    data = _load_json(source)
    try:
        n = int(data["dim"])
        basis = decode_columns(data["domain_basis"], n)
        action = decode_columns(data["action"], n)
        s_d = decode_columns(data["s_d"], n)
        gap = decode_gap(data["gap"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"problem file is missing or mistypes a field: {exc}") from None
    if s_d.shape != (n, n):
        raise ParseError(f"s_d must be {n} x {n}")
    if basis.shape != action.shape:
        raise ParseError("domain_basis and action must have the same number of columns")
    try:
        return ExtensionProblem.from_basis(basis, action, s_d, gap)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def problem_to_json(p: ExtensionProblem) -> dict:
    return {
        "dim": p.dim,
        "domain_basis": encode_columns(p.domain.basis),
        "action": encode_columns(p.action),
        "s_d": encode_columns(p.s_d),
        "gap": encode_gap(p.gap),
    }


def targets_from_json(source) -> tuple[float, ...] | tuple[SetSpec, int]:
    """Either an explicit target tuple or ``(SetSpec, count)``."""
    data = _load_json(source)
    if not isinstance(data, dict):
        raise ParseError("targets file must be a JSON object")
    if "lambdas" in data:
        if not isinstance(data["lambdas"], list):
            raise ParseError('"lambdas" must be a list')
        return tuple(_number(x) for x in data["lambdas"])
    if "set" in data:
        spec = data["set"]
        try:
            intervals = tuple((_number(x), _number(y)) for x, y in spec.get("intervals", []))
            points = tuple(_number(x) for x in spec.get("points", []))
            count = int(data["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad set specification: {exc}") from None
        return SetSpec(intervals, points), count
    raise ParseError('targets file needs "lambdas" or "set"')


def parse_lambda_list(text: str) -> tuple[float, ...]:
    """Comma-separated numbers, e.g. ``"0.75,-3"``."""
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ParseError(f"cannot parse target list {text!r}") from None


def parse_set_spec(text: str) -> SetSpec:
    """``"0;[0.25,0.5]"``: semicolon-separated points and ``[x,y]`` intervals."""
    intervals, points = [], []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        try:
            if item.startswith("["):
                x, y = item.strip("[]").split(",")
                intervals.append((float(x), float(y)))
            else:
                points.append(float(item))
        except ValueError:
            raise ParseError(f"cannot parse set item {item!r}") from None
    return SetSpec(tuple(intervals), tuple(points))


# ---------------------------------------------------------------------------
# deterministic output


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and non-finite values as strings."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps(encode_complex(obj), indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if not len(obj):
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(float(x), ".17g") if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()
