"""JSON and CSV serialization with lossless floats.

Every float is written with 17 significant digits so a value read back is the
same double. Non-finite floats become ``null`` in JSON and ``nan``/``inf`` in
CSV. CSV files use a header row, commas and LF line endings.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from pathlib import Path

import numpy as np

from .core2d import as_mat2
from .errors import InvalidInput


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    text = format(x, ".17g")
    # keep a float marker so integral values read back as floats
    return text if any(c in text for c in ".en") else text + ".0"


def _plain(obj):
    """Convert numpy scalars/arrays, enums and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, enum.Enum):
        return _plain(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(_plain(obj), indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), newline="\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read JSON {path}: {exc}") from exc


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    Path(path).write_text(text, newline="\n")


def read_text(path) -> str:
    try:
        with open(path, newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# pair input


def parse_matrix(text: str, name: str):
    """A 2x2 matrix from JSON (``[[a, b], [c, d]]``) or four comma-separated numbers."""
    text = text.strip()
    try:
        value = json.loads(text) if text.startswith("[") else [
            float(s) for s in text.replace(";", ",").split(",")]
    except (json.JSONDecodeError, ValueError) as exc:
        raise InvalidInput(f"cannot parse matrix {name}: {text!r}") from exc
    arr = np.asarray(value, dtype=object)
    if arr.size == 4:
        arr = arr.reshape(2, 2)
    return pair_matrix(arr.tolist(), name)


def parse_vector(text: str, name: str):
    try:
        value = [float(s) for s in text.strip().strip("[]").split(",")]
    except ValueError as exc:
        raise InvalidInput(f"cannot parse vector {name}: {text!r}") from exc
    x = np.asarray(value)
    if x.shape != (2,) or not np.all(np.isfinite(x)):
        raise InvalidInput(f"{name} must be two finite numbers")
    return x


def pair_matrix(value, name: str):
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"matrix {name} has non-numeric entries") from exc
    if any(isinstance(v, (bool, str)) for v in np.asarray(value, dtype=object).ravel()):
        raise InvalidInput(f"matrix {name} has non-numeric entries")
    return as_mat2(m, name)


def pair_from_dict(data):
    if not isinstance(data, dict) or "a" not in data or "b" not in data:
        raise InvalidInput('pair must be an object with keys "a" and "b"')
    label = data.get("label")
    return pair_matrix(data["a"], "A"), pair_matrix(data["b"], "B"), label


def load_pairs(path):
    """One pair object or a list of them."""
    data = read_json(path)
    items = data if isinstance(data, list) else [data]
    if not items:
        raise InvalidInput("pair file holds no pairs")
    return [pair_from_dict(item) for item in items]


def pair_dict(a, b, label=None):
    out = {"a": np.asarray(a).tolist(), "b": np.asarray(b).tolist()}
    if label is not None:
        out["label"] = label
    return out
