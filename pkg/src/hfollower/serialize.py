"""Flat key=value structured text, lossless float formatting, CSV writers.

All floats are written with 17 significant digits, which round-trips IEEE
double exactly.  Files use '\n' line endings and '.' decimal separators
regardless of locale.
"""

from __future__ import annotations

import hashlib
import io

import numpy as np

FLOAT_FMT = "%.17g"


def fmt_float(x) -> str:
    return FLOAT_FMT % float(x)


def fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(fmt_value(v) for v in value)
    raise TypeError(f"cannot serialize value of type {type(value)!r}")


def dump_kv(pairs, header: str | None = None) -> str:
    """Render an ordered iterable of (key, value) pairs as structured text."""
    lines = []
    if header:
        lines.append(f"# {header}")
    for key, value in pairs:
        lines.append(f"{key} = {fmt_value(value)}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored.

    Values stay strings; call the as_* helpers for typed access.
    """
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed line (missing '='): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def as_floats(value: str) -> np.ndarray:
    parts = [p for p in value.split(",") if p.strip() != ""]
    return np.array([float(p) for p in parts], dtype=float)


def as_float(value: str) -> float:
    return float(value)


def as_int(value: str) -> int:
    return int(value)


def as_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def config_hash(text: str) -> str:
    """SHA-256 of the canonical serialized configuration text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_csv(path_or_buf, header: list[str], columns) -> str:
    """Write columns (sequences of equal length) as CSV with lossless floats.

    Returns the rendered text; writes to `path_or_buf` when it is not None.
    """
    columns = [np.asarray(c) for c in columns]
    n = len(columns[0])
    for c in columns:
        if len(c) != n:
            raise ValueError("CSV columns must have equal length")
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i in range(n):
        cells = []
        for c in columns:
            v = c[i]
            if isinstance(v, (str, np.str_)):
                cells.append(str(v))
            elif isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(fmt_float(v))
        buf.write(",".join(cells) + "\n")
    text = buf.getvalue()
    if path_or_buf is not None:
        with open(path_or_buf, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
