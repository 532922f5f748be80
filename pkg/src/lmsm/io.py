"""CSV / JSON artifact writing with atomic replace and provenance hashing."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np


def _atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(x):
    """Shortest round-tripping decimal; independent of the process locale."""
    x = float(x)
    if x != x:
        return "nan"
    return repr(x)


def write_csv(path, header, columns, comments=()):
    """Write columns (a 2-D float array or a list of 1-D arrays) with a header line.

    Integer-typed columns are written as integers, everything else with
    round-tripping float repr.  ``comments`` go first, one ``# `` line each.
    """
    if isinstance(columns, np.ndarray) and columns.ndim == 2:
        columns = [columns[:, i] for i in range(columns.shape[1])]
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("header/column count mismatch")
    fmt = []
    for c in cols:
        if np.issubdtype(c.dtype, np.integer):
            fmt.append([str(int(v)) for v in c])
        else:
            fmt.append([format_float(v) for v in c])
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    lines.extend(",".join(row) for row in zip(*fmt))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        line = fh.readline()
        while line.startswith("#"):
            line = fh.readline()
        header = line.strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if f != f or f in (float("inf"), float("-inf")):
            return str(f)
        return f
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    _atomic_write(path, json.dumps(_to_jsonable(payload), indent=2, sort_keys=True) + "\n")


def provenance_hash(block):
    """Stable SHA-256 of a provenance block (canonical JSON)."""
    text = json.dumps(_to_jsonable(block), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
