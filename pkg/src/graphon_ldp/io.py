"""File formats: edge lists, dense adjacency CSV, graphon JSON, CSV output."""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
from pathlib import Path

import numpy as np

from .graphon import BlockGraphon, ReferenceGraphon, constant, rank1, reference_from_dict

__all__ = [
    "read_edge_list",
    "read_adjacency_csv",
    "load_json",
    "load_graphon",
    "parse_reference",
    "fmt",
    "write_csv",
    "write_json",
]


def fmt(x) -> str:
    """Full-precision, locale-independent text for a number."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def read_edge_list(source, n: int | None = None) -> np.ndarray:
    """Adjacency matrix from ``u v`` lines (0-indexed); ``#`` starts a comment."""
    text = Path(source).read_text() if not isinstance(source, _io.StringIO) else source.getvalue()
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two vertex indices")
        u, v = int(parts[0]), int(parts[1])
        if u < 0 or v < 0:
            raise ValueError(f"line {lineno}: vertex indices must be non-negative")
        if u == v:
            raise ValueError(f"line {lineno}: self-loops are not allowed")
        edges.append((u, v))
    size = max((max(e) for e in edges), default=-1) + 1
    if n is not None:
        if n < size:
            raise ValueError(f"edge list mentions vertex {size - 1} but n = {n}")
        size = n
    a = np.zeros((size, size))
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    return a


def read_adjacency_csv(source) -> np.ndarray:
    with open(source, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    a = np.array([[float(c) for c in r] for r in rows]) if rows else np.zeros((0, 0))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency CSV must be square")
    return a


def load_json(source: str):
    """Parse inline JSON text or the contents of a JSON file."""
    s = source.strip()
    if s.startswith("{") or s.startswith("["):
        return json.loads(s)
    with open(source) as fh:
        return json.load(fh)


def load_graphon(data) -> BlockGraphon | ReferenceGraphon:
    """Block graphon (``{"n", "values"}``) or reference graphon (``{"family", ...}``)."""
    if isinstance(data, str):
        data = load_json(data)
    if not isinstance(data, dict):
        raise ValueError("graphon JSON must be an object")
    if "family" in data:
        return reference_from_dict(data)
    if "values" in data:
        return BlockGraphon.from_dict(data)
    raise ValueError("graphon JSON needs either 'family' or 'values'")


def parse_reference(reference: str | None = None, constant_p: float | None = None,
                    rank1_coeffs: str | None = None) -> ReferenceGraphon:
    given = [x is not None for x in (reference, constant_p, rank1_coeffs)]
    if sum(given) != 1:
        raise ValueError("give exactly one of --reference, --constant, --rank1")
    if constant_p is not None:
        return constant(float(constant_p))
    if rank1_coeffs is not None:
        return rank1([float(c) for c in rank1_coeffs.split(",")])
    g = load_graphon(reference)
    if isinstance(g, BlockGraphon):
        from .graphon import GridReference

        return GridReference(g)
    return g


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    # JSON has no infinities; encode them as strings
    if isinstance(o, float) and not math.isfinite(o):
        return fmt(o)
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def dumps(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_default, allow_nan=True))),
                      sort_keys=True)


def write_json(path, obj) -> None:
    _atomic_write(path, json.dumps(_clean(json.loads(json.dumps(obj, default=_default))),
                                   indent=2, sort_keys=True) + "\n")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
