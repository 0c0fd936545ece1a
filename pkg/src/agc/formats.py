"""Text formats: edge lists, feature CSVs, label files, and atomic writes."""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .graph import SparseGraph, load_edge_list


def read_edges(path, n_hint=None) -> SparseGraph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh, n_hint=n_hint, name=str(path))


def format_edges(g: SparseGraph) -> str:
    out = io.StringIO()
    for u, v, w in g.edges():
        out.write(f"{u}\t{v}\n" if w == 1.0 else f"{u}\t{v}\t{w!r}\n")
    return out.getvalue()


def read_features(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                row = [float(v) for v in s.split(",")]
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"expected {width} columns, got {len(row)}", lineno, str(path))
            rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: no feature rows")
    x = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{path}: non-finite feature value")
    return x


def format_features(x) -> str:
    # %.17g round-trips float64 exactly
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(x), fmt="%.17g", delimiter=",")
    return buf.getvalue()


def read_labels(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise ParseError(f"not an integer label: {s!r}", lineno, str(path)) from None
    labels = np.array(out, dtype=np.int64)
    if labels.size and labels.min() < 0:
        raise ValidationError(f"{path}: labels must be nonnegative")
    return labels


def format_labels(labels) -> str:
    return "".join(f"{int(v)}\n" for v in np.asarray(labels).ravel())


def write_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
