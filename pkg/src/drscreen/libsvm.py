"""Reader and writer for the LIBSVM sparse text format.

Each line is ``<label> <index>:<value> ...`` with 1-based, strictly
increasing feature indices.  Missing features are zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class LibsvmFormatError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


@dataclass
class LibsvmData:
    X: np.ndarray
    y: np.ndarray
    raw_labels: np.ndarray
    label_map: dict = field(default_factory=dict)


def _parse_lines(lines, path):
    labels, rows, cols, vals = [], [], [], []
    r = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise LibsvmFormatError(path, lineno, f"bad label {parts[0]!r}") from None
        prev = 0
        for tok in parts[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmFormatError(path, lineno, f"expected index:value, got {tok!r}")
            try:
                j = int(idx)
                v = float(val)
            except ValueError:
                raise LibsvmFormatError(path, lineno, f"non-numeric entry {tok!r}") from None
            if j <= prev:
                raise LibsvmFormatError(path, lineno, f"indices must be 1-based and ascending at {tok!r}")
            prev = j
            rows.append(r)
            cols.append(j - 1)
            vals.append(v)
        r += 1
    return np.array(labels), rows, cols, vals, r


def parse_libsvm(path, n_features: int | None = None, binary: bool = True) -> LibsvmData:
    """Load a LIBSVM file into a dense matrix.

    With ``binary=True`` a two-valued label set other than {-1, +1} is mapped
    to {-1, +1}, the larger raw label becoming +1 (so {0,1}, {1,2} and {2,4}
    all map naturally).  The mapping is returned in ``label_map``.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        labels, rows, cols, vals, n = _parse_lines(fh, path)
    if n == 0:
        raise LibsvmFormatError(path, 0, "no samples")
    d = (max(cols) + 1) if cols else 0
    if n_features is not None:
        if n_features < d:
            raise ValueError(f"{path}: feature index {d} exceeds n_features={n_features}")
        d = n_features
    X = np.zeros((n, d))
    X[rows, cols] = vals
    label_map = {}
    y = labels.copy()
    if binary:
        uniq = np.unique(labels)
        if len(uniq) == 2 and not (uniq[0] == -1 and uniq[1] == 1):
            label_map = {float(uniq[0]): -1.0, float(uniq[1]): 1.0}
            y = np.where(labels == uniq[1], 1.0, -1.0)
        elif len(uniq) == 1 and uniq[0] in (-1.0, 1.0):
            pass
        elif len(uniq) > 2:
            raise ValueError(f"{path}: {len(uniq)} distinct labels, expected a binary problem")
    return LibsvmData(X, y, labels, label_map)


def write_libsvm(path, X, y, fmt="%.17g"):
    """Write a dense matrix in LIBSVM format, omitting zeros."""
    X = np.asarray(X, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(y, X):
            nz = np.flatnonzero(row)
            feats = " ".join(f"{j + 1}:{fmt % row[j]}" for j in nz)
            fh.write((f"{fmt % label} {feats}").rstrip() + "\n")


def scale_features(X, lower=-1.0, upper=1.0):
    """Per-feature min-max scaling to ``[lower, upper]``.

    Constant features are set to zero, matching LIBSVM's ``svm-scale`` which
    drops them from its output.
    """
    X = np.asarray(X, dtype=float)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = lower + (upper - lower) * (X[:, ok] - lo[ok]) / span[ok]
    return out
