"""Gram matrices: linear, RBF and precomputed files.

Precomputed files come in two formats:

* CSV: ``n`` lines of ``n`` comma-separated decimals;
* binary: the magic bytes ``GRAM``, ``n`` as unsigned 64-bit little-endian,
  then ``n*n`` little-endian float64 values in row-major order.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

MAGIC = b"GRAM"
SYM_WARN_RTOL = 1e-8
SYM_ERROR_RTOL = 1e-6
PSD_RTOL = 1e-8


class GramFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GramMatrix:
    K: np.ndarray
    source: str
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.K.shape[0]


def _finite_2d(Z):
    Z = np.array(Z, dtype=np.float64, ndmin=2)
    if Z.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("input contains NaN or Inf")
    return Z


def gram_linear(Z) -> GramMatrix:
    Z = _finite_2d(Z)
    K = Z @ Z.T
    return GramMatrix(0.5 * (K + K.T), "linear")


def rbf_scale(Z) -> float:
    """``d' * Var(Z)``, the variance taken over all entries."""
    Z = _finite_2d(Z)
    return Z.shape[1] * float(Z.var())


def gram_rbf(Z, zeta="auto", mode="squared") -> GramMatrix:
    """RBF Gram matrix.

    ``mode="squared"`` gives ``exp(-||z - z'||^2 / zeta)`` and
    ``mode="unsquared"`` gives ``exp(-||z - z'|| / zeta)``.  With
    ``zeta="auto"`` the scale is ``d' * Var(Z)``.
    """
    Z = _finite_2d(Z)
    if isinstance(zeta, str):
        if zeta != "auto":
            raise ValueError(f"zeta must be positive or 'auto', got {zeta!r}")
        zeta = rbf_scale(Z)
        if zeta == 0:
            zeta = 1.0
    zeta = float(zeta)
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    if mode == "squared":
        D = cdist(Z, Z, "sqeuclidean")
    elif mode == "unsquared":
        D = cdist(Z, Z, "euclidean")
    else:
        raise ValueError(f"unknown RBF mode {mode!r}")
    K = np.exp(-D / zeta)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return GramMatrix(K, f"rbf({mode}, zeta={zeta:.6g})", {"zeta": zeta, "mode": mode})


def _read_binary(path, raw):
    if len(raw) < 12:
        raise GramFormatError(f"{path}: truncated header")
    (n,) = struct.unpack("<Q", raw[4:12])
    body = raw[12:]
    if len(body) != 8 * n * n:
        raise GramFormatError(f"{path}: header says n={n} but payload holds {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(n, n).astype(np.float64)


def read_gram_file(path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise GramFormatError(f"cannot read {path}: {exc}") from exc
    if raw[:4] == MAGIC:
        return _read_binary(path, raw)
    try:
        K = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise GramFormatError(f"{path}: not a CSV matrix ({exc})") from exc
    return K


def load_precomputed(path, n: int, sym_error_rtol=SYM_ERROR_RTOL) -> GramMatrix:
    """Load an ``n x n`` kernel matrix and repair small defects.

    Asymmetry up to ``1e-8`` (relative to the largest entry) is averaged away
    silently, up to ``sym_error_rtol`` with a warning, and beyond that is an
    error.  A negative eigenvalue below ``-1e-8 * ||K||`` is lifted by
    adding its magnitude to the diagonal; the shift is kept in ``meta``.
    """
    K = read_gram_file(path)
    if K.shape != (n, n):
        raise GramFormatError(f"{path}: matrix is {K.shape[0]}x{K.shape[1]}, expected {n}x{n}")
    if not np.all(np.isfinite(K)):
        raise GramFormatError(f"{path}: matrix contains NaN or Inf")
    scale = max(1.0, float(np.abs(K).max(initial=0.0)))
    asym = float(np.abs(K - K.T).max(initial=0.0)) / scale
    meta = {"path": str(path), "asymmetry": asym, "psd_shift": 0.0}
    if asym > sym_error_rtol:
        raise GramFormatError(f"{path}: matrix asymmetric by {asym:.3e} (limit {sym_error_rtol:.1e})")
    if asym > SYM_WARN_RTOL:
        logger.warning("%s: asymmetry %.3e, using (K + K.T)/2", path, asym)
    K = 0.5 * (K + K.T)
    eigmin = float(np.linalg.eigvalsh(K)[0]) if n else 0.0
    norm = float(np.linalg.norm(K, 2)) if n else 0.0
    if eigmin < -PSD_RTOL * max(norm, 1e-300):
        shift = -eigmin
        logger.warning("%s: min eigenvalue %.3e, shifting diagonal by %.3e", path, eigmin, shift)
        K = K + shift * np.eye(n)
        meta["psd_shift"] = shift
    if np.any(np.diag(K) < 0):
        raise GramFormatError(f"{path}: negative diagonal entries")
    return GramMatrix(K, "precomputed", meta)


def save_gram(path, gm: GramMatrix | np.ndarray, fmt: str | None = None):
    """Write a Gram matrix; binary unless ``fmt == "csv"`` or the path ends in ``.csv``."""
    K = gm.K if isinstance(gm, GramMatrix) else np.asarray(gm, dtype=np.float64)
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "binary"
    if fmt == "csv":
        np.savetxt(path, K, delimiter=",", fmt="%.17g")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", K.shape[0]))
            fh.write(np.ascontiguousarray(K, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")


def label_adjusted(K, y) -> np.ndarray:
    """``diag(y) K diag(y)`` for labels in {-1, +1}."""
    K = K.K if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if K.shape != (y.size, y.size):
        raise ValueError(f"K has shape {K.shape} but y has {y.size} entries")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be -1 or +1")
    return (y[:, None] * K) * y[None, :]
