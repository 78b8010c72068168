"""Matrix files and test-matrix generators.

Two on-disk formats are understood:

* ``bin``: magic ``BFMAT1``, then rows and cols as little-endian u64, then
  the entries as little-endian f64 in row-major order.
* ``csv``: one row per line, comma separated, 17 significant digits.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard as _sylvester

from .kfactor import KroneckerSparseFactor, dense_product
from .pattern import as_architecture, rank_vector

MAGIC = b"BFMAT1"
_HEADER = struct.Struct("<QQ")


class MatrixFileError(OSError):
    """A matrix file is malformed or truncated."""


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("bin", "csv"):
            raise ValueError(f"unknown matrix format {fmt!r}")
        return fmt
    return "csv" if str(path).lower().endswith(".csv") else "bin"


def write_matrix(path, A: np.ndarray, fmt: str | None = None) -> None:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {A.shape}")
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        np.savetxt(path, A, fmt="%.17g", delimiter=",")
        return
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(*A.shape))
        fh.write(np.ascontiguousarray(A, dtype="<f8").tobytes())


def read_matrix(path, fmt: str | None = None) -> np.ndarray:
    fmt = _infer_format(path, fmt)
    if fmt == "csv":
        try:
            return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise MatrixFileError(f"{path}: {exc}") from exc
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size or raw[:len(MAGIC)] != MAGIC:
        raise MatrixFileError(f"{path}: not a BFMAT1 file")
    head = len(MAGIC) + _HEADER.size
    rows, cols = _HEADER.unpack(raw[len(MAGIC):head])
    if len(raw) - head != 8 * rows * cols:
        raise MatrixFileError(f"{path}: expected {rows}x{cols} entries, file holds {(len(raw) - head) // 8}")
    return np.frombuffer(raw, dtype="<f8", offset=head).reshape(rows, cols).astype(np.float64)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so that a seed means the same stream everywhere."""
    return np.random.Generator(np.random.Philox(int(seed)))


def hadamard(n: int) -> np.ndarray:
    """Sylvester Hadamard matrix, ``n`` a power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"Hadamard size must be a power of 2, got {n}")
    return _sylvester(n).astype(np.float64)


def random_butterfly_matrix(arch, rng: np.random.Generator, dist: str = "uniform") -> np.ndarray:
    arch = as_architecture(arch)
    rank_vector(arch)
    return dense_product([KroneckerSparseFactor.random(p, rng, dist) for p in arch])


def add_noise(clean: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """``clean + eps * ||clean|| / ||E|| * E`` with ``E`` standard Gaussian."""
    E = rng.standard_normal(clean.shape)
    scale = eps * np.linalg.norm(clean) / np.linalg.norm(E) if eps else 0.0
    return clean + scale * E


def noisy_butterfly_matrix(arch, eps: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Product of uniform ``[0, 1]`` factors plus relative Gaussian noise; returns ``(A, clean)``."""
    clean = random_butterfly_matrix(arch, rng, "uniform")
    return add_noise(clean, eps, rng), clean
