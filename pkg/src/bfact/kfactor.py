"""Kronecker-sparse factors stored densely over their support.

A ``(a, b, c, d)``-factor keeps its nonzeros in an array ``values`` of shape
``(a, b, c, d)``; entry ``values[al, rho, ga, de]`` sits at row
``al*b*d + rho*d + de`` and column ``al*c*d + ga*d + de`` (0-based).
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import numpy as np

from .pattern import ArchitectureError, Pattern
from .support import BlockLayout

DEFAULT_UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KroneckerSparseFactor:
    pattern: Pattern
    values: np.ndarray

    def __init__(self, pattern, values=None):
        pattern = Pattern.coerce(pattern)
        if values is None:
            values = np.zeros(pattern.as_tuple())
        values = np.asarray(values, dtype=np.float64)
        if values.size != pattern.nnz:
            raise ValueError(f"expected {pattern.nnz} values for {pattern}, got {values.size}")
        values = values.reshape(pattern.as_tuple())
        values.setflags(write=False)
        object.__setattr__(self, "pattern", pattern)
        object.__setattr__(self, "values", values)

    def __repr__(self):
        return f"KroneckerSparseFactor({self.pattern.as_tuple()}, norm={self.norm():.3g})"

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column indices of every stored entry, in values order."""
        a, b, c, d = self.pattern
        al, rho, ga, de = np.indices((a, b, c, d), sparse=True)
        rows = al * b * d + rho * d + de
        cols = al * c * d + ga * d + de
        return np.broadcast_to(rows, (a, b, c, d)).ravel(), np.broadcast_to(cols, (a, b, c, d)).ravel()

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        rows, cols = self.index_arrays()
        out[rows, cols] = self.values.ravel()
        return out

    def to_sparse(self):
        from scipy import sparse

        rows, cols = self.index_arrays()
        return sparse.csr_matrix((self.values.ravel(), (rows, cols)), shape=self.shape)

    @classmethod
    def from_dense(cls, A: np.ndarray, pattern) -> tuple["KroneckerSparseFactor", float]:
        """Restrict ``A`` to the support of ``pattern``.

        Returns the factor and the squared Frobenius mass of ``A`` outside the
        support.
        """
        pattern = Pattern.coerce(pattern)
        A = np.asarray(A, dtype=np.float64)
        if A.shape != pattern.shape:
            raise ValueError(f"matrix of shape {A.shape} does not match {pattern} ({pattern.shape})")
        a, b, c, d = pattern
        vals = np.einsum("ibjicj->ibcj", A.reshape(a, b, d, a, c, d)).copy()
        # zero the support and sum what is left; subtracting norms would cancel
        rest = A.copy()
        view = np.einsum("ibjicj->ibcj", rest.reshape(a, b, d, a, c, d))
        view[...] = 0.0
        return cls(pattern, vals), float(np.vdot(rest, rest))

    @classmethod
    def random(cls, pattern, rng: np.random.Generator, dist: str = "normal") -> "KroneckerSparseFactor":
        pattern = Pattern.coerce(pattern)
        if dist == "normal":
            vals = rng.standard_normal(pattern.as_tuple())
        elif dist == "uniform":
            vals = rng.uniform(0.0, 1.0, pattern.as_tuple())
        else:
            raise ValueError(f"unknown distribution {dist!r}")
        return cls(pattern, vals)

    @classmethod
    def identity(cls, n: int) -> "KroneckerSparseFactor":
        return cls((n, 1, 1, 1), np.ones(n))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def scaled(self, s: float) -> "KroneckerSparseFactor":
        return KroneckerSparseFactor(self.pattern, s * self.values)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``dense(self) @ x`` for a vector or a matrix with ``cols`` rows."""
        x = np.asarray(x)
        a, b, c, d = self.pattern
        if x.shape[0] != self.pattern.cols:
            raise ValueError(f"operand has {x.shape[0]} rows, factor has {self.pattern.cols} columns")
        tail = x.shape[1:]
        xr = x.reshape(a, c, d, -1)
        y = np.einsum("abcd,acdk->abdk", self.values, xr)
        return y.reshape((self.pattern.rows,) + tail)

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        """``dense(self).T @ x``."""
        x = np.asarray(x)
        a, b, c, d = self.pattern
        if x.shape[0] != self.pattern.rows:
            raise ValueError(f"operand has {x.shape[0]} rows, factor has {self.pattern.rows} rows")
        tail = x.shape[1:]
        y = np.einsum("abcd,abdk->acdk", self.values, x.reshape(a, b, d, -1))
        return y.reshape((self.pattern.cols,) + tail)

    def __matmul__(self, other):
        if isinstance(other, KroneckerSparseFactor):
            return multiply(self, other)
        return self.matvec(other)

    def to_json(self, encoding: str = "base64") -> dict:
        out = {"pattern": list(self.pattern.as_tuple())}
        if encoding == "base64":
            raw = np.ascontiguousarray(self.values, dtype="<f8").tobytes()
            out["values_b64"] = base64.b64encode(raw).decode("ascii")
        elif encoding == "plain":
            out["values"] = self.values.ravel().tolist()
        else:
            raise ValueError(f"unknown encoding {encoding!r}")
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "KroneckerSparseFactor":
        pattern = Pattern.coerce(obj["pattern"])
        if "values_b64" in obj:
            vals = np.frombuffer(base64.b64decode(obj["values_b64"]), dtype="<f8")
        elif "values" in obj:
            vals = np.asarray(obj["values"], dtype=np.float64)
        else:
            raise ValueError("factor entry has neither 'values_b64' nor 'values'")
        return cls(pattern, vals.astype(np.float64))


def multiply(f: KroneckerSparseFactor, g: KroneckerSparseFactor) -> KroneckerSparseFactor:
    """Product of two factors with chainable patterns, computed block by block."""
    layout = BlockLayout(f.pattern, g.pattern)
    blocks = layout.left_to_blocks(f.values) @ layout.right_to_blocks(g.values)
    return KroneckerSparseFactor(layout.product, layout.product_from_blocks(blocks))


def multiply_chain(factors) -> KroneckerSparseFactor:
    """Left-to-right product of a chainable list of factors."""
    factors = list(factors)
    if not factors:
        raise ValueError("empty factor list")
    out = factors[0]
    for f in factors[1:]:
        out = multiply(out, f)
    return out


def apply_chain(factors, x: np.ndarray) -> np.ndarray:
    """``X_1 ... X_L x`` folded right to left."""
    y = np.asarray(x, dtype=np.float64)
    for f in reversed(list(factors)):
        y = f.matvec(y)
    return y


def dense_product(factors) -> np.ndarray:
    """Dense product of any size-compatible list of factors (test helper)."""
    factors = list(factors)
    out = factors[0].to_dense()
    for f in factors[1:]:
        out = out @ f.to_dense()
    return out


def _gram_deviation(blocks: np.ndarray) -> float:
    gram = np.swapaxes(blocks, -1, -2) @ blocks
    eye = np.eye(blocks.shape[-1])
    return float(np.max(np.abs(gram - eye))) if gram.size else 0.0


def column_blocks(f: KroneckerSparseFactor, r: int) -> np.ndarray:
    """Blocks ``X[R_P, P]`` over the intrinsic column partition, shape ``(..., b, r)``."""
    a, b, c, d = f.pattern
    if r < 1 or c % r:
        raise ArchitectureError(f"left-{r}-unitarity needs r | c, got c={c}")
    return f.values.reshape(a, b, c // r, r, d).transpose(0, 2, 4, 1, 3)


def row_blocks(f: KroneckerSparseFactor, r: int) -> np.ndarray:
    """Blocks ``X[P, C_P]`` over the intrinsic row partition, shape ``(..., r, c)``."""
    a, b, c, d = f.pattern
    if r < 1 or b % r:
        raise ArchitectureError(f"right-{r}-unitarity needs r | b, got b={b}")
    return f.values.reshape(a, r, b // r, c, d).transpose(0, 2, 4, 1, 3)


def left_unitary_deviation(f: KroneckerSparseFactor, r: int) -> float:
    return _gram_deviation(column_blocks(f, r))


def right_unitary_deviation(f: KroneckerSparseFactor, r: int) -> float:
    return _gram_deviation(np.swapaxes(row_blocks(f, r), -1, -2))


def is_left_r_unitary(f: KroneckerSparseFactor, r: int, tol: float = DEFAULT_UNITARY_TOL) -> bool:
    """Every column block ``X[R_P, P]`` has orthonormal columns."""
    return left_unitary_deviation(f, r) <= tol


def is_right_r_unitary(f: KroneckerSparseFactor, r: int, tol: float = DEFAULT_UNITARY_TOL) -> bool:
    """Every row block ``X[P, C_P]`` has orthonormal rows."""
    return right_unitary_deviation(f, r) <= tol
