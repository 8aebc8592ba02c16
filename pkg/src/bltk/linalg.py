"""Dense linear algebra over the rationals (exact) or binary floats.

Every subspace condition used elsewhere in the package reduces to ranks,
images, sums, intersections and orthogonal complements computed here.
Exact mode stores entries as :class:`fractions.Fraction`; internally the
elimination runs fraction-free on primitive integer rows, which keeps the
small-dimension workloads (n <= 6) fast enough for exhaustive searches.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

EXACT = "exact"
FLOAT = "float"
DEFAULT_TOL = 1e-10


class ModeError(TypeError):
    """Raised when exact and float operands are mixed."""


class DimensionError(ValueError):
    """Raised on shape or ambient-dimension mismatch."""


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("non-finite entry")
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


class Matrix:
    """Immutable rows x cols matrix in exact or float mode."""

    __slots__ = ("rows", "cols", "mode", "_data")

    def __init__(self, data, mode: str | None = None, shape: tuple[int, int] | None = None):
        if isinstance(data, np.ndarray) and mode is None:
            mode = EXACT if data.dtype == object else FLOAT
        if mode is None:
            mode = FLOAT if _has_float(data) else EXACT
        if mode not in (EXACT, FLOAT):
            raise ValueError(f"unknown scalar mode {mode!r}")
        self.mode = mode
        if mode == EXACT:
            rows = tuple(tuple(_to_fraction(x) for x in row) for row in data)
            r = len(rows)
            c = len(rows[0]) if r else (shape[1] if shape else 0)
            if any(len(row) != c for row in rows):
                raise DimensionError("ragged matrix rows")
            self._data = rows
        else:
            arr = np.array(data, dtype=float)
            if arr.size == 0:
                arr = arr.reshape(shape if shape else (len(data), 0))
            if arr.ndim != 2:
                raise DimensionError("matrix data must be two-dimensional")
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite entry")
            arr.setflags(write=False)
            self._data = arr
            r, c = arr.shape
        if shape is not None and (r, c) != tuple(shape) and r:
            raise DimensionError(f"data shape {(r, c)} != declared {shape}")
        if shape is not None and not r:
            r, c = shape
        self.rows, self.cols = r, c

    # construction helpers -------------------------------------------------
    @classmethod
    def exact(cls, data) -> "Matrix":
        return cls(data, EXACT)

    @classmethod
    def float(cls, data) -> "Matrix":
        return cls(data, FLOAT)

    @classmethod
    def identity(cls, n: int, mode: str = EXACT) -> "Matrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)], mode, (n, n))

    @classmethod
    def zeros(cls, r: int, c: int, mode: str = EXACT) -> "Matrix":
        return cls([[0] * c for _ in range(r)], mode, (r, c))

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence], n: int, mode: str = EXACT) -> "Matrix":
        k = len(columns)
        return cls([[columns[j][i] for j in range(k)] for i in range(n)], mode, (n, k))

    # access ---------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def is_exact(self) -> bool:
        return self.mode == EXACT

    def entry(self, i: int, j: int):
        return self._data[i][j] if self.is_exact else float(self._data[i, j])

    def tolist(self) -> list[list]:
        if self.is_exact:
            return [list(r) for r in self._data]
        return self._data.tolist()

    def row_tuples(self) -> tuple[tuple, ...]:
        if self.is_exact:
            return self._data
        return tuple(tuple(r) for r in self._data.tolist())

    def column(self, j: int) -> tuple:
        return tuple(self.entry(i, j) for i in range(self.rows))

    def to_numpy(self) -> np.ndarray:
        if self.is_exact:
            out = np.array([[float(x) for x in r] for r in self._data], dtype=float)
            return out.reshape(self.rows, self.cols)
        return np.array(self._data)

    def to_float(self) -> "Matrix":
        return Matrix(self.to_numpy(), FLOAT, self.shape)

    # algebra --------------------------------------------------------------
    @property
    def T(self) -> "Matrix":
        if self.is_exact:
            return Matrix(list(zip(*self._data)) if self.rows else [], EXACT, (self.cols, self.rows))
        return Matrix(self._data.T, FLOAT, (self.cols, self.rows))

    def _check_mode(self, other: "Matrix") -> None:
        if self.mode != other.mode:
            raise ModeError("cannot mix exact and float matrices; convert explicitly")

    def __matmul__(self, other: "Matrix") -> "Matrix":
        self._check_mode(other)
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        if self.is_exact:
            oc = list(zip(*other._data)) if other.rows else [()] * other.cols
            data = [[sum((a * b for a, b in zip(r, c)), Fraction(0)) for c in oc] for r in self._data]
            return Matrix(data, EXACT, (self.rows, other.cols))
        return Matrix(self._data @ other._data, FLOAT, (self.rows, other.cols))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix) or self.shape != other.shape or self.mode != other.mode:
            return NotImplemented if not isinstance(other, Matrix) else False
        if self.is_exact:
            return self._data == other._data
        return bool(np.array_equal(self._data, other._data))

    def __hash__(self):
        return hash((self.mode, self.shape, self.row_tuples()))

    def __repr__(self) -> str:
        return f"Matrix({self.tolist()!r}, mode={self.mode!r})"

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        if self.is_exact:
            data = [[_fraction_str(x) for x in r] for r in self._data]
        else:
            data = self._data.tolist()
        return {"rows": self.rows, "cols": self.cols, "data": data}

    @classmethod
    def from_json(cls, obj: dict, mode: str | None = None) -> "Matrix":
        try:
            r, c, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"matrix literal missing field: {exc}") from None
        if len(data) != r or any(len(row) != c for row in data):
            raise DimensionError(f"matrix literal data does not match rows={r}, cols={c}")
        if mode is None:
            flat = [x for row in data for x in row]
            mode = FLOAT if any(isinstance(x, float) for x in flat) else EXACT
        return cls(data, mode, (r, c))


def _has_float(data) -> bool:
    for row in data:
        for x in row:
            if isinstance(x, (float, np.floating)):
                return True
    return False


def _fraction_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# --------------------------------------------------------------------------
# exact integer kernels

def _primitive(v: Sequence[int]) -> tuple[int, ...]:
    g = reduce(math.gcd, v, 0)
    if g == 0:
        return tuple(v)
    out = [x // g for x in v]
    for x in out:
        if x:
            if x < 0:
                out = [-y for y in out]
            break
    return tuple(out)


def _integer_row(row: Sequence[Fraction]) -> list[int]:
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (x.denominator for x in row), 1)
    return [int(x * den) for x in row]


def _int_rref(rows: Iterable[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    """Reduced row echelon form with each row scaled to a primitive integer vector.

    Pivots are positive; the result is a canonical key for the row space.
    """
    mat = [list(r) for r in rows if any(r)]
    if not mat:
        return ()
    ncols = len(mat[0])
    pivot_rows: list[list[int]] = []
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, len(mat)) if mat[i][col]), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        p = mat[r]
        for i in range(len(mat)):
            if i != r and mat[i][col]:
                a, b = p[col], mat[i][col]
                mat[i] = list(_primitive([a * x - b * y for x, y in zip(mat[i], p)]))
        mat[r] = list(_primitive(p))
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    pivot_rows = mat[:r]
    return tuple(tuple(row) for row in pivot_rows)


def _int_rank(rows: Sequence[Sequence[int]]) -> int:
    """Fraction-free (Bareiss-style) rank of an integer matrix."""
    mat = [list(r) for r in rows if any(r)]
    if not mat:
        return 0
    ncols = len(mat[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][col]), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        p = mat[rank]
        a = p[col]
        for i in range(rank + 1, len(mat)):
            b = mat[i][col]
            if b:
                mat[i] = _primitive([a * x - b * y for x, y in zip(mat[i], p)])
        rank += 1
        if rank == len(mat):
            break
    return rank


def _exact_int_rows(A: Matrix) -> list[list[int]]:
    return [_integer_row(r) for r in A.row_tuples()]


def _nullspace_from_rref(rref: Sequence[Sequence[int]], ncols: int) -> list[tuple[int, ...]]:
    """Integer basis of {x : R x = 0} for a primitive RREF R."""
    pivots = []
    for row in rref:
        pivots.append(next(i for i, x in enumerate(row) if x))
    free = [j for j in range(ncols) if j not in pivots]
    basis = []
    for f in free:
        # x_f = L, x_pivot = -row[f] * L / row[pivot]
        lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (row[p] for row, p in zip(rref, pivots)), 1)
        v = [0] * ncols
        v[f] = lcm
        for row, p in zip(rref, pivots):
            v[p] = -row[f] * lcm // row[p]
        basis.append(_primitive(v))
    return basis


# --------------------------------------------------------------------------
# public operations on matrices

def rank(A: Matrix, tol: float | None = None) -> int:
    """Dimension of the column span of ``A``.

    Float mode counts singular values above ``tol`` times the largest one;
    exact mode requires ``tol`` to be 0 (or omitted).
    """
    if tol is not None and tol < 0:
        raise ValueError("tol must be nonnegative")
    if A.rows == 0 or A.cols == 0:
        return 0
    if A.is_exact:
        if tol:
            raise ValueError("exact-mode rank takes tol = 0")
        return _int_rank(_exact_int_rows(A))
    tol = DEFAULT_TOL if tol is None else tol
    s = np.linalg.svd(A.to_numpy(), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def kernel(A: Matrix, tol: float | None = None) -> "Subspace":
    """Null space of ``A`` as a subspace of R^cols."""
    if A.is_exact:
        rref = _int_rref(_exact_int_rows(A)) if A.rows else ()
        vecs = _nullspace_from_rref(rref, A.cols)
        return Subspace._from_int_rows(A.cols, vecs)
    tol = DEFAULT_TOL if tol is None else tol
    M = A.to_numpy()
    if M.shape[0] == 0:
        return Subspace.full(A.cols, FLOAT)
    _, s, vt = np.linalg.svd(M)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return Subspace._from_orthonormal(A.cols, vt[r:].T)


def column_space(A: Matrix, tol: float | None = None) -> "Subspace":
    return Subspace(A, tol=tol)


# --------------------------------------------------------------------------

class Subspace:
    """A linear subspace of R^ambient_dim with a canonical basis.

    Exact subspaces keep the primitive integer reduced echelon form of the
    basis vectors, so equal spans compare equal.  Float subspaces keep an
    orthonormal basis and compare through their orthogonal projectors.
    """

    __slots__ = ("ambient_dim", "mode", "_rows", "_q")

    def __init__(self, basis: Matrix, tol: float | None = None):
        self.ambient_dim = basis.rows
        self.mode = basis.mode
        if basis.is_exact:
            rows = [_integer_row(r) for r in zip(*basis.row_tuples())] if basis.cols else []
            self._rows = _int_rref(rows) if rows else ()
            self._q = None
        else:
            self._rows = None
            self._q = _orthonormal(basis.to_numpy(), DEFAULT_TOL if tol is None else tol)

    @classmethod
    def _from_int_rows(cls, n: int, rows: Iterable[Sequence[int]], canonical: bool = False) -> "Subspace":
        obj = object.__new__(cls)
        obj.ambient_dim = n
        obj.mode = EXACT
        rows = list(rows)
        obj._rows = tuple(tuple(r) for r in rows) if canonical else (_int_rref(rows) if rows else ())
        obj._q = None
        return obj

    @classmethod
    def _from_orthonormal(cls, n: int, q: np.ndarray) -> "Subspace":
        obj = object.__new__(cls)
        obj.ambient_dim = n
        obj.mode = FLOAT
        obj._rows = None
        q = np.array(q, dtype=float).reshape(n, -1)
        q.setflags(write=False)
        obj._q = q
        return obj

    @classmethod
    def span(cls, vectors: Sequence[Sequence], n: int, mode: str | None = None) -> "Subspace":
        if mode is None:
            mode = FLOAT if any(isinstance(x, float) for v in vectors for x in v) else EXACT
        return cls(Matrix.from_columns(list(vectors), n, mode))

    @classmethod
    def zero(cls, n: int, mode: str = EXACT) -> "Subspace":
        if mode == EXACT:
            return cls._from_int_rows(n, (), canonical=True)
        return cls._from_orthonormal(n, np.zeros((n, 0)))

    @classmethod
    def full(cls, n: int, mode: str = EXACT) -> "Subspace":
        if mode == EXACT:
            return cls._from_int_rows(n, [tuple(int(i == j) for j in range(n)) for i in range(n)], canonical=True)
        return cls._from_orthonormal(n, np.eye(n))

    @classmethod
    def coordinate(cls, n: int, indices: Iterable[int], mode: str = EXACT) -> "Subspace":
        idx = sorted(set(indices))
        rows = [tuple(int(i == j) for j in range(n)) for i in idx]
        if mode == EXACT:
            return cls._from_int_rows(n, rows, canonical=True)
        return cls._from_orthonormal(n, np.array(rows, dtype=float).T.reshape(n, len(idx)))

    # properties -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self._rows) if self.mode == EXACT else self._q.shape[1]

    @property
    def is_exact(self) -> bool:
        return self.mode == EXACT

    @property
    def basis(self) -> Matrix:
        """Basis vectors as the columns of an ambient_dim x dim matrix."""
        n, k = self.ambient_dim, self.dim
        if self.is_exact:
            return Matrix.from_columns(self._rows, n, EXACT) if k else Matrix.zeros(n, 0)
        return Matrix(self._q, FLOAT, (n, k))

    @property
    def integer_rows(self) -> tuple[tuple[int, ...], ...]:
        if not self.is_exact:
            raise ModeError("integer basis is only available in exact mode")
        return self._rows

    def orthonormal_basis(self) -> np.ndarray:
        if self.is_exact:
            if self.dim == 0:
                return np.zeros((self.ambient_dim, 0))
            return _orthonormal(np.array(self._rows, dtype=float).T, DEFAULT_TOL)
        return np.array(self._q)

    def projector(self) -> np.ndarray:
        q = self.orthonormal_basis()
        return q @ q.T

    def to_float(self) -> "Subspace":
        return Subspace._from_orthonormal(self.ambient_dim, self.orthonormal_basis())

    def contains(self, v: Sequence) -> bool:
        if self.is_exact:
            vec = _integer_row([_to_fraction(x) for x in v])
            return _int_rank(list(self._rows) + [vec]) == self.dim
        x = np.asarray(v, dtype=float)
        r = x - self._q @ (self._q.T @ x)
        return bool(np.linalg.norm(r) <= 1e-8 * max(1.0, np.linalg.norm(x)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        if self.ambient_dim != other.ambient_dim or self.dim != other.dim:
            return False
        if self.is_exact and other.is_exact:
            return self._rows == other._rows
        return bool(np.allclose(self.projector(), other.projector(), atol=1e-8))

    def __hash__(self):
        if self.is_exact:
            return hash((self.ambient_dim, self._rows))
        return hash((self.ambient_dim, self.dim))

    def __repr__(self) -> str:
        if self.is_exact:
            return f"Subspace(n={self.ambient_dim}, rows={list(self._rows)})"
        return f"Subspace(n={self.ambient_dim}, dim={self.dim}, float)"

    def to_json(self) -> dict:
        return self.basis.to_json()

    @classmethod
    def from_json(cls, obj: dict, mode: str | None = None) -> "Subspace":
        return cls(Matrix.from_json(obj, mode))


def _orthonormal(M: np.ndarray, tol: float) -> np.ndarray:
    n = M.shape[0]
    if M.size == 0:
        return np.zeros((n, 0))
    if not np.all(np.isfinite(M)):
        raise ValueError("non-finite entry")
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, 0))
    r = int(np.sum(s > tol * s[0]))
    return u[:, :r]


def _check_pair(V: Subspace, W: Subspace) -> None:
    if V.ambient_dim != W.ambient_dim:
        raise DimensionError(f"ambient dimensions differ: {V.ambient_dim} vs {W.ambient_dim}")
    if V.mode != W.mode:
        raise ModeError("cannot mix exact and float subspaces; convert explicitly")


def subspace_sum(V: Subspace, W: Subspace) -> Subspace:
    _check_pair(V, W)
    if V.is_exact:
        return Subspace._from_int_rows(V.ambient_dim, list(V._rows) + list(W._rows))
    return Subspace._from_orthonormal(V.ambient_dim, _orthonormal(np.hstack([V._q, W._q]), DEFAULT_TOL))


def orthogonal_complement(V: Subspace) -> Subspace:
    """V-perp inside the same ambient space."""
    n = V.ambient_dim
    if V.is_exact:
        if V.dim == 0:
            return Subspace.full(n)
        return Subspace._from_int_rows(n, _nullspace_from_rref(V._rows, n))
    if V.dim == 0:
        return Subspace.full(n, FLOAT)
    u, _, _ = np.linalg.svd(V._q, full_matrices=True)
    return Subspace._from_orthonormal(n, u[:, V.dim:])


def intersect(V: Subspace, W: Subspace) -> Subspace:
    """V ∩ W, computed as the complement of V-perp + W-perp."""
    _check_pair(V, W)
    return orthogonal_complement(subspace_sum(orthogonal_complement(V), orthogonal_complement(W)))


def image(L: Matrix, V: Subspace) -> Subspace:
    """L(V) as a subspace of R^{L.rows}."""
    if L.cols != V.ambient_dim:
        raise DimensionError(f"map with {L.cols} columns applied to subspace of R^{V.ambient_dim}")
    if L.mode != V.mode:
        raise ModeError("cannot mix exact and float operands; convert explicitly")
    if V.dim == 0:
        return Subspace.zero(L.rows, L.mode)
    if L.is_exact:
        Lr = _exact_int_rows(L)
        cols = [[sum(a * b for a, b in zip(row, v)) for row in Lr] for v in V._rows]
        return Subspace._from_int_rows(L.rows, cols)
    return Subspace._from_orthonormal(L.rows, _orthonormal(L.to_numpy() @ V._q, DEFAULT_TOL))


def image_dim(L: Matrix, V: Subspace) -> int:
    """dim L(V) without canonicalizing the image (fast path for defect sums)."""
    if L.cols != V.ambient_dim:
        raise DimensionError(f"map with {L.cols} columns applied to subspace of R^{V.ambient_dim}")
    if V.dim == 0:
        return 0
    if L.is_exact and V.is_exact:
        Lr = _exact_int_rows(L)
        cols = [[sum(a * b for a, b in zip(row, v)) for row in Lr] for v in V._rows]
        return _int_rank(cols)
    if L.mode != V.mode:
        raise ModeError("cannot mix exact and float operands; convert explicitly")
    return rank(Matrix(L.to_numpy() @ V._q, FLOAT))


def stack(blocks: Sequence[Matrix]) -> Matrix:
    """Vertical concatenation of matrices with a common column count."""
    if not blocks:
        raise DimensionError("nothing to stack")
    mode = blocks[0].mode
    cols = blocks[0].cols
    for b in blocks:
        if b.mode != mode:
            raise ModeError("cannot stack exact and float blocks")
        if b.cols != cols:
            raise DimensionError("column counts differ")
    rows = sum(b.rows for b in blocks)
    if mode == EXACT:
        return Matrix([r for b in blocks for r in b.row_tuples()], EXACT, (rows, cols))
    return Matrix(np.vstack([b.to_numpy() for b in blocks]), FLOAT, (rows, cols))
