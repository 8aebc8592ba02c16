"""Brascamp–Lieb data in linear-map form (L, p) and subspace form (H, p).

Exponents are extended rationals in [1, ∞].  Keep all defect arithmetic on
:class:`fractions.Fraction`; the reciprocal of ``INF`` is exactly 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .linalg import (
    EXACT,
    FLOAT,
    DimensionError,
    Matrix,
    Subspace,
    column_space,
    orthogonal_complement,
    rank,
    stack,
)

INF = math.inf
Exponent = Union[Fraction, float]  # finite values are Fractions; ∞ is math.inf


class InvalidDatumError(ValueError):
    pass


class NonInjectiveJointMapWarning(UserWarning):
    pass


def parse_exponent(x) -> Exponent:
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity", "∞"):
        return INF
    if isinstance(x, float) and math.isinf(x):
        if x < 0:
            raise InvalidDatumError("exponent must be >= 1")
        return INF
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    p = Fraction(x)
    return p


def reciprocal(p: Exponent) -> Fraction:
    return Fraction(0) if p == INF else 1 / Fraction(p)


def conjugate_exponent(p: Exponent) -> Exponent:
    if p == INF:
        return Fraction(1)
    p = Fraction(p)
    if p == 1:
        return INF
    return p / (p - 1)


def exponent_str(p: Exponent) -> str:
    if p == INF:
        return "inf"
    p = Fraction(p)
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


@dataclass(frozen=True)
class ExponentVector:
    values: tuple

    def __init__(self, values: Sequence):
        vals = tuple(parse_exponent(v) for v in values)
        for j, p in enumerate(vals, 1):
            if p != INF and p < 1:
                raise InvalidDatumError(f"exponent {j} is {exponent_str(p)} < 1")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, j):
        return self.values[j]

    def reciprocals(self) -> tuple[Fraction, ...]:
        """r_j = 1/p_j, the weights of the integral form of the inequality."""
        return tuple(reciprocal(p) for p in self.values)

    @classmethod
    def from_reciprocals(cls, r: Sequence) -> "ExponentVector":
        out = []
        for x in r:
            x = Fraction(x)
            if not 0 <= x <= 1:
                raise InvalidDatumError("reciprocal exponents must lie in [0, 1]")
            out.append(INF if x == 0 else 1 / x)
        return cls(out)

    def conjugate(self) -> "ExponentVector":
        return ExponentVector([conjugate_exponent(p) for p in self.values])

    def to_json(self) -> list[str]:
        return [exponent_str(p) for p in self.values]

    def __repr__(self) -> str:
        return f"ExponentVector({self.to_json()})"


@dataclass(frozen=True)
class BLDatum:
    """Surjections L_j: R^n -> R^{n_j} together with exponents p_j."""

    n: int
    maps: tuple
    exponents: ExponentVector

    def __init__(self, n: int, maps: Sequence[Matrix], exponents):
        maps = tuple(maps)
        if not isinstance(exponents, ExponentVector):
            exponents = ExponentVector(exponents)
        if len(maps) != len(exponents):
            raise InvalidDatumError(f"{len(maps)} maps but {len(exponents)} exponents")
        modes = {L.mode for L in maps}
        if len(modes) > 1:
            raise InvalidDatumError("all maps must share one scalar mode")
        for j, L in enumerate(maps, 1):
            if L.cols != n:
                raise DimensionError(f"map {j} has {L.cols} columns, expected n = {n}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "exponents", exponents)

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def mode(self) -> str:
        return self.maps[0].mode if self.maps else EXACT

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(L.rows for L in self.maps)

    def to_float(self) -> "BLDatum":
        return BLDatum(self.n, [L.to_float() for L in self.maps], self.exponents)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "maps": [L.to_json() for L in self.maps],
            "exponents": self.exponents.to_json(),
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BLDatum":
        mode = obj.get("mode")
        if mode not in (None, EXACT, FLOAT):
            raise ValueError(f"field 'mode': unknown mode {mode!r}")
        try:
            maps = [Matrix.from_json(M, mode) for M in obj["maps"]]
            return cls(int(obj["n"]), maps, obj["exponents"])
        except KeyError as exc:
            raise ValueError(f"datum missing field {exc}") from None


ValidatedDatum = BLDatum


def validate(d: BLDatum) -> BLDatum:
    """Check surjectivity of every map; returns the datum unchanged."""
    for j, L in enumerate(d.maps, 1):
        if L.rows > d.n:
            raise InvalidDatumError(f"map {j} not surjective (target dimension {L.rows} > n = {d.n})")
        if rank(L) != L.rows:
            raise InvalidDatumError(f"map {j} not surjective")
    return d


def scaling_defect(d: BLDatum) -> Fraction:
    """Σ n_j/p_j − n; zero exactly when the scaling condition holds."""
    r = d.exponents.reciprocals()
    return sum((nj * rj for nj, rj in zip(d.dims, r)), Fraction(0)) - d.n


def joint_map(d: BLDatum) -> Matrix:
    return stack(d.maps)


def joint_map_injective(d: BLDatum) -> bool:
    return rank(joint_map(d)) == d.n


@dataclass(frozen=True)
class SubspaceDatum:
    """A subspace H of R^{n_1} x ... x R^{n_m} with exponents p."""

    block_dims: tuple
    H: Subspace
    exponents: ExponentVector

    def __init__(self, block_dims: Sequence[int], H: Subspace, exponents):
        block_dims = tuple(int(b) for b in block_dims)
        if not isinstance(exponents, ExponentVector):
            exponents = ExponentVector(exponents)
        if H.ambient_dim != sum(block_dims):
            raise DimensionError(f"H lives in R^{H.ambient_dim} but blocks sum to {sum(block_dims)}")
        if len(block_dims) != len(exponents):
            raise InvalidDatumError("block count and exponent count differ")
        object.__setattr__(self, "block_dims", block_dims)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "exponents", exponents)

    @property
    def m(self) -> int:
        return len(self.block_dims)

    def block_slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.block_dims:
            out.append(slice(start, start + b))
            start += b
        return out

    def projection(self, j: int, mode: str | None = None) -> Matrix:
        """π_j: R^{Σn} -> R^{n_j}, the coordinate projection onto block j."""
        mode = mode or self.H.mode
        N = sum(self.block_dims)
        sl = self.block_slices()[j]
        rows = [[1 if c == sl.start + i else 0 for c in range(N)] for i in range(self.block_dims[j])]
        return Matrix(rows, mode, (self.block_dims[j], N))

    def scaling_defect(self) -> Fraction:
        """Σ n_j/p_j − dim H."""
        r = self.exponents.reciprocals()
        return sum((nj * rj for nj, rj in zip(self.block_dims, r)), Fraction(0)) - self.H.dim

    def parametrize(self) -> tuple[BLDatum, float]:
        """Linear-map representative: L_j = π_j B for an orthonormal basis B of H.

        With B orthonormal the Lebesgue measure on H pulls back to Lebesgue
        measure on R^{dim H}, so BL(H, p) = BL(L, p) exactly.  Blocks with
        p_j = ∞ are kept; their weight is zero everywhere downstream.
        Returns the datum and the (unit) jacobian of the parametrization.
        """
        B = self.H.orthonormal_basis()
        k = B.shape[1]
        maps = []
        for sl in self.block_slices():
            maps.append(Matrix(B[sl, :], FLOAT, (sl.stop - sl.start, k)))
        return BLDatum(k, maps, self.exponents), 1.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubspaceDatum):
            return NotImplemented
        return (
            self.block_dims == other.block_dims
            and self.exponents == other.exponents
            and self.H == other.H
        )

    def __hash__(self):
        return hash((self.block_dims, self.exponents, self.H))

    def to_json(self) -> dict:
        return {
            "block_dims": list(self.block_dims),
            "H": self.H.basis.to_json(),
            "exponents": self.exponents.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict, mode: str | None = None) -> "SubspaceDatum":
        try:
            H = Subspace(Matrix.from_json(obj["H"], mode))
            return cls(obj["block_dims"], H, obj["exponents"])
        except KeyError as exc:
            raise ValueError(f"subspace datum missing field {exc}") from None


def to_subspace_form(d: BLDatum) -> SubspaceDatum:
    """H = {(L_1 x, ..., L_m x) : x in R^n}.

    A non-injective joint map is allowed; it triggers a
    :class:`NonInjectiveJointMapWarning` and dim H < n.
    """
    J = joint_map(d)
    H = column_space(J)
    if H.dim < d.n:
        warnings.warn(
            f"joint map has rank {H.dim} < n = {d.n}; subspace form has dim H < n",
            NonInjectiveJointMapWarning,
            stacklevel=2,
        )
    return SubspaceDatum(d.dims, H, d.exponents)


def dual(sd: SubspaceDatum) -> SubspaceDatum:
    """Fourier dual (H⊥, p′) with the same block structure."""
    return SubspaceDatum(sd.block_dims, orthogonal_complement(sd.H), sd.exponents.conjugate())


def graph_subspace(maps: Sequence[Matrix]) -> Subspace:
    """{(M_1 x, ..., M_m x)}; used for (T_0 M)⊥ with M_j = dΣ_j(0)^*."""
    return column_space(stack(list(maps)))


def hoelder_datum(n: int, exponents, mode: str = EXACT) -> BLDatum:
    I = Matrix.identity(n, mode)
    return BLDatum(n, [I] * len(exponents), exponents)


def loomis_whitney_datum(n: int = 3, exponents=None, mode: str = EXACT) -> BLDatum:
    """Coordinate projections R^n -> R^{n-1}, the j-th dropping coordinate j."""
    if exponents is None:
        exponents = [Fraction(n - 1)] * n
    maps = []
    for j in range(n):
        keep = [i for i in range(n) if i != j]
        maps.append(Matrix([[1 if c == i else 0 for c in range(n)] for i in keep], mode, (n - 1, n)))
    return BLDatum(n, maps, exponents)


def young_datum(exponents=("3/2", "3/2", "3/2"), mode: str = EXACT) -> BLDatum:
    """d = 1 trilinear Young form ∫∫ f1(y) f2(x−y) f3(x) dy dx on R^2 = {(x, y)}."""
    maps = [Matrix([[0, 1]], mode), Matrix([[1, -1]], mode), Matrix([[1, 0]], mode)]
    return BLDatum(2, maps, exponents)


def sharp_young_value(exponents) -> float:
    """(C_{p1} C_{p2} C_{p3}) for d = 1 with C_r = ((1−1/r)^{1−1/r} / (1/r)^{1/r})^{1/2}."""
    out = 1.0
    for p in ExponentVector(exponents):
        r = float(reciprocal(p))
        a = 1.0 - r
        num = a**a if a > 0 else 1.0
        den = r**r if r > 0 else 1.0
        out *= math.sqrt(num / den)
    return out


def float_array_maps(d: BLDatum) -> list[np.ndarray]:
    return [L.to_numpy() for L in d.maps]
