"""Kakeya lab: rasterized tube families and the multilinear Kakeya–BL quotient.

A tube is the δ-neighbourhood of the piece x0 + (W ∩ B(0, length)) of an
affine subspace.  The quotient is

    ∫ Π_j (Σ_{T ∈ T_j} χ_T)^{1/p_j}  /  (δ^n Π_j (#T_j)^{1/p_j}),

computed by a midpoint Riemann sum on a grid of spacing δ/resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from ..datum import BLDatum, ExponentVector, INF
from ..finiteness import FINITE, decide_finiteness
from ..gaussian import DIVERGING, compute_constant
from ..linalg import FLOAT, Matrix, Subspace, orthogonal_complement
from .extension import ball_volume
from .report import ExperimentReport, Measurement, fit_slope, parallel_map


@dataclass(frozen=True)
class Tube:
    point: np.ndarray
    direction: np.ndarray  # orthonormal basis of W, shape (n, k)
    length: float = 1.0


@dataclass(frozen=True)
class TubeFamily:
    n: int
    codim: int
    reference: Subspace
    members: tuple
    delta: float
    angle_tol: float = 0.25

    def __post_init__(self):
        if self.reference.ambient_dim != self.n or self.n - self.reference.dim != self.codim:
            raise ValueError("reference subspace must have codimension codim in R^n")
        P = self.reference.projector() if not self.reference.is_exact else self.reference.to_float().projector()
        for i, t in enumerate(self.members):
            if t.direction.shape != (self.n, self.n - self.codim):
                raise ValueError(f"tube {i} has the wrong dimension")
            if t.direction.size and _grassmann_angle(P, t.direction) > self.angle_tol:
                raise ValueError(f"tube {i} is not close to the reference subspace")

    @property
    def count(self) -> int:
        return len(self.members)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "codim": self.codim,
            "delta": self.delta,
            "reference": self.reference.basis.to_json(),
            "members": [
                {"point": t.point.tolist(), "direction": t.direction.tolist(), "length": t.length} for t in self.members
            ],
        }


def _grassmann_angle(P_ref: np.ndarray, W: np.ndarray) -> float:
    """Largest principal angle between span(W) and the range of P_ref."""
    s = np.linalg.svd(P_ref @ W, compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def _orthonormal_cols(M: np.ndarray) -> np.ndarray:
    if M.size == 0:
        return M
    q, _ = np.linalg.qr(M)
    return q


def random_tube_family(
    rng: np.random.Generator,
    reference: Subspace,
    count: int,
    delta: float,
    angle: float = 0.1,
    spread: float = 0.3,
    length: float = 1.0,
) -> TubeFamily:
    """Tubes through random points of [-spread, spread]^n, directions tilted by ≤ angle."""
    n = reference.ambient_dim
    B = reference.to_float().orthonormal_basis() if reference.is_exact else reference.orthonormal_basis()
    k = B.shape[1]
    members = []
    for _ in range(count):
        if k:
            G = rng.normal(size=(n, n))
            G = (G - G.T) / 2
            G *= angle / max(np.linalg.norm(G, 2), 1e-300) * rng.uniform()
            rot = expm(G)
            W = _orthonormal_cols(rot @ B)
        else:
            W = np.zeros((n, 0))
        members.append(Tube(rng.uniform(-spread, spread, size=n), W, length))
    return TubeFamily(n, n - k, reference, tuple(members), delta, angle_tol=angle + 1e-9)


# ---------------------------------------------------------------------------

def kakeya_scaling_defect(families: Sequence[TubeFamily], p: ExponentVector) -> Fraction:
    """Σ codim/p_j − n."""
    r = p.reciprocals()
    return sum((f.codim * rj for f, rj in zip(families, r)), Fraction(0)) - families[0].n


def kernel_datum(references: Sequence[Subspace], p) -> BLDatum:
    """Linear data with ker L_j = V_j: the rows of L_j span V_j^⊥."""
    maps = []
    for V in references:
        perp = orthogonal_complement(V)
        maps.append(perp.basis.T)
    modes = {L.mode for L in maps}
    if len(modes) > 1:
        maps = [L.to_float() for L in maps]
    return BLDatum(references[0].ambient_dim, maps, p)


def vkak_holds(references: Sequence[Subspace], p) -> bool:
    """The subspace condition for tube directions, decided through the linear datum."""
    return decide_finiteness(kernel_datum(references, p)).status == FINITE


def _tube_mask(grid_axes, t: Tube, delta: float):
    """(index slices, boolean mask) of grid points within δ of the tube piece."""
    n = len(grid_axes)
    W = t.direction
    proj = np.linalg.norm(W, axis=1) if W.size else np.zeros(n)
    ext = t.length * proj + delta
    slices = []
    for i, ax in enumerate(grid_axes):
        lo = np.searchsorted(ax, t.point[i] - ext[i], side="left")
        hi = np.searchsorted(ax, t.point[i] + ext[i], side="right")
        slices.append(slice(lo, hi))
    sub = [ax[s] for ax, s in zip(grid_axes, slices)]
    if any(len(a) == 0 for a in sub):
        return slices, None
    mesh = np.meshgrid(*sub, indexing="ij")
    Y = np.stack([m - t.point[i] for i, m in enumerate(mesh)], axis=-1)
    if W.size:
        along_c = Y @ W
        along = np.linalg.norm(along_c, axis=-1)
        perp2 = np.maximum(np.sum(Y * Y, axis=-1) - along**2, 0.0)
        d2 = perp2 + np.maximum(along - t.length, 0.0) ** 2
    else:
        d2 = np.sum(Y * Y, axis=-1)
    return slices, d2 <= delta * delta


@dataclass(frozen=True)
class MKBLResult:
    delta: float
    lhs: float
    rhs: float
    cells: int

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def mkbl_check(families: Sequence[TubeFamily], p, resolution: int = 4) -> MKBLResult:
    """Riemann sum of Π_j (Σ χ_T)^{1/p_j} against δ^n Π (#T_j)^{1/p_j}."""
    p = p if isinstance(p, ExponentVector) else ExponentVector(p)
    if len(families) != len(p):
        raise ValueError("one exponent per family")
    if len({f.n for f in families}) != 1 or len({f.delta for f in families}) != 1:
        raise ValueError("families must share n and delta")
    if kakeya_scaling_defect(families, p) != 0:
        raise ValueError("scaling condition fails")
    n, delta = families[0].n, families[0].delta
    h = delta / resolution
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    for f in families:
        for t in f.members:
            proj = np.linalg.norm(t.direction, axis=1) if t.direction.size else np.zeros(n)
            ext = t.length * proj + delta
            lo = np.minimum(lo, t.point - ext)
            hi = np.maximum(hi, t.point + ext)
    # cell centres lie on (i + 1/2) h, so tube edges at multiples of h are counted exactly
    k_lo = np.floor(lo / h).astype(int)
    k_hi = np.ceil(hi / h).astype(int)
    axes = [(np.arange(a, b) + 0.5) * h for a, b in zip(k_lo, k_hi)]
    shape = tuple(len(a) for a in axes)
    integrand = None
    for f, pj in zip(families, p):
        count = np.zeros(shape, dtype=np.float32)
        for t in f.members:
            sl, mask = _tube_mask(axes, t, delta)
            if mask is not None:
                count[tuple(sl)] += mask
        r = 0.0 if pj == INF else 1.0 / float(pj)
        term = np.power(count, r, dtype=np.float64) if r else np.ones(shape)
        integrand = term if integrand is None else integrand * term
    lhs = float(integrand.sum() * h**n)
    rhs = delta**n
    for f, pj in zip(families, p):
        rhs *= f.count ** (0.0 if pj == INF else 1.0 / float(pj))
    return MKBLResult(delta, lhs, rhs, int(np.prod(shape)))


def parallel_bl_value(references: Sequence[Subspace], p) -> float:
    """BL(L, p) Π ω_{codim_j}^{1/p_j} for L_j with kernels V_j, the all-parallel limit of the quotient."""
    d = kernel_datum(references, p)
    est = compute_constant(d)
    if est.status == DIVERGING:
        return math.inf
    out = est.value
    for L, pj in zip(d.maps, d.exponents):
        if pj != INF:
            out *= ball_volume(L.rows) ** (1.0 / float(pj))
    return out


def kakeya_sweep(
    make_families: Callable[[float, np.random.Generator], Sequence[TubeFamily]],
    p,
    deltas: Sequence[float] = tuple(2.0**-k for k in range(3, 8)),
    resolution: int = 4,
    seed: int = 0,
    predicted: float = 0.0,
    tolerance: float = 0.1,
    label: str = "kakeya",
) -> ExperimentReport:
    """Quotient at each δ (a fresh seeded stream per δ) and its log-log slope."""
    p = p if isinstance(p, ExponentVector) else ExponentVector(p)
    streams = np.random.SeedSequence(seed).spawn(len(deltas))

    def one(i):
        rng = np.random.Generator(np.random.Philox(streams[i]))
        fams = make_families(float(deltas[i]), rng)
        return fams, mkbl_check(fams, p, resolution)

    out = parallel_map(one, range(len(deltas)))
    rows = [Measurement(r.delta, r.lhs, r.rhs, {"cells": r.cells}) for _, r in out]
    slope = fit_slope([m.delta for m in rows], [m.ratio for m in rows])
    refs = [f.reference for f in out[0][0]]
    return ExperimentReport(
        kind=label,
        inputs={
            "exponents": p.to_json(),
            "deltas": [float(x) for x in deltas],
            "resolution": resolution,
            "seed": seed,
            "families": [f.to_json() for f in out[-1][0]],
        },
        measurements=rows,
        slope=slope,
        predicted=predicted,
        tolerance=tolerance,
        passed=abs(slope - predicted) <= tolerance,
        notes={"vkak_holds": vkak_holds(refs, p), "max_ratio": max(m.ratio for m in rows)},
    )


# ---------------------------------------------------------------------------
# planar configurations with p = (1, 1)

_E1 = Subspace(Matrix([[1], [0]]))
_E2 = Subspace(Matrix([[0], [1]]))


def _line(point, angle: float) -> Tube:
    return Tube(np.asarray(point, dtype=float), np.array([[math.cos(angle)], [math.sin(angle)]]))


def axis_parallel_families(delta: float, rng: np.random.Generator, count: int = 12) -> list[TubeFamily]:
    """Horizontal and vertical tubes with offsets on the δ-lattice."""
    k = int(0.4 / delta)
    horiz = [_line((0.0, o * delta), 0.0) for o in rng.integers(-k, k + 1, size=count)]
    vert = [_line((o * delta, 0.0), math.pi / 2) for o in rng.integers(-k, k + 1, size=count)]
    return [TubeFamily(2, 1, _E1, tuple(horiz), delta), TubeFamily(2, 1, _E2, tuple(vert), delta)]


def transverse_families(delta: float, rng: np.random.Generator, count: int = 16, angle: float = 0.1) -> list[TubeFamily]:
    """Random tubes near the two coordinate axes."""
    return [random_tube_family(rng, _E1, count, delta, angle), random_tube_family(rng, _E2, count, delta, angle)]


def overlapping_families(delta: float, rng: np.random.Generator, count: int = 8) -> list[TubeFamily]:
    """Two nearly parallel families sharing their lines up to a tilt of at most δ/4."""
    offsets = np.linspace(-0.3, 0.3, count) + rng.uniform(-0.01, 0.01, size=count)
    first = [_line((0.0, o), 0.0) for o in offsets]
    second = [_line((0.0, o), rng.uniform(-1, 1) * delta / 4) for o in offsets]
    return [TubeFamily(2, 1, _E1, tuple(first), delta), TubeFamily(2, 1, _E1, tuple(second), delta)]


PLANAR_CONFIGURATIONS = {
    "parallel": axis_parallel_families,
    "transverse": transverse_families,
    "overlapping": overlapping_families,
}
