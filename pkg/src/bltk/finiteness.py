"""Finiteness of BL constants and the transversality condition.

A datum (L, p) has finite constant iff Σ n_j/p_j = n and every subspace V
satisfies dim V <= Σ dim(L_j V)/p_j.  The search here looks for a subspace
violating the second condition among:

1. the lattice generated by the kernels ker L_j under + and ∩,
2. all spans of subsets of a rational candidate pool (exact mode, n <= cap),
3. seeded random rational subspaces,
4. local descent on the Grassmannian of a smooth rank surrogate, with every
   candidate re-checked in exact arithmetic.

Any witness returned has a strictly negative defect.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .datum import BLDatum, ExponentVector, scaling_defect, validate
from .linalg import EXACT, DimensionError, Matrix, Subspace, image_dim, intersect, orthogonal_complement

log = logging.getLogger(__name__)

FINITE = "Finite"
INFINITE = "Infinite"
UNKNOWN = "Unknown"

GAUSSIAN_BOUND = 1e8


@dataclass(frozen=True)
class SearchBudget:
    exhaustive_dim_cap: int = 4
    random_trials: int = 1000
    lattice_depth: int = 8
    seed: int = 0
    descent_restarts: int = 2


@dataclass
class FinitenessVerdict:
    status: str
    witness: Subspace | None
    defect: Fraction
    certificate_mode: str
    budget: SearchBudget = field(default_factory=SearchBudget)
    scaling_defect: Fraction = Fraction(0)
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "witness": self.witness.basis.to_json() if self.witness is not None else None,
            "defect": _frac_str(self.defect),
            "certificate_mode": self.certificate_mode,
            "budget": asdict(self.budget),
            "scaling_defect": _frac_str(self.scaling_defect),
            "evidence": self.evidence,
        }


def _frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# defects

def dimension_defect(d: BLDatum, V: Subspace) -> Fraction:
    """Σ_j dim(L_j V)/p_j − dim V."""
    if V.ambient_dim != d.n:
        raise DimensionError(f"subspace of R^{V.ambient_dim} for datum on R^{d.n}")
    r = d.exponents.reciprocals()
    total = Fraction(0)
    for L, rj in zip(d.maps, r):
        if rj:
            total += rj * image_dim(L, V)
    return total - V.dim


def transversality_defect(tangents: Sequence[Subspace], p: ExponentVector, V: Subspace) -> Fraction:
    """Σ_j (dim V − dim(V ∩ (TS_j)⊥))/p_j′ − dim V."""
    if not isinstance(p, ExponentVector):
        p = ExponentVector(p)
    if len(tangents) != len(p):
        raise ValueError(f"{len(tangents)} tangent spaces but {len(p)} exponents")
    for T in tangents:
        if T.ambient_dim != V.ambient_dim:
            raise DimensionError("tangent spaces and V must share the ambient dimension")
    w = p.conjugate().reciprocals()
    total = Fraction(0)
    for T, wj in zip(tangents, w):
        if wj:
            total += wj * (V.dim - intersect(V, orthogonal_complement(T)).dim)
    return total - V.dim


class _Defects:
    """Cached defect evaluation for one exact datum."""

    def __init__(self, d: BLDatum):
        self.d = d
        self.weights = d.exponents.reciprocals()
        self.exact = d.mode == EXACT
        if self.exact:
            self.int_maps = [linalg._exact_int_rows(L) for L in d.maps]
        self.evaluated = 0

    def of_rows(self, rows: Sequence[Sequence[int]]) -> Fraction:
        self.evaluated += 1
        total = Fraction(0)
        for Lr, w in zip(self.int_maps, self.weights):
            if w:
                cols = [[sum(a * b for a, b in zip(row, v)) for row in Lr] for v in rows]
                total += w * linalg._int_rank(cols)
        return total - len(rows)

    def of(self, V: Subspace) -> Fraction:
        if self.exact and V.is_exact:
            return self.of_rows(V.integer_rows)
        self.evaluated += 1
        return dimension_defect(self.d, V)


# ---------------------------------------------------------------------------
# candidate generation

def kernel_lattice(d: BLDatum, depth: int = 8) -> list[Subspace]:
    """Closure of {ker L_j} under sums and intersections, up to ``depth`` rounds."""
    mode = d.mode
    elems: list[Subspace] = []

    def add(S: Subspace) -> bool:
        if any(S == E for E in elems):
            return False
        elems.append(S)
        return True

    for S in (Subspace.zero(d.n, mode), Subspace.full(d.n, mode)):
        add(S)
    for L in d.maps:
        add(linalg.kernel(L))
    for _ in range(depth):
        new = False
        current = list(elems)
        for i, A in enumerate(current):
            for B in current[i + 1:]:
                new |= add(linalg.subspace_sum(A, B))
                new |= add(intersect(A, B))
        if not new:
            break
    elems.sort(key=lambda S: (S.dim, _sort_key(S)))
    return elems


def _sort_key(S: Subspace):
    return S.integer_rows if S.is_exact else ()


def candidate_pool(d: BLDatum, lattice: Sequence[Subspace] | None = None) -> list[tuple[int, ...]]:
    """Rational candidate vectors: coordinate vectors, basis vectors of every
    kernel-lattice element, and pairwise sums of kernel basis vectors.

    Vectors are primitive integer tuples, deduplicated up to sign.
    """
    if d.mode != EXACT:
        raise linalg.ModeError("candidate pool is defined for exact data only")
    if lattice is None:
        lattice = kernel_lattice(d)
    n = d.n
    seen: dict[tuple[int, ...], None] = {}

    def add(v):
        v = linalg._primitive(list(v))
        if any(v):
            seen.setdefault(v, None)

    for i in range(n):
        add([int(i == j) for j in range(n)])
    kernel_vecs = []
    for L in d.maps:
        for v in linalg.kernel(L).integer_rows:
            kernel_vecs.append(v)
            add(v)
    for S in lattice:
        for v in S.integer_rows:
            add(v)
    for i, u in enumerate(kernel_vecs):
        for w in kernel_vecs[i + 1:]:
            add([a + b for a, b in zip(u, w)])
    return list(seen)


def pool_subspaces(pool: Sequence[Sequence[int]], n: int, max_dim: int | None = None):
    """Yield every distinct span of a subset of ``pool`` with 1 <= dim <= max_dim.

    Subspaces come out grouped by dimension, each as its canonical rows.
    """
    max_dim = n - 1 if max_dim is None else max_dim
    level: dict[tuple, None] = {}
    for v in pool:
        level.setdefault(linalg._int_rref([v]), None)
    dim = 1
    while level and dim <= max_dim:
        yield from level
        if dim == max_dim:
            break
        nxt: dict[tuple, None] = {}
        for rows in level:
            for v in pool:
                key = linalg._int_rref(list(rows) + [v])
                if len(key) == dim + 1:
                    nxt.setdefault(key, None)
        level = nxt
        dim += 1


def random_rational_subspace(n: int, k: int, rng: np.random.Generator, height: int = 3) -> Subspace:
    while True:
        vecs = rng.integers(-height, height + 1, size=(k, n)).tolist()
        key = linalg._int_rref(vecs)
        if len(key) == k:
            return Subspace._from_int_rows(n, key, canonical=True)


def _float_rref_rationalize(Y: np.ndarray, max_den: int = 64) -> list[list[Fraction]]:
    """Row-reduce the rows of Y^T in floats, then snap entries to small rationals."""
    M = np.array(Y.T, dtype=float)
    k, n = M.shape
    r = 0
    for c in range(n):
        if r == k:
            break
        piv = r + int(np.argmax(np.abs(M[r:, c])))
        if abs(M[piv, c]) < 1e-8:
            continue
        M[[r, piv]] = M[[piv, r]]
        M[r] /= M[r, c]
        for i in range(k):
            if i != r:
                M[i] -= M[i, c] * M[r]
        r += 1
    return [[Fraction(float(x)).limit_denominator(max_den) for x in row] for row in M[:r]]


def _surrogate(Lf: Sequence[np.ndarray], w: Sequence[float], k: int, eta: float):
    n = Lf[0].shape[1] if Lf else 0

    def f(z):
        Z = z.reshape(n, k)
        Y, _ = np.linalg.qr(Z)
        total = 0.0
        for L, wj in zip(Lf, w):
            if wj:
                s = np.linalg.svd(L @ Y, compute_uv=False)
                total += wj * float(np.sum(s**2 / (s**2 + eta)))
        return total - k

    return f


def grassmann_descent(d: BLDatum, k: int, rng: np.random.Generator, eta: float = 1e-3) -> np.ndarray:
    """Minimize the smooth rank surrogate over k-planes; returns an orthonormal n x k basis."""
    Lf = [L.to_numpy() for L in d.maps]
    w = [float(x) for x in d.exponents.reciprocals()]
    f = _surrogate(Lf, w, k, eta)
    z0 = rng.normal(size=d.n * k)
    res = minimize(f, z0, method="L-BFGS-B", options={"maxiter": 200})
    Y, _ = np.linalg.qr(res.x.reshape(d.n, k))
    return Y


# ---------------------------------------------------------------------------

def _better(cand, best):
    return best is None or cand[0] < best[0]


def search_violating_subspace(d: BLDatum, budget: SearchBudget = SearchBudget(), stats: dict | None = None):
    """Return a subspace V with dimension_defect(d, V) < 0, or None."""
    validate(d)
    stats = {} if stats is None else stats
    ev = _Defects(d)
    n = d.n
    exact = d.mode == EXACT

    # 1. kernel lattice
    lattice = kernel_lattice(d, budget.lattice_depth)
    best = None
    margin = None
    for S in lattice:
        if 0 < S.dim < n:
            df = ev.of(S)
            margin = df if margin is None else min(margin, df)
            if df < 0 and _better((df,), best):
                best = (df, S)
    stats["lattice_size"] = len(lattice)
    if best is not None:
        stats["phase"] = "lattice"
        stats["evaluated"] = ev.evaluated
        return best[1]

    # 2. exhaustive pool spans
    if exact and n <= budget.exhaustive_dim_cap:
        pool = candidate_pool(d, lattice)
        stats["pool_size"] = len(pool)
        for rows in pool_subspaces(pool, n):
            df = ev.of_rows(rows)
            margin = df if margin is None else min(margin, df)
            if df < 0 and _better((df,), best):
                best = (df, Subspace._from_int_rows(n, rows, canonical=True))
    stats["margin"] = margin
    if exact and n <= budget.exhaustive_dim_cap:
        if best is not None:
            stats["phase"] = "pool"
            stats["evaluated"] = ev.evaluated
            return best[1]

    # 3. random subspaces; the stream is split per dimension, trials run in index order
    if n > 1 and budget.random_trials > 0:
        seeds = np.random.SeedSequence(budget.seed).spawn(n)
        per_dim = max(1, budget.random_trials // (n - 1))
        for k in range(1, n):
            rng = np.random.Generator(np.random.Philox(seeds[k]))
            for _ in range(per_dim):
                if exact:
                    V = random_rational_subspace(n, k, rng)
                else:
                    V = Subspace(Matrix(rng.normal(size=(n, k)), linalg.FLOAT))
                df = ev.of(V)
                if df < 0:
                    stats["phase"] = "random"
                    stats["evaluated"] = ev.evaluated
                    return V

    # 4. Grassmannian descent, candidates re-verified exactly
    if n > 1 and budget.descent_restarts > 0:
        seeds = np.random.SeedSequence([budget.seed, 1]).spawn(n)
        for k in range(1, n):
            rng = np.random.Generator(np.random.Philox(seeds[k]))
            for _ in range(budget.descent_restarts):
                Y = grassmann_descent(d, k, rng)
                if exact:
                    rows = _float_rref_rationalize(Y)
                    if len(rows) != k:
                        continue
                    V = Subspace(Matrix.from_columns(rows, n, EXACT))
                else:
                    V = Subspace(Matrix(Y, linalg.FLOAT))
                if V.dim == k and ev.of(V) < 0:
                    stats["phase"] = "descent"
                    stats["evaluated"] = ev.evaluated
                    return V
    stats["evaluated"] = ev.evaluated
    return None


def min_proper_defect(d: BLDatum, budget: SearchBudget = SearchBudget()) -> tuple[Fraction | None, Subspace | None]:
    """Smallest defect over the deterministic candidates (lattice + pool) with 0 < dim V < n."""
    ev = _Defects(d)
    n = d.n
    lattice = kernel_lattice(d, budget.lattice_depth)
    best = None
    for S in lattice:
        if 0 < S.dim < n:
            df = ev.of(S)
            if _better((df,), best):
                best = (df, S)
    if d.mode == EXACT and n <= budget.exhaustive_dim_cap:
        for rows in pool_subspaces(candidate_pool(d, lattice), n):
            df = ev.of_rows(rows)
            if _better((df,), best):
                best = (df, rows)
    if best is None:
        return None, None
    S = best[1]
    if not isinstance(S, Subspace):
        S = Subspace._from_int_rows(n, S, canonical=True)
    return best[0], S


def decide_finiteness(d: BLDatum, budget: SearchBudget = SearchBudget()) -> FinitenessVerdict:
    """Finite / Infinite / Unknown verdict for BL(L, p)."""
    from .gaussian import compute_constant

    validate(d)
    n = d.n
    exact = d.mode == EXACT
    sd = scaling_defect(d)
    if sd != 0:
        witness = Subspace.full(n, d.mode) if sd < 0 else None
        return FinitenessVerdict(
            INFINITE, witness, sd, EXACT, budget, sd, {"reason": "scaling condition fails"}
        )
    stats: dict = {}
    V = search_violating_subspace(d, budget, stats)
    if V is not None:
        df = dimension_defect(d, V)
        mode = EXACT if V.is_exact else "heuristic"
        stats["reason"] = "violating subspace"
        return FinitenessVerdict(INFINITE, V, df, mode, budget, sd, stats)

    margin = stats.get("margin")
    margin = Fraction(0) if margin is None else margin
    stats["margin"] = _frac_str(margin)
    est = compute_constant(d.to_float(), tol=1e-8, max_iter=500, restarts=0)
    stats["gaussian_status"] = est.status
    stats["gaussian_value"] = est.value
    # a diverging status can also mean a supremum approached by degenerating
    # gaussians; only growth of the ratio itself counts against finiteness
    peak = max([est.value, *est.history])
    bounded = math.isfinite(peak) and peak <= GAUSSIAN_BOUND
    stats["gaussian_peak"] = peak
    covered = exact and n <= budget.exhaustive_dim_cap
    if bounded and covered:
        return FinitenessVerdict(FINITE, None, margin, EXACT, budget, sd, stats)
    if bounded:
        return FinitenessVerdict(FINITE, None, margin, "heuristic", budget, sd, stats)
    stats["reason"] = "no violating subspace found but the gaussian iteration diverges"
    return FinitenessVerdict(UNKNOWN, None, margin, "heuristic", budget, sd, stats)
