"""Extension lab: grid quadrature of E_j f and the Knapp-set experiment.

For a subspace V and scale δ the frequency sets X_j ⊂ U_j and the spatial
set X ⊂ R^n are thickened disks; the normalized extension quotient over B_R,
R = 1/δ, then scales like δ^s with s = ½(Σ dim(L_j V)/p_j′ − dim V) whenever
the Knapp lower bound is sharp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from ..datum import INF
from ..linalg import Subspace, image, orthogonal_complement
from ..manifold import Chart, ManifoldCollection, datum_at
from .report import ExperimentReport, Measurement, fit_slope, parallel_map

PHASE_BOUND = 0.1
POINTS_PER_PERIOD = 8


class PhaseResolutionError(ValueError):
    pass


def ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    return math.pi ** (d / 2) / special.gamma(d / 2 + 1)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Samples of a function at the cell midpoints of an axis-aligned box."""

    lo: tuple
    h: tuple
    values: np.ndarray

    @classmethod
    def from_function(cls, func: Callable, box: Sequence[tuple], counts: Sequence[int]) -> "GridFunction":
        lo = tuple(float(a) for a, _ in box)
        h = tuple((float(b) - float(a)) / k for (a, b), k in zip(box, counts))
        g = cls(lo, h, np.zeros(tuple(counts)))
        vals = np.asarray(func(g.nodes()), dtype=float).reshape(tuple(counts))
        return cls(lo, h, vals)

    @property
    def dim(self) -> int:
        return len(self.h)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def nodes(self) -> np.ndarray:
        axes = [a + (np.arange(k) + 0.5) * s for a, s, k in zip(self.lo, self.h, self.values.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes with nonzero value and those values."""
        flat = self.values.ravel()
        keep = flat != 0
        return self.nodes()[keep], flat[keep]

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def norm(self, p=2) -> float:
        if p == INF:
            return float(np.max(np.abs(self.values))) if self.values.size else 0.0
        p = float(p)
        return float((np.sum(np.abs(self.values) ** p) * self.cell_volume) ** (1 / p))


def _max_partials(c: Chart, nodes: np.ndarray) -> np.ndarray:
    """max over nodes of |∂_i Σ| for each parameter axis i."""
    if len(nodes) == 0:
        return np.zeros(c.domain_dim)
    D = c.derivative_many(nodes)
    return np.max(np.linalg.norm(D, axis=1), axis=0)


def required_spacing(c: Chart, f: GridFunction, radius: float) -> np.ndarray:
    """Largest axis spacings resolving the phase ⟨x, Σ(ξ)⟩ for |x| ≤ radius."""
    nodes, _ = f.support()
    G = _max_partials(c, nodes)
    with np.errstate(divide="ignore"):
        return np.where(G * radius > 0, 2 * math.pi / (POINTS_PER_PERIOD * radius * G), np.inf)


def extension_integral(c: Chart, f: GridFunction, x, chunk: int = 4096) -> np.ndarray | complex:
    """E f(x) = ∫ e^{i⟨x, Σ(ξ)⟩} f(ξ) dξ by the midpoint rule on the grid of f."""
    if f.dim != c.domain_dim:
        raise ValueError("grid function and chart have different parameter dimensions")
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) == 1
    nodes, vals = f.support()
    if len(nodes) and not all(c.in_domain(p) for p in (nodes.min(axis=0), nodes.max(axis=0))):
        raise ValueError("grid function support leaves the chart domain")
    radius = float(np.max(np.linalg.norm(xs, axis=1))) if len(xs) else 0.0
    need = required_spacing(c, f, radius)
    if np.any(np.asarray(f.h) > need * (1 + 1e-12)):
        raise PhaseResolutionError(
            f"phase under-resolved: spacing {max(f.h):.3g} > {float(np.min(need)):.3g} needed for |x| <= {radius:.3g}"
        )
    S = c.eval_many(nodes) if len(nodes) else np.zeros((0, c.ambient_dim))
    w = vals * f.cell_volume
    out = np.empty(len(xs), dtype=complex)
    for start in range(0, len(xs), chunk):
        ph = xs[start : start + chunk] @ S.T
        out[start : start + chunk] = np.exp(1j * ph) @ w
    return complex(out[0]) if single else out


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThickenedDisk:
    """N_r(W ∩ B(0, rho)) for a subspace W of R^N."""

    W: Subspace
    rho: float
    r: float

    @property
    def ambient(self) -> int:
        return self.W.ambient_dim

    @property
    def k(self) -> int:
        return self.W.dim

    def _frame(self) -> tuple[np.ndarray, np.ndarray]:
        Qw = self.W.orthonormal_basis()
        Qp = orthogonal_complement(self.W).orthonormal_basis()
        return Qw.reshape(self.ambient, -1), Qp.reshape(self.ambient, -1)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        Qw, Qp = self._frame()
        pts = np.atleast_2d(pts)
        along = np.linalg.norm(pts @ Qw, axis=1) if Qw.shape[1] else np.zeros(len(pts))
        perp = np.linalg.norm(pts @ Qp, axis=1) if Qp.shape[1] else np.zeros(len(pts))
        return np.hypot(perp, np.maximum(along - self.rho, 0.0))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.distance(pts) <= self.r

    def volume(self) -> float:
        """Exact volume by one radial integral along W."""
        N, k = self.ambient, self.k
        q = N - k
        if k == 0:
            return ball_volume(N) * self.r**N
        if q == 0:
            return ball_volume(N) * (self.rho + self.r) ** N
        core = ball_volume(q) * self.r**q * ball_volume(k) * self.rho**k
        rim, _ = integrate.quad(
            lambda s: (self.r**2 - (s - self.rho) ** 2) ** (q / 2) * k * s ** (k - 1),
            self.rho,
            self.rho + self.r,
            epsabs=0.0,
            epsrel=1e-11,
        )
        return core + ball_volume(q) * ball_volume(k) * rim

    def asymptotic_volume(self) -> float:
        """ω_k rho^k · ω_{N-k} r^{N-k}, the leading term as r/rho -> 0."""
        return ball_volume(self.k) * self.rho**self.k * ball_volume(self.ambient - self.k) * self.r ** (self.ambient - self.k)

    def box_count_volume(self, cells: int = 48) -> float:
        """Count frame-aligned grid cells whose centres lie in the set."""
        Qw, Qp = self._frame()
        ext = [self.rho + self.r] * Qw.shape[1] + [self.r] * Qp.shape[1]
        axes = [(np.arange(cells) + 0.5) * (2 * e / cells) - e for e in ext]
        h = np.prod([2 * e / cells for e in ext])
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1)
        pts = coords @ np.hstack([Qw, Qp]).T
        return float(np.count_nonzero(self.contains(pts)) * h)

    def bounding_halfwidth(self) -> np.ndarray:
        Qw, _ = self._frame()
        proj = np.linalg.norm(Qw, axis=1) if Qw.shape[1] else np.zeros(self.ambient)
        return np.minimum(self.rho * proj + self.r, self.rho + self.r)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Points of the set, half of them on its outer extremes."""
        Qw, Qp = self._frame()
        N = self.ambient
        u = _unit(rng.normal(size=(count, Qw.shape[1]))) if Qw.shape[1] else np.zeros((count, 0))
        e = _unit(rng.normal(size=(count, N)))
        a = np.full(count, self.rho)
        b = np.full(count, self.r)
        half = count // 2
        a[half:] *= rng.uniform(size=count - half)
        b[half:] *= rng.uniform(size=count - half)
        core = (u * a[:, None]) @ Qw.T if Qw.shape[1] else np.zeros((count, N))
        return core + e * b[:, None]


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=1, keepdims=True)
    n[n == 0] = 1.0
    return v / n


@dataclass(frozen=True)
class KnappSets:
    delta: float
    c: float
    X_j: tuple
    X: ThickenedDisk
    image_dims: tuple

    def volumes(self) -> dict:
        return {
            "X_j": [s.volume() for s in self.X_j],
            "X": self.X.volume(),
            "X_j_asymptotic": [s.asymptotic_volume() for s in self.X_j],
            "X_asymptotic": self.X.asymptotic_volume(),
        }


def knapp_sets(d, V: Subspace, delta: float, c: float) -> KnappSets:
    """X_j = N_δ((L_j V)^⊥ ∩ B(0, δ^{1/2})) and X = N_{cδ^{-1/2}}(V ∩ B(0, c/δ))."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if V.ambient_dim != d.n:
        raise ValueError("V must live in the domain of the datum")
    Vf = V.to_float() if V.is_exact else V
    X_j, dims = [], []
    for L in d.maps:
        img = image(L.to_float(), Vf)
        dims.append(img.dim)
        X_j.append(ThickenedDisk(orthogonal_complement(img), math.sqrt(delta), delta))
    X = ThickenedDisk(Vf, c / delta, c / math.sqrt(delta))
    return KnappSets(delta, c, tuple(X_j), X, tuple(dims))


def _linear_parts(mc: ManifoldCollection):
    mc = mc.centered()
    zero = [[Fraction(0)] * c.domain_dim for c in mc.charts]
    return mc, datum_at(mc, zero)


def phase_bounds(mc: ManifoldCollection, V: Subspace, delta: float, c: float, samples: int = 2000, seed: int = 0) -> tuple[float, float]:
    """Largest sampled |⟨L_j x, ξ⟩| and |⟨x, Σ_j(ξ) − dΣ_j(0)ξ⟩| over X × X_j."""
    mc, d = _linear_parts(mc)
    sets = knapp_sets(d, V, delta, c)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    xs = sets.X.sample(rng, samples)
    worst1 = worst2 = 0.0
    for chart, L, Xj in zip(mc.charts, d.maps, sets.X_j):
        A = L.to_numpy()
        xi = Xj.sample(rng, samples)
        # the maximizer of ⟨L x, ·⟩ over X_j, paired with each x
        u = xs @ A.T
        Qw, _ = Xj._frame()
        pw = (u @ Qw) @ Qw.T if Qw.shape[1] else np.zeros_like(u)
        xi_star = Xj.rho * _unit(pw) + Xj.r * _unit(u)
        xi = np.vstack([xi, xi_star])
        xx = np.vstack([xs, xs])
        if np.any(np.abs(xi) > np.array([hi for _, hi in chart.domain], dtype=float)):
            raise ValueError("Knapp set X_j leaves the chart domain; use a smaller delta")
        t1 = np.abs(np.einsum("ni,ni->n", xx @ A.T, xi))
        lin = xi @ A
        t2 = np.abs(np.einsum("ni,ni->n", xx, chart.eval_many(xi) - lin))
        worst1 = max(worst1, float(t1.max()))
        worst2 = max(worst2, float(t2.max()))
    return worst1, worst2


def phase_check(mc: ManifoldCollection, V: Subspace, delta: float, c: float, samples: int = 2000, seed: int = 0) -> bool:
    """True iff both phase terms stay within 1/10 on every sample."""
    t1, t2 = phase_bounds(mc, V, delta, c, samples, seed)
    return t1 <= PHASE_BOUND and t2 <= PHASE_BOUND


@dataclass(frozen=True)
class KnappConfig:
    V: Subspace
    delta_list: tuple = tuple(2.0**-k for k in range(4, 9))
    c: float = 0.02
    quadrature: int = 8
    samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        ds = [float(x) for x in self.delta_list]
        if not all(0 < x < 1 for x in ds):
            raise ValueError("every delta must lie in (0, 1)")
        if any(a <= b for a, b in zip(ds, ds[1:])):
            raise ValueError("delta_list must be strictly decreasing")
        if self.c <= 0:
            raise ValueError("c must be positive")

    @staticmethod
    def R_rule(delta: float) -> float:
        return 1.0 / delta

    def to_json(self) -> dict:
        return {
            "V": self.V.basis.to_json(),
            "delta_list": [float(x) for x in self.delta_list],
            "c": self.c,
            "quadrature": self.quadrature,
            "samples": self.samples,
            "seed": self.seed,
        }


def _indicator_grid(Xj: ThickenedDisk, chart: Chart, R: float, q: int) -> GridFunction:
    hw = Xj.bounding_halfwidth()
    coarse = GridFunction(tuple(-hw), tuple(hw / 4), np.ones((8,) * len(hw)))
    # resolve the phase for |x| <= R and the thin directions of width 2δ
    h = np.minimum(required_spacing(chart, coarse, R) * 0.99, 2 * Xj.r / q)
    counts = [max(q, int(math.ceil(2 * a / s))) for a, s in zip(hw, h)]
    return GridFunction.from_function(lambda p: Xj.contains(p).astype(float), [(-a, a) for a in hw], counts)


def knapp_point(mc: ManifoldCollection, cfg: KnappConfig, delta: float) -> Measurement:
    mc0, d = _linear_parts(mc)
    if not phase_check(mc0, cfg.V, delta, cfg.c, cfg.samples, cfg.seed):
        raise ValueError(f"phase bound fails at delta = {delta:g}; decrease c")
    sets = knapp_sets(d, cfg.V, delta, cfg.c)
    R = cfg.R_rule(delta)
    weights = [float(2 * r) for r in mc.exponents.conjugate().reciprocals()]
    grids, rhs, band = [], 1.0, 0.0
    for chart, Xj, w in zip(mc0.charts, sets.X_j, weights):
        if w == 0:
            grids.append(None)
            continue
        g = _indicator_grid(Xj, chart, R, cfg.quadrature)
        grids.append(g)
        rhs *= g.norm(2) ** w
        nodes, _ = g.support()
        band += w * float(np.max(np.linalg.norm(chart.eval_many(nodes), axis=1)))
    n = mc.n
    hx = min(2 * math.pi / (POINTS_PER_PERIOD * band) if band > 0 else math.inf, R / 64)
    k = int(math.ceil(R / hx))
    hx = R / k
    axis = (np.arange(-k, k) + 0.5) * hx
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=1)
    xs = xs[np.linalg.norm(xs, axis=1) <= R]
    integrand = np.ones(len(xs))
    for chart, g, w in zip(mc0.charts, grids, weights):
        if g is not None:
            integrand *= np.abs(extension_integral(chart, g, xs)) ** w
    lhs = float(integrand.sum() * hx**n)
    lower = sets.X.volume()
    for g, w in zip(grids, weights):
        if g is not None:
            lower *= (math.cos(2 * PHASE_BOUND) * g.integral()) ** w
    return Measurement(delta, lhs, rhs, {"R": R, "x_points": len(xs), "knapp_lower": lower / rhs})


def predicted_knapp_slope(mc: ManifoldCollection, V: Subspace) -> Fraction:
    _, d = _linear_parts(mc)
    w = mc.exponents.conjugate().reciprocals()
    total = sum((image(L, V if L.mode == V.mode else V.to_float()).dim * wj for L, wj in zip(d.maps, w)), Fraction(0))
    return (total - V.dim) / 2


def knapp_experiment(mc: ManifoldCollection, cfg: KnappConfig, tolerance: float = 0.1) -> ExperimentReport:
    """Normalized extension quotient over B_{1/δ} for each δ, and its log-log slope."""
    if not mc.scaling_holds:
        raise ValueError("scaling condition fails")
    rows = parallel_map(lambda dl: knapp_point(mc, cfg, float(dl)), cfg.delta_list)
    slope = fit_slope([m.delta for m in rows], [m.ratio for m in rows])
    predicted = float(predicted_knapp_slope(mc, cfg.V))
    return ExperimentReport(
        kind="knapp",
        inputs={"collection": mc.to_json(), "config": cfg.to_json()},
        measurements=rows,
        slope=slope,
        predicted=predicted,
        tolerance=tolerance,
        passed=abs(slope - predicted) <= tolerance,
        notes={"lower_bound_holds": all(m.ratio >= m.extra["knapp_lower"] for m in rows)},
    )
