"""Convolution lab: densities of g_1dσ_1 * ... * g_mdσ_m at a point.

The density at a is ∫ f(y) δ(F_a(y)) J(y) dy with F_a(y) = Σ_j Σ_j(y_j) − a.
The delta is replaced by a centred gaussian of width ε.  Coordinates are
split into free ones z (sampled by scrambled Sobol points) and n pivot ones
w; for each z the pivot block is solved by Newton and w is drawn from the
gaussian that the linearized constraint induces, so the importance weight is
close to f J / |det ∂_w F|.  A dyadic ε ladder with common random numbers
feeds a Richardson step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats
from scipy.stats import qmc

from ..datum import INF
from ..manifold import ManifoldCollection, surface_weight_many
from .extension import GridFunction
from .report import ExperimentReport, Measurement, parallel_map

RANK_TOL = 1e-6


class NonTransversalError(ValueError):
    pass


def _nontransversal() -> NonTransversalError:
    return NonTransversalError("non-transversal configuration (density may be infinite)")


@dataclass(frozen=True)
class MCConfig:
    points: int = 2**11
    replicates: int = 8
    eps0: float = 0.02
    levels: int = 4
    seed: int = 0
    growth_limit: float = 1.5

    def to_json(self) -> dict:
        return {
            "points": self.points,
            "replicates": self.replicates,
            "eps0": self.eps0,
            "levels": self.levels,
            "seed": self.seed,
            "growth_limit": self.growth_limit,
        }


@dataclass
class DensityEstimate:
    value: float
    ci_low: float
    ci_high: float
    ladder: list
    eps: list
    note: str = ""

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "ci": [self.ci_low, self.ci_high],
            "ladder": [{"eps": e, "value": v} for e, v in zip(self.eps, self.ladder)],
            "note": self.note,
        }


def _as_density(g, chart) -> Callable:
    if g is None:
        return lambda pts: np.ones(len(pts))
    if isinstance(g, GridFunction):
        lo, h, vals = np.asarray(g.lo), np.asarray(g.h), g.values

        def lookup(pts):
            idx = np.floor((pts - lo) / h).astype(int)
            ok = np.all((idx >= 0) & (idx < np.array(vals.shape)), axis=1)
            out = np.zeros(len(pts))
            out[ok] = vals[tuple(idx[ok].T)]
            return out

        return lookup
    return lambda pts: np.asarray(g(pts), dtype=float).reshape(len(pts))


class _Constraint:
    """F_a(y) and its jacobian on the product parameter box."""

    def __init__(self, mc: ManifoldCollection, a):
        self.mc = mc
        self.a = np.asarray(a, dtype=float)
        self.dims = mc.dims
        self.offsets = np.cumsum((0,) + self.dims)
        self.lo = np.concatenate([[float(lo) for lo, _ in c.domain] for c in mc.charts])
        self.hi = np.concatenate([[float(hi) for _, hi in c.domain] for c in mc.charts])

    def parts(self, Y):
        return [Y[:, self.offsets[j] : self.offsets[j + 1]] for j in range(len(self.dims))]

    def value(self, Y):
        out = -np.broadcast_to(self.a, (len(Y), self.a.size)).copy()
        for c, y in zip(self.mc.charts, self.parts(Y)):
            out += c.eval_many(y)
        return out

    def jacobian(self, Y):
        return np.concatenate([c.derivative_many(y) for c, y in zip(self.mc.charts, self.parts(Y))], axis=2)

    def inside(self, Y):
        return np.all((Y >= self.lo) & (Y <= self.hi), axis=1)


def _gauss_newton_roots(con: _Constraint, starts: np.ndarray, iters: int = 40) -> np.ndarray:
    Y = starts.copy()
    for _ in range(iters):
        Fv = con.value(Y)
        J = con.jacobian(Y)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-12), Fv)
        Y = np.clip(Y - step, con.lo - 1.0, con.hi + 1.0)
    ok = (np.linalg.norm(con.value(Y), axis=1) < 1e-10) & con.inside(Y)
    return Y[ok]


def _check_rank(con: _Constraint, roots: np.ndarray) -> None:
    s = np.linalg.svd(con.jacobian(roots), compute_uv=False)
    if s.shape[1] < con.a.size or np.any(s[:, -1] <= RANK_TOL * s[:, 0]):
        raise _nontransversal()


def _newton_pivots(con: _Constraint, Y: np.ndarray, piv: np.ndarray, iters: int = 30):
    Y = Y.copy()
    conv = np.zeros(len(Y), dtype=bool)
    for _ in range(iters):
        Fv = con.value(Y)
        A = con.jacobian(Y)[:, :, piv]
        det = np.linalg.det(A)
        good = np.abs(det) > 1e-14
        step = np.zeros_like(Fv)
        step[good] = np.linalg.solve(A[good], Fv[good][..., None])[..., 0]
        Y[:, piv] -= step
        conv = good & (np.linalg.norm(Fv, axis=1) < 1e-13)
    conv |= np.linalg.norm(con.value(Y), axis=1) < 1e-11
    return Y, conv


def convolution_density(
    mc: ManifoldCollection,
    a,
    g_list: Sequence | None = None,
    sampler: MCConfig = MCConfig(),
) -> DensityEstimate:
    """Estimate g_1dσ_1 * ... * g_mdσ_m(a) with a confidence interval."""
    con = _Constraint(mc, a)
    n, D = con.a.size, int(sum(con.dims))
    if D < n:
        raise ValueError("total parameter dimension must be at least n")
    g_list = list(g_list) if g_list is not None else [None] * mc.m
    dens = [_as_density(g, c) for g, c in zip(g_list, mc.charts)]

    root_ss, rep_ss = np.random.SeedSequence(sampler.seed).spawn(2)
    rng = np.random.Generator(np.random.Philox(root_ss))
    starts = con.lo + (con.hi - con.lo) * rng.uniform(size=(64, D))
    roots = _gauss_newton_roots(con, starts)
    eps = [sampler.eps0 / 2**k for k in range(sampler.levels)]
    if len(roots) == 0:
        return DensityEstimate(0.0, 0.0, 0.0, [0.0] * len(eps), eps, note="no point of the constraint set found")
    _check_rank(con, roots)

    _, _, perm = sla.qr(con.jacobian(roots[:1])[0], pivoting=True)
    piv, free = np.sort(perm[:n]), np.sort(perm[n:])
    vol_free = float(np.prod(con.hi[free] - con.lo[free])) if len(free) else 1.0

    per_rep = []
    for child in rep_ss.spawn(sampler.replicates):
        sob = qmc.Sobol(d=D, scramble=True, seed=np.random.Generator(np.random.Philox(child)))
        u = sob.random(sampler.points)
        u = np.clip(u, 1e-12, 1 - 1e-12)
        Y = np.repeat(roots[:1], len(u), axis=0)
        Y[:, free] = con.lo[free] + u[:, : len(free)] * (con.hi[free] - con.lo[free])
        Y, conv = _newton_pivots(con, Y, piv)
        gauss = stats.norm.ppf(u[:, len(free) :])
        A = con.jacobian(Y)[:, :, piv]
        det = np.linalg.det(A)
        conv &= np.abs(det) > 1e-14
        if np.any(conv & con.inside(Y)):
            _check_rank(con, Y[conv & con.inside(Y)][:256])
        vals = []
        for e in eps:
            Yw = Y.copy()
            step = np.zeros((len(Y), n))
            step[conv] = np.linalg.solve(A[conv], (e * gauss[conv])[..., None])[..., 0]
            Yw[:, piv] += step
            ok = conv & con.inside(Yw)
            w = np.zeros(len(Y))
            if np.any(ok):
                Yk = Yw[ok]
                f = np.ones(len(Yk))
                for c, dj, y in zip(mc.charts, dens, con.parts(Yk)):
                    f *= dj(y) * surface_weight_many(c, y)
                Fv = con.value(Yk)
                log_ratio = -np.sum(Fv**2, axis=1) / (2 * e * e) + np.sum(gauss[ok] ** 2, axis=1) / 2
                w[ok] = vol_free * f * np.exp(log_ratio) / np.abs(det[ok])
            vals.append(float(w.mean()))
        per_rep.append(vals)

    L = np.array(per_rep)
    ladder = L.mean(axis=0).tolist()
    if ladder[0] > 0 and all(b >= sampler.growth_limit * a for a, b in zip(ladder, ladder[1:])):
        raise _nontransversal()
    rich = (4 * L[:, -1] - L[:, -2]) / 3 if L.shape[1] >= 2 else L[:, -1]
    mean = float(rich.mean())
    if len(rich) > 1:
        half = float(stats.t.ppf(0.975, len(rich) - 1) * rich.std(ddof=1) / math.sqrt(len(rich)))
    else:
        half = math.inf
    return DensityEstimate(mean, mean - half, mean + half, ladder, eps)


# ---------------------------------------------------------------------------

def surface_norm(chart, g, p, cells: int = 64) -> float:
    """‖g‖_{L^p(S)} with surface measure, by the midpoint rule on the chart box."""
    box = [(float(lo), float(hi)) for lo, hi in chart.domain]
    grid = GridFunction.from_function(lambda pts: np.zeros(len(pts)), box, [cells] * chart.domain_dim)
    pts = grid.nodes()
    vals = np.abs(_as_density(g, chart)(pts))
    if p == INF:
        return float(vals.max())
    p = float(p)
    J = surface_weight_many(chart, pts)
    return float((np.sum(vals**p * J) * grid.cell_volume) ** (1 / p))


def _random_box_indicator(chart, rng) -> tuple[Callable, list]:
    box = []
    for lo, hi in chart.domain:
        lo, hi = float(lo), float(hi)
        width = (hi - lo) * rng.uniform(0.5, 1.0)
        start = lo + (hi - lo - width) * rng.uniform()
        box.append((start, start + width))
    arr = np.array(box)

    def g(pts):
        return np.all((pts >= arr[:, 0]) & (pts <= arr[:, 1]), axis=1).astype(float)

    return g, box


def verify_C(mc: ManifoldCollection, trials: int = 8, seed: int = 0, sampler: MCConfig = MCConfig(points=2**10, replicates=4)) -> ExperimentReport:
    """Max over random box indicators and points a of density / Π‖g_j‖_{L^{p_j}(S_j)}.

    The maximum is tracked along the ε ladder; the check passes when the
    ladder shows no growth.  Non-transversal configurations raise.
    """
    streams = np.random.SeedSequence(seed).spawn(trials)

    def one(t):
        rng = np.random.Generator(np.random.Philox(streams[t]))
        gs, boxes = zip(*[_random_box_indicator(c, rng) for c in mc.charts])
        a = np.zeros(mc.n)
        for c, box in zip(mc.charts, boxes):
            xi = np.array([rng.uniform(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)) for lo, hi in box])
            a += c.eval_many(xi[None, :])[0]
        cfg = MCConfig(sampler.points, sampler.replicates, sampler.eps0, sampler.levels, int(rng.integers(2**31)), sampler.growth_limit)
        est = convolution_density(mc, a, gs, cfg)
        norm = 1.0
        for c, g, p in zip(mc.charts, gs, mc.exponents):
            norm *= surface_norm(c, g, p)
        return [v / norm for v in est.ladder], est.value / norm

    results = parallel_map(one, range(trials))
    eps = [sampler.eps0 / 2**k for k in range(sampler.levels)]
    lad = np.array([r[0] for r in results])
    best = lad.max(axis=0)
    rows = [Measurement(e, float(b), 1.0) for e, b in zip(eps, best)]
    growth = float(best[-1] / best[0]) if best[0] > 0 else math.inf
    sup = float(max(r[1] for r in results))
    return ExperimentReport(
        kind="convolution",
        inputs={"collection": mc.to_json(), "trials": trials, "seed": seed, "sampler": sampler.to_json()},
        measurements=rows,
        slope=None,
        predicted=None,
        tolerance=0.25,
        passed=math.isfinite(sup) and abs(growth - 1.0) <= 0.25,
        notes={"sup_ratio": sup, "ladder_growth": growth},
    )
