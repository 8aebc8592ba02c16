"""Parametrized submanifold patches and the linear data they induce.

A chart Σ: U -> R^n is either a tuple of rational functions with rational
coefficients (exact derivatives, exact tangent spaces at rational points) or
an opaque callable (Richardson-extrapolated central differences).  Charts are
assumed C^2 throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .datum import BLDatum, ExponentVector, conjugate_exponent, reciprocal
from .finiteness import SearchBudget, min_proper_defect, _frac_str
from .linalg import EXACT, FLOAT, Matrix, Subspace, kernel, orthogonal_complement, rank


class NotImmersiveError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rational functions with Fraction coefficients

class Poly:
    """Sparse multivariate polynomial {powers: coefficient}."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        self.terms = {tuple(k): Fraction(v) for k, v in (terms or {}).items() if Fraction(v) != 0}

    @classmethod
    def const(cls, nvars: int, c) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars: int, i: int) -> "Poly":
        return cls(nvars, {tuple(int(k == i) for k in range(nvars)): 1})

    def __add__(self, other):
        other = _as_poly(other, self.nvars)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other, self.nvars))

    def __rsub__(self, other):
        return _as_poly(other, self.nvars) - self

    def __mul__(self, other):
        other = _as_poly(other, self.nvars)
        out: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def diff(self, i: int) -> "Poly":
        out = {}
        for k, v in self.terms.items():
            if k[i]:
                kk = list(k)
                kk[i] -= 1
                out[tuple(kk)] = v * k[i]
        return Poly(self.nvars, out)

    def __call__(self, x):
        total = 0
        for k, v in self.terms.items():
            term = v if _is_exact_seq(x) else float(v)
            for xi, e in zip(x, k):
                if e:
                    term = term * xi**e
            total = total + term
        return total

    def is_constant(self) -> bool:
        return all(not any(k) for k in self.terms)

    def to_json(self) -> list[dict]:
        return [{"coef": _frac_str(v), "powers": list(k)} for k, v in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, nvars: int, terms: list[dict]) -> "Poly":
        out: dict = {}
        for t in terms:
            powers = tuple(int(e) for e in t["powers"])
            if len(powers) != nvars or any(e < 0 for e in powers):
                raise ValueError(f"term powers {t['powers']} do not match {nvars} variables")
            out[powers] = out.get(powers, 0) + Fraction(str(t["coef"]))
        return cls(nvars, out)


def _as_poly(x, nvars: int) -> Poly:
    return x if isinstance(x, Poly) else Poly.const(nvars, x)


def _is_exact_seq(x) -> bool:
    return all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in x)


@dataclass(frozen=True)
class RationalFunction:
    num: Poly
    den: Poly

    def __call__(self, x):
        return self.num(x) / self.den(x) if not self.den.is_constant() else self.num(x) * _inv_const(self.den, x)

    def diff(self, i: int) -> "RationalFunction":
        if self.den.is_constant():
            return RationalFunction(self.num.diff(i), self.den)
        n, d = self.num, self.den
        return RationalFunction(n.diff(i) * d - n * d.diff(i), d * d)

    def shifted(self, c) -> "RationalFunction":
        """self − c."""
        return RationalFunction(self.num - self.den * Fraction(c), self.den)


def _inv_const(den: Poly, x):
    c = next(iter(den.terms.values()), Fraction(0))
    return (1 / c) if _is_exact_seq(x) else 1.0 / float(c)


def _poly_components(components: Sequence[Poly]) -> tuple:
    return tuple(RationalFunction(p, Poly.const(p.nvars, 1)) for p in components)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """Σ: U -> R^n on an axis-aligned box U containing 0."""

    domain_dim: int
    ambient_dim: int
    domain: tuple
    kind: str
    components: tuple = ()
    func: Callable | None = None
    name: str = ""
    recipe: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("polynomial", "rational", "opaque"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if len(self.domain) != self.domain_dim:
            raise ValueError("domain box must have one interval per parameter")
        for lo, hi in self.domain:
            if not lo <= 0 <= hi or lo >= hi:
                raise ValueError("domain box must contain 0 in its interior")
        if self.kind != "opaque" and len(self.components) != self.ambient_dim:
            raise ValueError("need one component per ambient coordinate")
        if self.kind == "opaque" and self.func is None:
            raise ValueError("opaque charts need a callable")

    @property
    def is_exact(self) -> bool:
        return self.kind != "opaque"

    @property
    def origin(self):
        """Σ(0)."""
        zero = [Fraction(0)] * self.domain_dim
        return self.eval(zero)

    def in_domain(self, xi) -> bool:
        return all(lo <= float(x) <= hi for x, (lo, hi) in zip(xi, self.domain))

    def eval(self, xi):
        if self.kind == "opaque":
            return np.asarray(self.func(np.asarray(xi, dtype=float)), dtype=float)
        if _is_exact_seq(xi):
            return [c(list(xi)) for c in self.components]
        x = [float(v) for v in xi]
        return np.array([float(c(x)) for c in self.components])

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation at an (N, domain_dim) array of points."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.domain_dim)
        if self.kind == "opaque":
            return np.array([self.func(p) for p in pts], dtype=float).reshape(len(pts), self.ambient_dim)
        cols = [pts[:, i] for i in range(self.domain_dim)]
        out = np.empty((len(pts), self.ambient_dim))
        for k, c in enumerate(self.components):
            out[:, k] = np.broadcast_to(np.asarray(c(cols), dtype=float), (len(pts),))
        return out

    def derivative(self, xi) -> Matrix:
        """dΣ(ξ) as an ambient_dim x domain_dim matrix (exact at rational ξ)."""
        if self.kind != "opaque" and _is_exact_seq(xi):
            xi = [Fraction(v) for v in xi]
            rows = [[c.diff(i)(xi) for i in range(self.domain_dim)] for c in self.components]
            return Matrix(rows, EXACT, (self.ambient_dim, self.domain_dim))
        if self.kind != "opaque":
            x = [float(v) for v in xi]
            rows = [[float(c.diff(i)(x)) for i in range(self.domain_dim)] for c in self.components]
            return Matrix(rows, FLOAT, (self.ambient_dim, self.domain_dim))
        return Matrix(richardson_jacobian(self.func, np.asarray(xi, dtype=float)), FLOAT)

    def derivative_many(self, pts: np.ndarray) -> np.ndarray:
        """Float Jacobians at many points, shape (N, ambient_dim, domain_dim)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.domain_dim)
        if self.kind == "opaque":
            return np.array([richardson_jacobian(self.func, p) for p in pts])
        cols = [pts[:, i] for i in range(self.domain_dim)]
        out = np.empty((len(pts), self.ambient_dim, self.domain_dim))
        for k, c in enumerate(self.components):
            for i in range(self.domain_dim):
                out[:, k, i] = np.broadcast_to(np.asarray(c.diff(i)(cols), dtype=float), (len(pts),))
        return out

    def centered(self) -> "Chart":
        """The translate Σ − Σ(0), so that 0 lies on the patch."""
        o = self.origin
        if self.kind == "opaque":
            f, o = self.func, np.asarray(o, dtype=float)
            return Chart(self.domain_dim, self.ambient_dim, self.domain, "opaque", func=lambda x: f(x) - o, name=self.name)
        comps = tuple(c.shifted(v) for c, v in zip(self.components, o))
        return Chart(self.domain_dim, self.ambient_dim, self.domain, self.kind, comps, name=self.name, recipe=self.recipe)

    def to_json(self) -> dict:
        if self.recipe:
            return dict(self.recipe)
        if self.kind == "polynomial":
            return {
                "kind": "polynomial",
                "ambient": self.ambient_dim,
                "vars": self.domain_dim,
                "components": [c.num.to_json() for c in self.components],
                "domain": [[_num_str(lo), _num_str(hi)] for lo, hi in self.domain],
            }
        raise ValueError("only polynomial and builtin charts serialize to JSON")


def _num_str(x) -> str | float:
    return _frac_str(x) if isinstance(x, (Fraction, int)) else x


def richardson_jacobian(f: Callable, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0

        def central(step):
            return (np.asarray(f(x + step * e)) - np.asarray(f(x - step * e))) / (2 * step)

        J[:, i] = (4 * central(h / 2) - central(h)) / 3
    return J


# ---------------------------------------------------------------------------
# chart library

def _box(k: int, half) -> tuple:
    half = Fraction(half)
    return tuple((-half, half) for _ in range(k))


def polynomial_chart(components: Sequence[Poly], domain, name: str = "polynomial") -> Chart:
    k = components[0].nvars
    dom = tuple((Fraction(lo), Fraction(hi)) for lo, hi in domain)
    return Chart(k, len(components), dom, "polynomial", _poly_components(components), name=name)


def linear_patch(columns: Sequence[Sequence], offset=None, half_width="1/2", name: str = "linear_patch") -> Chart:
    """ξ ↦ offset + Σ_i ξ_i v_i for the given direction vectors v_i."""
    k = len(columns)
    n = len(columns[0])
    offset = [0] * n if offset is None else offset
    comps = []
    for r in range(n):
        p = Poly.const(k, Fraction(offset[r]))
        for i in range(k):
            p = p + Poly.var(k, i) * Fraction(columns[i][r])
        comps.append(p)
    recipe = {
        "kind": "builtin",
        "name": "linear_patch",
        "params": {
            "columns": [[_frac_str(Fraction(x)) for x in col] for col in columns],
            "offset": [_frac_str(Fraction(x)) for x in offset],
            "half_width": _frac_str(Fraction(half_width)),
        },
    }
    return Chart(k, n, _box(k, half_width), "polynomial", _poly_components(comps), name=name, recipe=recipe)


def hyperplane_graph(v: Sequence, half_width="1/2") -> Chart:
    """ξ ↦ (ξ, ⟨v, ξ⟩), a hyperplane patch in R^{k+1}."""
    k = len(v)
    cols = [[int(i == j) for j in range(k)] + [Fraction(v[i])] for i in range(k)]
    c = linear_patch(cols, half_width=half_width, name="hyperplane")
    recipe = {"kind": "builtin", "name": "hyperplane", "params": {"v": [_frac_str(Fraction(x)) for x in v], "half_width": _frac_str(Fraction(half_width))}}
    return Chart(c.domain_dim, c.ambient_dim, c.domain, c.kind, c.components, name="hyperplane", recipe=recipe)


def paraboloid(k: int = 2, half_width="1/2", scale="1") -> Chart:
    """ξ ↦ (ξ, scale·|ξ|²) in R^{k+1}."""
    comps = [Poly.var(k, i) for i in range(k)]
    comps.append(sum((Poly.var(k, i) * Poly.var(k, i) for i in range(k)), Poly.const(k, 0)) * Fraction(scale))
    recipe = {"kind": "builtin", "name": "paraboloid", "params": {"k": k, "half_width": _frac_str(Fraction(half_width)), "scale": _frac_str(Fraction(scale))}}
    return Chart(k, k + 1, _box(k, half_width), "polynomial", _poly_components(comps), name="paraboloid", recipe=recipe)


def polynomial_graph(phi: Poly, half_width="1/2") -> Chart:
    """ξ ↦ (ξ, φ(ξ))."""
    k = phi.nvars
    comps = [Poly.var(k, i) for i in range(k)] + [phi]
    recipe = {"kind": "builtin", "name": "polynomial_graph", "params": {"phi": phi.to_json(), "vars": k, "half_width": _frac_str(Fraction(half_width))}}
    return Chart(k, k + 1, _box(k, half_width), "polynomial", _poly_components(comps), name="polynomial_graph", recipe=recipe)


def _check_orthogonal(R: Sequence[Sequence[Fraction]]) -> None:
    n = len(R)
    for i in range(n):
        for j in range(n):
            s = sum(R[i][k] * R[j][k] for k in range(n))
            if s != (1 if i == j else 0):
                raise ValueError("rotation must be an exact rational orthogonal matrix")


def sphere_cap(n: int = 3, half_width="1/4", rotation=None, radius="1") -> Chart:
    """Cap of the radius-r sphere in R^n around R·e_n via inverse stereographic projection.

    ξ ↦ r R (2ξ, 1 − |ξ|²) / (1 + |ξ|²); rational, so tangent spaces at
    rational ξ are exact.
    """
    k = n - 1
    r = Fraction(radius)
    R = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)] if rotation is None else [[Fraction(str(x)) for x in row] for row in rotation]
    _check_orthogonal(R)
    sq = sum((Poly.var(k, i) * Poly.var(k, i) for i in range(k)), Poly.const(k, 0))
    den = sq + 1
    base = [Poly.var(k, i) * 2 for i in range(k)] + [1 - sq]
    comps = []
    for row in range(n):
        num = Poly.const(k, 0)
        for col in range(n):
            if R[row][col]:
                num = num + base[col] * (R[row][col] * r)
        comps.append(RationalFunction(num, den))
    recipe = {
        "kind": "builtin",
        "name": "sphere_cap",
        "params": {"n": n, "half_width": _frac_str(Fraction(half_width)), "radius": _frac_str(r), "rotation": [[_frac_str(x) for x in row] for row in R]},
    }
    return Chart(k, n, _box(k, half_width), "rational", tuple(comps), name="sphere_cap", recipe=recipe)


def cone_patch(t0="1", half_width="1/4") -> Chart:
    """Light-cone patch (t·u(s), t) in R^3, t = t0 + τ, away from the vertex.

    u(s) = ((1 − s²), 2s)/(1 + s²) is the rational unit-circle parametrization.
    """
    t0 = Fraction(t0)
    hw = Fraction(half_width)
    if t0 - hw <= 0:
        raise ValueError("cone patch must stay away from the vertex")
    k = 2
    s, tau = Poly.var(k, 0), Poly.var(k, 1)
    t = tau + t0
    den = s * s + 1
    comps = (
        RationalFunction(t * (1 - s * s), den),
        RationalFunction(t * (s * 2), den),
        RationalFunction(t, Poly.const(k, 1)),
    )
    recipe = {"kind": "builtin", "name": "cone_patch", "params": {"t0": _frac_str(t0), "half_width": _frac_str(hw)}}
    return Chart(k, 3, _box(k, hw), "rational", comps, name="cone_patch", recipe=recipe)


def opaque_chart(func: Callable, domain_dim: int, ambient_dim: int, half_width: float = 0.5, name: str = "opaque") -> Chart:
    dom = tuple((-float(half_width), float(half_width)) for _ in range(domain_dim))
    return Chart(domain_dim, ambient_dim, dom, "opaque", func=func, name=name)


BUILTINS = {
    "linear_patch": lambda p: linear_patch(p["columns"], p.get("offset"), p.get("half_width", "1/2")),
    "hyperplane": lambda p: hyperplane_graph(p["v"], p.get("half_width", "1/2")),
    "paraboloid": lambda p: paraboloid(int(p.get("k", 2)), p.get("half_width", "1/2"), p.get("scale", "1")),
    "polynomial_graph": lambda p: polynomial_graph(Poly.from_json(int(p["vars"]), p["phi"]), p.get("half_width", "1/2")),
    "sphere_cap": lambda p: sphere_cap(int(p.get("n", 3)), p.get("half_width", "1/4"), p.get("rotation"), p.get("radius", "1")),
    "cone_patch": lambda p: cone_patch(p.get("t0", "1"), p.get("half_width", "1/4")),
}


def chart_from_json(obj: dict) -> Chart:
    kind = obj.get("kind")
    if kind == "builtin":
        name = obj.get("name")
        if name not in BUILTINS:
            raise ValueError(f"field 'name': unknown builtin chart {name!r}")
        return BUILTINS[name](obj.get("params", {}))
    if kind == "polynomial":
        k, n = int(obj["vars"]), int(obj["ambient"])
        comps = [Poly.from_json(k, terms) for terms in obj["components"]]
        if len(comps) != n:
            raise ValueError(f"field 'components': expected {n} components, got {len(comps)}")
        return polynomial_chart(comps, [(Fraction(str(lo)), Fraction(str(hi))) for lo, hi in obj["domain"]])
    raise ValueError(f"field 'kind': unknown chart kind {kind!r}")


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldCollection:
    charts: tuple
    exponents: ExponentVector

    def __init__(self, charts: Sequence[Chart], exponents):
        charts = tuple(charts)
        if not isinstance(exponents, ExponentVector):
            exponents = ExponentVector(exponents)
        if len(charts) != len(exponents):
            raise ValueError("one exponent per chart")
        if len({c.ambient_dim for c in charts}) > 1:
            raise ValueError("charts must share the ambient dimension")
        object.__setattr__(self, "charts", charts)
        object.__setattr__(self, "exponents", exponents)

    @property
    def n(self) -> int:
        return self.charts[0].ambient_dim

    @property
    def m(self) -> int:
        return len(self.charts)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.domain_dim for c in self.charts)

    def scaling_defect(self) -> Fraction:
        """Σ dim(S_j)/p_j′ − n."""
        w = self.exponents.conjugate().reciprocals()
        return sum((k * wj for k, wj in zip(self.dims, w)), Fraction(0)) - self.n

    @property
    def scaling_holds(self) -> bool:
        return self.scaling_defect() == 0

    def centered(self) -> "ManifoldCollection":
        return ManifoldCollection([c.centered() for c in self.charts], self.exponents)

    def to_json(self) -> dict:
        return {"charts": [c.to_json() for c in self.charts], "exponents": self.exponents.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ManifoldCollection":
        try:
            return cls([chart_from_json(c) for c in obj["charts"]], obj["exponents"])
        except KeyError as exc:
            raise ValueError(f"collection missing field {exc}") from None


def tangent_space(c: Chart, xi) -> Subspace:
    if not c.in_domain(xi):
        raise ValueError("point outside the chart domain")
    D = c.derivative(xi)
    if rank(D) < c.domain_dim:
        raise NotImmersiveError(f"chart not immersive at ξ = {list(map(str, xi))}")
    return Subspace(D)


def normal_space(c: Chart, xi) -> Subspace:
    return orthogonal_complement(tangent_space(c, xi))


def datum_at(mc: ManifoldCollection, points: Sequence) -> BLDatum:
    """The linear datum (dΣ_j(ξ_j)^*, p′) at the chosen parameter points."""
    if len(points) != mc.m:
        raise ValueError("one point per chart")
    maps = []
    for c, xi in zip(mc.charts, points):
        if not c.in_domain(xi):
            raise ValueError("point outside the chart domain")
        D = c.derivative(xi)
        if rank(D) < c.domain_dim:
            raise NotImmersiveError(f"chart not immersive at ξ = {list(map(str, xi))}")
        maps.append(D.T)
    modes = {L.mode for L in maps}
    if len(modes) > 1:
        maps = [L.to_float() for L in maps]
    return BLDatum(mc.n, maps, mc.exponents.conjugate())


def surface_weight(c: Chart, xi) -> float:
    """Surface-measure density sqrt(det(dΣ^T dΣ)) at ξ."""
    D = c.derivative(xi)
    if rank(D) < c.domain_dim:
        raise NotImmersiveError(f"chart not immersive at ξ = {list(map(str, xi))}")
    G = D.T @ D
    if G.is_exact:
        return math.sqrt(float(_exact_det(G.row_tuples())))
    return math.sqrt(max(float(np.linalg.det(G.to_numpy())), 0.0))


def surface_weight_many(c: Chart, pts: np.ndarray) -> np.ndarray:
    D = c.derivative_many(pts)
    G = np.einsum("nki,nkj->nij", D, D)
    return np.sqrt(np.clip(np.linalg.det(G), 0.0, None))


def _exact_det(rows) -> Fraction:
    M = [list(r) for r in rows]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for i in range(c + 1, n):
            f = M[i][c] / M[c][c]
            M[i] = [a - f * b for a, b in zip(M[i], M[c])]
    return det


def sample_grid(c: Chart, count: int) -> list[tuple]:
    """count^k rational grid points filling the chart box (endpoints included)."""
    axes = []
    for lo, hi in c.domain:
        if count == 1:
            axes.append([Fraction(0)])
            continue
        if c.is_exact:
            lo, hi = Fraction(lo), Fraction(hi)
            axes.append([lo + (hi - lo) * Fraction(i, count - 1) for i in range(count)])
        else:
            axes.append(list(np.linspace(lo, hi, count)))
    return list(itertools.product(*axes))


@dataclass
class ScanReport:
    tuples: int
    worst_defect: Fraction | None
    worst_points: tuple | None
    worst_witness: Subspace | None
    holds: bool
    robust: bool | None
    verdicts: list = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        def pt(p):
            return [[_frac_str(x) if isinstance(x, Fraction) else float(x) for x in xi] for xi in p]

        return {
            "tuples": self.tuples,
            "holds": self.holds,
            "robustly_transverse": self.robust,
            "worst_defect": _frac_str(self.worst_defect) if self.worst_defect is not None else None,
            "worst_points": pt(self.worst_points) if self.worst_points is not None else None,
            "worst_witness": self.worst_witness.basis.to_json() if self.worst_witness is not None else None,
            "verdicts": [{"points": pt(p), "defect": _frac_str(df)} for p, df in self.verdicts],
        }


def _scan(mc, counts, budget):
    samples = [sample_grid(c, k) for c, k in zip(mc.charts, counts)]
    # one adjoint derivative per sampled point, shared by every tuple using it
    adjoints = [[datum_at(ManifoldCollection([c], [p]), [xi]).maps[0] for xi in pts] for c, p, pts in zip(mc.charts, mc.exponents, samples)]
    mixed = len({L.mode for col in adjoints for L in col}) > 1
    if mixed:
        adjoints = [[L.to_float() for L in col] for col in adjoints]
    p_conj = mc.exponents.conjugate()
    verdicts = []
    worst = (None, None, None)
    seen: dict = {}
    for idx in itertools.product(*[range(len(pts)) for pts in samples]):
        pts = tuple(samples[j][i] for j, i in enumerate(idx))
        maps = [adjoints[j][i] for j, i in enumerate(idx)]
        # flat patches repeat the same datum at every tuple
        key = tuple(L.row_tuples() for L in maps) if all(L.mode == EXACT for L in maps) else None
        if key is not None and key in seen:
            df, V = seen[key]
        else:
            df, V = min_proper_defect(BLDatum(mc.n, maps, p_conj), budget)
            if key is not None:
                seen[key] = (df, V)
        if df is None:
            continue
        verdicts.append((pts, df))
        if worst[0] is None or df < worst[0]:
            worst = (df, pts, V)
    return verdicts, worst


def transversality_scan(
    mc: ManifoldCollection,
    grid: Sequence[int] | int = 5,
    budget: SearchBudget = SearchBudget(),
    refine_limit: int = 4096,
) -> ScanReport:
    """Check the transversality condition at every tuple of sampled points.

    Each tuple's datum (dΣ^*, p′) is searched over the kernel lattice and,
    for small n, the candidate-pool spans; the condition holds on the sample iff no
    tuple has a negative defect.  When it holds, the scan is repeated on the
    midpoint-refined grid (if that has at most ``refine_limit`` tuples) and
    the collection is reported robustly transverse when the worst defect is
    unchanged.  This is sampling evidence, never a proof.
    """
    if not mc.scaling_holds:
        raise ValueError(f"scaling condition fails (defect {_frac_str(mc.scaling_defect())})")
    counts = [grid] * mc.m if isinstance(grid, int) else list(grid)
    if len(counts) != mc.m:
        raise ValueError("one grid count per chart")
    verdicts, worst = _scan(mc, counts, budget)
    holds = worst[0] is None or worst[0] >= 0
    robust = None
    if holds:
        fine = [2 * k - 1 if k > 1 else 1 for k in counts]
        if math.prod(len(sample_grid(c, k)) for c, k in zip(mc.charts, fine)) <= refine_limit:
            _, fine_worst = _scan(mc, fine, budget)
            robust = fine_worst[0] == worst[0]
    else:
        robust = False
    return ScanReport(len(verdicts), worst[0], worst[1], worst[2], holds, robust, verdicts)


# ---------------------------------------------------------------------------
# a small catalogue of named collections with exact charts

def _line(direction, half_width="1/2") -> Chart:
    return linear_patch([direction], half_width=half_width)


def builtin_collections() -> dict[str, ManifoldCollection]:
    inf2 = ["inf", "inf"]
    e = lambda n, i: [int(k == i) for k in range(n)]  # noqa: E731
    planes = [linear_patch([e(3, a), e(3, b)]) for a, b in ((1, 2), (0, 2), (0, 1))]
    return {
        "transverse_lines": ManifoldCollection([_line([1, 0]), _line([0, 1])], inf2),
        "identical_lines": ManifoldCollection([_line([1, 0]), _line([1, 0])], inf2),
        "three_lines": ManifoldCollection([_line([1, 0]), _line([0, 1]), _line([1, 1])], ["3", "3", "3"]),
        "orthogonal_circle_caps": ManifoldCollection(
            [sphere_cap(2), sphere_cap(2, rotation=[[0, -1], [1, 0]])], inf2
        ),
        "antipodal_circle_caps": ManifoldCollection(
            [sphere_cap(2), sphere_cap(2, rotation=[[-1, 0], [0, -1]])], inf2
        ),
        "coordinate_planes": ManifoldCollection(planes, ["2", "2", "2"]),
        "paraboloid_and_axis": ManifoldCollection([paraboloid(2), _line([0, 0, 1])], inf2),
        "cone_and_normal_line": ManifoldCollection([cone_patch(), _line([1, 0, -1])], inf2),
    }
