import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from bltk.finiteness import dimension_defect, transversality_defect
from bltk.linalg import Matrix, Subspace, kernel
from bltk.manifold import (
    ManifoldCollection,
    NotImmersiveError,
    Poly,
    builtin_collections,
    chart_from_json,
    cone_patch,
    datum_at,
    hyperplane_graph,
    linear_patch,
    normal_space,
    opaque_chart,
    paraboloid,
    polynomial_chart,
    polynomial_graph,
    richardson_jacobian,
    sample_grid,
    sphere_cap,
    surface_weight,
    surface_weight_many,
    tangent_space,
    transversality_scan,
)

from generators import rng_for

CUBIC = Poly.var(1, 0) * Poly.var(1, 0) * Poly.var(1, 0) - Poly.var(1, 0) * Fraction(1, 2)


def library():
    return {
        "paraboloid": paraboloid(2),
        "hyperplane": hyperplane_graph(["1/3", "-2"]),
        "sphere_cap": sphere_cap(3),
        "rotated_circle_cap": sphere_cap(2, rotation=[["3/5", "-4/5"], ["4/5", "3/5"]]),
        "cone": cone_patch(),
        "cubic_graph": polynomial_graph(CUBIC),
        "linear": linear_patch([[1, 2, 0, 1], [0, 1, 1, -1]]),
    }


def coordinate_subspaces(n):
    for k in range(n + 1):
        for idx in itertools.combinations(range(n), k):
            yield Subspace.coordinate(n, list(idx)) if k else Subspace.zero(n)


def test_paraboloid_tangent_at_vertex():
    assert tangent_space(paraboloid(2), [0, 0]) == Subspace.coordinate(3, [0, 1])


def test_hyperplane_tangent_is_constant():
    c = hyperplane_graph([2, -1])
    planes = {tangent_space(c, xi) for xi in sample_grid(c, 4)}
    assert len(planes) == 1
    assert normal_space(c, [0, 0]) == Subspace.span([(2, -1, -1)], 3)


def test_sphere_cap_tangent_is_orthogonal_to_radius():
    c = sphere_cap(3, radius="2")
    for xi in sample_grid(c, 4):
        x = c.eval(xi)
        assert sum(v * v for v in x) == 4
        D = c.derivative(xi)
        for col in zip(*D.row_tuples()):
            assert sum(a * b for a, b in zip(x, col)) == 0
        assert normal_space(c, xi) == Subspace.span([x], 3)


def test_non_orthogonal_rotation_rejected():
    with pytest.raises(ValueError, match="orthogonal"):
        sphere_cap(2, rotation=[[1, 1], [0, 1]])


def test_not_immersive():
    fold = polynomial_chart([Poly.var(1, 0) * Poly.var(1, 0), Poly.const(1, 0)], [(-1, 1)])
    with pytest.raises(NotImmersiveError, match="chart not immersive"):
        tangent_space(fold, [0])
    with pytest.raises(NotImmersiveError):
        surface_weight(fold, [0])


@pytest.mark.parametrize("name", sorted(library()))
def test_finite_differences_match_analytic_derivative(name):
    c = library()[name]
    rng = rng_for(sorted(library()).index(name))
    lo = np.array([float(a) for a, _ in c.domain])
    hi = np.array([float(b) for _, b in c.domain])
    pts = lo + (hi - lo) * rng.random((100, c.domain_dim))
    exact = c.derivative_many(pts)
    for x, D in zip(pts, exact):
        fd = richardson_jacobian(lambda y: c.eval(y), x)
        assert np.linalg.norm(fd - D) <= 1e-6 * max(1.0, np.linalg.norm(D))


def test_opaque_chart_uses_finite_differences():
    c = opaque_chart(lambda x: np.array([np.cos(x[0]), np.sin(x[0])]), 1, 2)
    D = c.derivative([0.3]).to_numpy()
    np.testing.assert_allclose(D[:, 0], [-math.sin(0.3), math.cos(0.3)], atol=1e-9)
    assert math.isclose(surface_weight(c, [0.3]), 1.0, rel_tol=1e-9)


def test_normal_space_is_kernel_of_adjoint():
    for c in library().values():
        for xi in sample_grid(c, 3):
            assert normal_space(c, xi) == kernel(c.derivative(xi).T)


def test_surface_weights():
    flat = linear_patch([[1, 0, 0], [0, 1, 0]])
    assert surface_weight(flat, [Fraction(1, 3), Fraction(-1, 5)]) == 1.0
    assert surface_weight(paraboloid(2), [0, 0]) == 1.0
    g = polynomial_graph(CUBIC)
    for xi in sample_grid(g, 7):
        slope = 3 * xi[0] ** 2 - Fraction(1, 2)
        assert math.isclose(surface_weight(g, xi), math.sqrt(1 + slope**2), rel_tol=1e-14)
    pts = np.linspace(-0.5, 0.5, 11).reshape(-1, 1)
    want = np.sqrt(1 + (3 * pts[:, 0] ** 2 - 0.5) ** 2)
    np.testing.assert_allclose(surface_weight_many(g, pts), want, rtol=1e-13)


def test_datum_at_transverse_lines():
    mc = builtin_collections()["transverse_lines"]
    d = datum_at(mc, [[0], [0]])
    assert d.dims == (1, 1) and d.exponents.to_json() == ["1", "1"]
    assert kernel(d.maps[0]) == Subspace.coordinate(2, [1])
    assert kernel(d.maps[1]) == Subspace.coordinate(2, [0])


def test_datum_at_coordinate_planes_is_loomis_whitney_like():
    d = datum_at(builtin_collections()["coordinate_planes"], [[0, 0]] * 3)
    normals = [kernel(L) for L in d.maps]
    assert Subspace.span([v for N in normals for v in zip(*N.basis.row_tuples())], 3) == Subspace.full(3)
    assert all(dimension_defect(d, V) >= 0 for V in coordinate_subspaces(3))


@pytest.mark.parametrize("name", sorted(builtin_collections()))
def test_transversality_defect_matches_datum_defect(name):
    mc = builtin_collections()[name]
    for pts in itertools.product(*[sample_grid(c, 3) for c in mc.charts]):
        tangents = [tangent_space(c, xi) for c, xi in zip(mc.charts, pts)]
        d = datum_at(mc, pts)
        for V in coordinate_subspaces(mc.n):
            assert transversality_defect(tangents, mc.exponents, V) == dimension_defect(d, V)


def test_scan_examples():
    cat = builtin_collections()
    r = transversality_scan(cat["orthogonal_circle_caps"], 5)
    assert r.holds and r.robust
    r = transversality_scan(cat["antipodal_circle_caps"], 5)
    assert not r.holds and r.worst_defect < 0
    # the violating tuple has parallel tangents
    a, b = r.worst_points
    c1, c2 = cat["antipodal_circle_caps"].charts
    assert tangent_space(c1, a) == tangent_space(c2, b)
    assert transversality_scan(cat["coordinate_planes"], 3).holds


def test_scan_requires_scaling():
    mc = ManifoldCollection([linear_patch([[1, 0]]), linear_patch([[0, 1]])], ["2", "2"])
    with pytest.raises(ValueError, match="scaling condition fails"):
        transversality_scan(mc)


def test_chart_json_round_trip():
    for c in library().values():
        again = chart_from_json(c.to_json())
        for xi in sample_grid(c, 3):
            assert again.eval(xi) == c.eval(xi)
    with pytest.raises(ValueError, match="unknown builtin"):
        chart_from_json({"kind": "builtin", "name": "torus"})


def test_centered_chart_passes_through_origin():
    c = sphere_cap(3).centered()
    assert all(v == 0 for v in c.origin)
    assert tangent_space(c, [0, 0]) == tangent_space(sphere_cap(3), [0, 0])
