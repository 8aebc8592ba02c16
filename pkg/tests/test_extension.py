import math

import numpy as np
import pytest

from bltk.datum import BLDatum
from bltk.experiments.extension import (
    GridFunction,
    KnappConfig,
    PhaseResolutionError,
    ThickenedDisk,
    ball_volume,
    extension_integral,
    knapp_experiment,
    knapp_sets,
    phase_bounds,
    phase_check,
    predicted_knapp_slope,
)
from bltk.linalg import FLOAT, Matrix, Subspace
from bltk.manifold import ManifoldCollection, builtin_collections, datum_at, linear_patch, paraboloid

from generators import rng_for

BOX = [(-0.5, 0.5)]


def test_zero_frequency_gives_the_integral():
    f = GridFunction.from_function(lambda p: 1.0 + p[:, 0] ** 2, BOX, [64])
    c = paraboloid(1)
    assert extension_integral(c, f, [0.0, 0.0]) == pytest.approx(f.integral(), rel=1e-15)


def _fft_oracle_1d(values, lo, h, m):
    """Σ_k f_k e^{iη ξ_k} h at η = -2π m/(K h), from numpy's FFT."""
    K = len(values)
    eta = -2 * math.pi * m / (K * h)
    return eta, h * np.exp(1j * eta * (lo + h / 2)) * np.fft.fft(values)[m % K]


def test_linear_chart_matches_fft_oracle_in_one_variable():
    rng = rng_for(60)
    for _ in range(60):
        a = rng.normal(size=2)
        c = linear_patch([a.tolist()])
        # ξ ↦ ξ a; with x parallel to a the phase is η ξ with η = ⟨a, x⟩
        K = int(rng.integers(32, 129))
        vals = rng.normal(size=K)
        f = GridFunction((-0.5,), (1.0 / K,), vals)
        m = int(rng.integers(-(K // 8) + 1, K // 8))
        eta, want = _fft_oracle_1d(vals, -0.5, 1.0 / K, m)
        x = eta * a / float(a @ a)
        got = extension_integral(c, f, x)
        assert abs(got - want) <= 1e-6 * max(abs(want), 1e-12) + 1e-12


def test_linear_chart_matches_fft_oracle_in_two_variables():
    rng = rng_for(61)
    for _ in range(40):
        A, _ = np.linalg.qr(rng.normal(size=(3, 2)))
        c = linear_patch(A.T.tolist())
        K = (int(rng.integers(16, 49)), int(rng.integers(16, 49)))
        vals = rng.normal(size=K)
        h = (1.0 / K[0], 1.0 / K[1])
        f = GridFunction((-0.5, -0.5), h, vals)
        m = [int(rng.integers(-(k // 16), k // 16 + 1)) for k in K]
        eta = np.array([-2 * math.pi * mi / (k * hi) for mi, k, hi in zip(m, K, h)])
        shift = np.exp(1j * eta @ (np.array([-0.5, -0.5]) + np.array(h) / 2))
        want = h[0] * h[1] * shift * np.fft.fft2(vals)[m[0] % K[0], m[1] % K[1]]
        # orthonormal columns: A^T (A η) = η
        x = A @ eta
        got = extension_integral(c, f, x)
        assert abs(got - want) <= 1e-6 * max(abs(want), 1e-12) + 1e-12


def test_under_resolved_phase_raises():
    f = GridFunction.from_function(lambda p: np.ones(len(p)), BOX, [16])
    with pytest.raises(PhaseResolutionError, match="phase under-resolved"):
        extension_integral(linear_patch([[1, 0]]), f, [500.0, 0.0])


def test_ball_volumes():
    assert ball_volume(1) == pytest.approx(2.0)
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_thickened_disk_volume_agrees_with_box_counts():
    W = Subspace.span([(1, 2, 0)], 3).to_float()
    T = ThickenedDisk(W, 1.0, 0.3)
    assert T.box_count_volume(64) == pytest.approx(T.volume(), rel=0.03)
    # degenerate cases: a ball, and the full space
    ball = ThickenedDisk(Subspace.zero(2, FLOAT), 5.0, 0.5)
    assert ball.volume() == pytest.approx(math.pi * 0.25)
    assert ThickenedDisk(Subspace.full(2, FLOAT), 1.0, 0.5).volume() == pytest.approx(math.pi * 2.25)


KNAPP_DATA = [
    ("identical_lines", [(0, 1)]),
    ("transverse_lines", [(1, 0)]),
    ("coordinate_planes", [(0, 0, 1)]),
    ("coordinate_planes", [(1, 0, 0), (0, 1, 1)]),
    ("paraboloid_and_axis", [(0, 0, 1)]),
]


@pytest.mark.parametrize("name,vectors", KNAPP_DATA)
@pytest.mark.parametrize("delta", [1e-2, 1e-3])
def test_knapp_set_volumes_follow_the_power_laws(name, vectors, delta):
    mc = builtin_collections()[name]
    d = datum_at(mc, [[0] * c.domain_dim for c in mc.charts])
    V = Subspace.span(vectors, mc.n)
    sets = knapp_sets(d, V, delta, 0.02)
    for Xj, k, nj in zip(sets.X_j, sets.image_dims, d.dims):
        law = math.sqrt(delta) ** (nj - k) * delta**k
        assert 1 / 4 <= Xj.box_count_volume() / (Xj.asymptotic_volume()) <= 4
        assert 1 / 4 <= Xj.volume() / (law * ball_volume(nj - k) * ball_volume(k)) <= 4
    law = (1 / delta) ** V.dim * (1 / math.sqrt(delta)) ** (mc.n - V.dim)
    c = 0.02
    assert 1 / 4 <= sets.X.box_count_volume() / sets.X.asymptotic_volume() <= 4
    # the bare power law up to the fixed constants c and the unit-ball volumes
    const = ball_volume(V.dim) * c**V.dim * ball_volume(mc.n - V.dim) * c ** (mc.n - V.dim)
    assert sets.X.asymptotic_volume() == pytest.approx(const * law)


def test_zero_subspace_knapp_sets_are_balls():
    d = BLDatum(2, [Matrix.exact([[1, 0]]), Matrix.exact([[0, 1]])], ["inf", "inf"])
    sets = knapp_sets(d, Subspace.zero(2), 1e-2, 0.02)
    assert sets.X.k == 0 and sets.X.volume() == pytest.approx(math.pi * (0.02 / 0.1) ** 2)
    for Xj in sets.X_j:
        assert Xj.k == 1 and Xj.volume() == pytest.approx(2 * (0.1 + 1e-2))


def test_phase_check_calibration():
    mc = builtin_collections()["paraboloid_and_axis"]
    V = Subspace.span([(0, 0, 1)], 3)
    assert phase_check(mc, V, 1e-3, 1 / 100)
    assert not phase_check(mc, V, 1e-3, 10.0)


def test_linear_charts_have_no_curvature_phase():
    mc = builtin_collections()["transverse_lines"]
    _, t2 = phase_bounds(mc, Subspace.span([(1, 0)], 2), 1e-3, 0.05)
    assert t2 < 1e-12


def test_indicator_extension_lower_bound():
    mc = builtin_collections()["paraboloid_and_axis"]
    V = Subspace.span([(0, 0, 1)], 3)
    delta, c = 1e-2, 1 / 100
    assert phase_check(mc, V, delta, c)
    d = datum_at(mc, [[0, 0], [0]])
    sets = knapp_sets(d, V, delta, c)
    rng = rng_for(62)
    xs = sets.X.sample(rng, 200)
    for chart, Xj in zip(mc.charts, sets.X_j):
        hw = Xj.bounding_halfwidth()
        counts = [40] * chart.domain_dim
        f = GridFunction.from_function(lambda p: Xj.contains(p).astype(float), [(-a, a) for a in hw], counts)
        E = np.abs(extension_integral(chart, f, xs))
        assert np.all(E >= math.cos(1 / 5) * f.integral())


def test_knapp_null_experiment_has_zero_slope():
    mc = builtin_collections()["transverse_lines"]
    cfg = KnappConfig(Subspace.zero(2), delta_list=(2.0**-4, 2.0**-5, 2.0**-6))
    assert predicted_knapp_slope(mc, cfg.V) == 0
    rep = knapp_experiment(mc, cfg)
    assert abs(rep.slope) <= 0.1 and rep.passed


def test_knapp_phase_failure_asks_for_smaller_c():
    mc = builtin_collections()["identical_lines"]
    cfg = KnappConfig(Subspace.span([(0, 1)], 2), delta_list=(2.0**-4,), c=50.0)
    with pytest.raises(ValueError, match="decrease c"):
        knapp_experiment(mc, cfg)
