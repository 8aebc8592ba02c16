import math

import numpy as np
import pytest

from bltk.datum import ExponentVector
from bltk.experiments.kakeya import (
    PLANAR_CONFIGURATIONS,
    Tube,
    TubeFamily,
    axis_parallel_families,
    kakeya_scaling_defect,
    kakeya_sweep,
    kernel_datum,
    mkbl_check,
    overlapping_families,
    parallel_bl_value,
    random_tube_family,
    transverse_families,
    vkak_holds,
)
from bltk.linalg import FLOAT, Matrix, Subspace, kernel

from generators import rng_for

E1 = Subspace(Matrix([[1], [0]]))
E2 = Subspace(Matrix([[0], [1]]))


def test_disjoint_point_tubes_fill_balls():
    # V_1 = {0}: every tube is a δ-ball, so the quotient is the area of the unit disk
    delta = 2.0**-5
    pts = [np.array([i * 4 * delta, j * 4 * delta]) for i in range(3) for j in range(3)]
    fam = TubeFamily(2, 2, Subspace.zero(2), tuple(Tube(p, np.zeros((2, 0))) for p in pts), delta)
    res = mkbl_check([fam], ["1"], resolution=32)
    assert res.ratio == pytest.approx(math.pi, rel=0.01)


def test_scaling_condition_is_enforced():
    rng = rng_for(70)
    fams = transverse_families(2.0**-4, rng)
    assert kakeya_scaling_defect(fams, ExponentVector(["2", "2"])) == -1
    with pytest.raises(ValueError, match="scaling condition fails"):
        mkbl_check(fams, ["2", "2"])


def test_tubes_must_stay_near_reference():
    rng = rng_for(71)
    fam = random_tube_family(rng, E1, 3, 0.1, angle=0.05)
    far = Tube(np.zeros(2), np.array([[0.0], [1.0]]))
    with pytest.raises(ValueError, match="not close"):
        TubeFamily(2, 1, E1, fam.members + (far,), 0.1, angle_tol=0.05)


def test_kernel_datum_has_the_references_as_kernels():
    refs = [E1, Subspace.span([(1, 1, 0), (0, 0, 1)], 3)]
    d = kernel_datum(refs[:1], ["1"])
    assert kernel(d.maps[0]) == E1
    d = kernel_datum(refs[1:], ["1"])
    assert kernel(d.maps[0]) == refs[1]


def test_vkak_for_planar_references():
    assert vkak_holds([E1, E2], ["1", "1"])
    assert not vkak_holds([E1, E1], ["1", "1"])


def test_parallel_families_match_the_linear_value():
    target = parallel_bl_value([E1, E2], ["1", "1"])
    assert target == pytest.approx(4.0)
    for delta in (2.0**-3, 2.0**-5):
        fams = axis_parallel_families(delta, rng_for(72))
        assert mkbl_check(fams, ["1", "1"]).ratio == pytest.approx(target, rel=0.05)


def test_transverse_sweep_has_no_growth():
    rep = kakeya_sweep(transverse_families, ["1", "1"], deltas=[2.0**-k for k in range(3, 7)])
    assert rep.passed and rep.notes["vkak_holds"]


def test_overlapping_sweep_blows_up():
    rep = kakeya_sweep(overlapping_families, ["1", "1"], deltas=[2.0**-k for k in range(3, 7)])
    assert rep.slope <= -0.3 and not rep.notes["vkak_holds"]


def test_sweep_is_seed_deterministic():
    a = kakeya_sweep(transverse_families, ["1", "1"], deltas=[2.0**-3, 2.0**-4], seed=5)
    b = kakeya_sweep(transverse_families, ["1", "1"], deltas=[2.0**-3, 2.0**-4], seed=5)
    assert a.to_json() == b.to_json()
    assert set(PLANAR_CONFIGURATIONS) == {"parallel", "transverse", "overlapping"}
