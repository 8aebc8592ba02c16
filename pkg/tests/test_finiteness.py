import itertools
from fractions import Fraction

import pytest

from bltk.datum import BLDatum, ExponentVector, hoelder_datum, loomis_whitney_datum, scaling_defect, young_datum
from bltk.finiteness import (
    FINITE,
    INFINITE,
    SearchBudget,
    decide_finiteness,
    dimension_defect,
    kernel_lattice,
    search_violating_subspace,
    transversality_defect,
)
from bltk.linalg import DimensionError, Matrix, Subspace, kernel, subspace_sum, intersect

from generators import random_datum, random_surjection, rng_for


def coordinate_subspaces(n):
    for k in range(n + 1):
        for idx in itertools.combinations(range(n), k):
            yield Subspace.coordinate(n, list(idx)) if k else Subspace.zero(n)


def test_defect_of_zero_and_full_space():
    rng = rng_for(1)
    for _ in range(30):
        d = random_datum(rng)
        assert dimension_defect(d, Subspace.zero(d.n)) == 0
        assert dimension_defect(d, Subspace.full(d.n)) == scaling_defect(d)


def test_loomis_whitney_axis_defects():
    d = loomis_whitney_datum(3, [2, 2, 2])
    # the projection dropping x kills the x-axis, the other two see a line
    for i in range(3):
        assert dimension_defect(d, Subspace.coordinate(3, [i])) == Fraction(1, 2) + Fraction(1, 2) - 1
    for pair in itertools.combinations(range(3), 2):
        # a coordinate plane projects onto lines twice and onto itself once
        assert dimension_defect(d, Subspace.coordinate(3, list(pair))) == Fraction(1, 2) * (1 + 1 + 2) - 2


def test_defect_ambient_mismatch():
    with pytest.raises(DimensionError):
        dimension_defect(hoelder_datum(2, [1]), Subspace.full(3))


def test_unbalanced_loomis_whitney_witness():
    d = loomis_whitney_datum(3, [1, 4, 4])
    assert scaling_defect(d) == 0
    assert dimension_defect(d, Subspace.coordinate(3, [0])) == Fraction(-1, 2)
    V = search_violating_subspace(d)
    assert V is not None and dimension_defect(d, V) < 0
    v = decide_finiteness(d)
    assert v.status == INFINITE and v.certificate_mode == "exact"
    assert dimension_defect(d, v.witness) == v.defect < 0


def test_hoelder_has_no_witness_and_all_defects_vanish():
    for n, p in [(2, [2, 2]), (3, [1]), (4, [3, 3, 3]), (2, [4, 4, 4, 4])]:
        d = hoelder_datum(n, p)
        assert search_violating_subspace(d) is None
        assert all(dimension_defect(d, V) == 0 for V in coordinate_subspaces(n))


def test_identical_rank_one_maps():
    one = Matrix.identity(1)
    assert decide_finiteness(BLDatum(1, [one, one], [2, 2])).status == FINITE
    v = decide_finiteness(BLDatum(1, [one, one], [2, 4]))
    assert v.status == INFINITE and v.witness == Subspace.full(1) and v.defect < 0


def test_decide_examples():
    assert decide_finiteness(young_datum()).status == FINITE
    v = decide_finiteness(loomis_whitney_datum(3, [2, 2, 2]))
    assert v.status == FINITE and v.certificate_mode == "exact"
    v = decide_finiteness(loomis_whitney_datum(3, [2, 2, 4]))
    assert v.status == INFINITE and v.witness is not None and v.scaling_defect != 0


def test_verdict_invariants_on_random_data():
    rng = rng_for(8)
    budget = SearchBudget(random_trials=100)
    for _ in range(40):
        d = random_datum(rng)
        v = decide_finiteness(d, budget)
        if v.status == INFINITE:
            assert v.scaling_defect != 0 or (v.witness is not None and dimension_defect(d, v.witness) < 0)
        report = v.to_json()
        assert set(report) >= {"status", "witness", "defect", "certificate_mode", "budget"}


def test_kernel_lattice_is_closed():
    d = loomis_whitney_datum(3, [2, 2, 2])
    lat = kernel_lattice(d)
    for L in d.maps:
        assert kernel(L) in lat
    for A, B in itertools.product(lat, repeat=2):
        assert subspace_sum(A, B) in lat and intersect(A, B) in lat


def test_transversality_examples():
    inf2 = ["inf", "inf"]
    x_axis, y_axis = Subspace.coordinate(2, [0]), Subspace.coordinate(2, [1])
    # each normal line meets R^2 in a line: (2 - 1) + (2 - 1) - 2
    assert transversality_defect([x_axis, y_axis], inf2, Subspace.full(2)) == 0
    assert transversality_defect([x_axis, y_axis], inf2, x_axis) == 0
    # conjugates of inf are 1; identical lines are blind to their common normal
    assert transversality_defect([x_axis, x_axis], inf2, y_axis) == -1
    with pytest.raises(ValueError):
        transversality_defect([x_axis], inf2, y_axis)


def test_transversality_equals_datum_defect_on_coordinate_subspaces():
    rng = rng_for(12)
    for _ in range(60):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        maps = [Matrix.exact(random_surjection(rng, int(rng.integers(1, n + 1)), n)) for _ in range(m)]
        p = ExponentVector([["1", "2", "3/2", "inf", "4"][int(rng.integers(0, 5))] for _ in range(m)])
        # a tangent space is the row space of L_j = dΣ_j^T
        tangents = [Subspace(L.T) for L in maps]
        d = BLDatum(n, maps, p.conjugate())
        for V in coordinate_subspaces(n):
            assert transversality_defect(tangents, p, V) == dimension_defect(d, V)


def test_defect_monotone_in_exponents():
    rng = rng_for(21)
    for _ in range(40):
        d = random_datum(rng)
        j = int(rng.integers(0, d.m))
        bigger = list(d.exponents.values)
        bigger[j] = bigger[j] * 2
        e = BLDatum(d.n, d.maps, bigger)
        assert scaling_defect(e) <= scaling_defect(d)
        for V in coordinate_subspaces(d.n):
            assert dimension_defect(e, V) <= dimension_defect(d, V)
