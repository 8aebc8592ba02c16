import math
import warnings
from fractions import Fraction

import pytest

from bltk.datum import (
    INF,
    BLDatum,
    ExponentVector,
    InvalidDatumError,
    NonInjectiveJointMapWarning,
    SubspaceDatum,
    conjugate_exponent,
    dual,
    hoelder_datum,
    loomis_whitney_datum,
    scaling_defect,
    sharp_young_value,
    to_subspace_form,
    validate,
    young_datum,
)
from bltk.linalg import Matrix, Subspace, orthogonal_complement

from generators import random_datum, rng_for


def test_validate_examples():
    validate(hoelder_datum(2, [2, 2]))
    validate(loomis_whitney_datum(3, [2, 2, 2]))
    bad = BLDatum(2, [Matrix.zeros(1, 2), Matrix.identity(2)], [2, 2])
    with pytest.raises(InvalidDatumError, match="map 1 not surjective"):
        validate(bad)


def test_exponent_below_one_rejected():
    with pytest.raises(InvalidDatumError):
        ExponentVector(["1/2"])


def test_conjugation_is_an_involution():
    assert conjugate_exponent(Fraction(1)) == INF
    assert conjugate_exponent(INF) == 1
    assert conjugate_exponent(Fraction(2)) == 2
    p = ExponentVector(["1", "3/2", "inf", "7"])
    assert p.conjugate().conjugate() == p
    for a, b in zip(p.reciprocals(), p.conjugate().reciprocals()):
        assert a + b == 1


def test_scaling_defect_examples():
    assert scaling_defect(loomis_whitney_datum(3, [2, 2, 2])) == 0
    assert scaling_defect(hoelder_datum(2, [2, 2])) == 0
    assert scaling_defect(loomis_whitney_datum(3, [3, 3, 3])) == -1


def test_subspace_form_examples():
    sd = to_subspace_form(hoelder_datum(2, [1]))
    assert sd.H == Subspace.full(2)
    lw = to_subspace_form(loomis_whitney_datum(3, [2, 2, 2]))
    assert lw.block_dims == (2, 2, 2) and lw.H.dim == 3
    # (x2, x3, x1, x3, x1, x2) as columns per x_i
    expect = Subspace(Matrix.exact([[0, 1, 0], [0, 0, 1], [1, 0, 0], [0, 0, 1], [1, 0, 0], [0, 1, 0]]))
    assert lw.H == expect
    assert to_subspace_form(hoelder_datum(1, [2, 2])).H == Subspace.span([(1, 1)], 2)


def test_non_injective_joint_map_is_flagged():
    d = BLDatum(2, [Matrix.exact([[1, 0]])], [1])
    with pytest.warns(NonInjectiveJointMapWarning):
        sd = to_subspace_form(d)
    assert sd.H.dim == 1


def test_dual_of_diagonal():
    sd = SubspaceDatum((1, 1), Subspace.span([(1, 1)], 2), [1, 1])
    dd = dual(sd)
    assert dd.H == Subspace.span([(1, -1)], 2)
    assert dd.exponents.values == (INF, INF)
    assert dual(dd) == sd


def test_dual_involution_on_random_data():
    rng = rng_for(3)
    for _ in range(50):
        d = random_datum(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonInjectiveJointMapWarning)
            sd = to_subspace_form(d)
        assert dual(dual(sd)) == sd
        assert dual(sd).H == orthogonal_complement(sd.H)


def test_subspace_form_defect_matches_scaling_defect():
    rng = rng_for(4)
    checked = 0
    while checked < 40:
        d = random_datum(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("error", NonInjectiveJointMapWarning)
            try:
                sd = to_subspace_form(d)
            except NonInjectiveJointMapWarning:
                continue
        assert sd.H.dim == d.n
        assert sd.scaling_defect() == scaling_defect(d)
        checked += 1


def test_json_round_trips():
    d = young_datum()
    assert BLDatum.from_json(d.to_json()) == d
    sd = to_subspace_form(d)
    assert SubspaceDatum.from_json(sd.to_json()) == sd
    with pytest.raises(ValueError, match="missing field"):
        BLDatum.from_json({"n": 2, "maps": []})


def test_sharp_young_closed_form():
    assert math.isclose(sharp_young_value(["3/2"] * 3), math.sqrt(3) / 2, rel_tol=1e-15)
    assert sharp_young_value(["1", "inf", "1"]) == 1.0
