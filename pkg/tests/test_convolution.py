import math

import numpy as np
import pytest

from bltk.experiments.convolution import MCConfig, NonTransversalError, convolution_density, surface_norm, verify_C
from bltk.manifold import ManifoldCollection, builtin_collections, linear_patch, sphere_cap

FAST = MCConfig(points=2**10, replicates=6)


def segments(theta):
    direction = [math.cos(theta), math.sin(theta)]
    return ManifoldCollection([linear_patch([[1, 0]]), linear_patch([direction])], ["inf", "inf"])


@pytest.mark.parametrize("theta", [math.pi / 2, math.pi / 3, math.pi / 6])
def test_transverse_segments(theta):
    a = 0.1 * np.array([1.0, 0.0]) + 0.05 * np.array([math.cos(theta), math.sin(theta)])
    est = convolution_density(segments(theta), a, sampler=FAST)
    assert abs(est.value * abs(math.sin(theta)) - 1) <= 0.02
    assert est.ci_low <= est.value <= est.ci_high


def test_parallel_segments_are_rejected():
    mc = ManifoldCollection([linear_patch([[1, 0]]), linear_patch([[1, 0]])], ["inf", "inf"])
    with pytest.raises(NonTransversalError, match="non-transversal configuration"):
        convolution_density(mc, [0.1, 0.0], sampler=FAST)


def test_point_off_the_sum_set_has_zero_density():
    est = convolution_density(segments(math.pi / 2), [3.0, 3.0], sampler=FAST)
    assert est.value == 0.0


def test_same_seed_gives_identical_estimates():
    mc = builtin_collections()["orthogonal_circle_caps"]
    a = np.array(mc.charts[0].eval([0.05])) + np.array(mc.charts[1].eval([-0.02]))
    one = convolution_density(mc, a, sampler=FAST)
    two = convolution_density(mc, a, sampler=FAST)
    assert one.value == two.value and one.ladder == two.ladder
    other = convolution_density(mc, a, sampler=MCConfig(points=2**10, replicates=6, seed=1))
    assert other.value != one.value
    assert other.value == pytest.approx(one.value, rel=0.02)


def three_line_oracle(a):
    """√2 times the length of the t3 interval where both remaining parameters fit in [-1/2, 1/2]."""
    lo = max(-0.5, a[0] - 0.5, a[1] - 0.5)
    hi = min(0.5, a[0] + 0.5, a[1] + 0.5)
    return math.sqrt(2) * max(hi - lo, 0.0)


@pytest.mark.parametrize("a", [(0.1, -0.2), (0.0, 0.0), (0.3, 0.25), (-0.6, 0.4)])
def test_three_lines_match_interval_oracle(a):
    mc = builtin_collections()["three_lines"]
    est = convolution_density(mc, a, sampler=FAST)
    assert est.value == pytest.approx(three_line_oracle(a), rel=0.02)


def test_single_full_dimensional_patch():
    mc = ManifoldCollection([linear_patch([[1, 0], [0, 1]])], ["1"])
    est = convolution_density(mc, [0.1, -0.3], sampler=FAST)
    assert est.value == pytest.approx(1.0, rel=1e-9)
    g = lambda pts: 1.0 + pts[:, 0]  # noqa: E731
    est = convolution_density(mc, [0.1, -0.3], [g], FAST)
    assert est.value == pytest.approx(1.1, rel=1e-5)


def test_surface_norm_of_an_arc():
    cap = sphere_cap(2)
    # the cap spans the angle 4 arctan(1/4) of the unit circle
    assert surface_norm(cap, None, 1) == pytest.approx(4 * math.atan(0.25), rel=1e-3)
    assert surface_norm(cap, None, "inf") == 1.0


def test_verify_C_on_three_lines():
    rep = verify_C(builtin_collections()["three_lines"], trials=4)
    assert rep.passed
    assert math.isfinite(rep.notes["sup_ratio"])


def test_verify_C_rejects_degenerate_pairs():
    with pytest.raises(NonTransversalError):
        verify_C(builtin_collections()["identical_lines"], trials=2)
