import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weaktrace.fringe import (
    NotNestedError,
    analyze_tagged_inner,
    default_theta_grid,
    dv_inequality_sweep,
    which_path_dv,
)
from weaktrace.scenarios import mach_zehnder, nested
from weaktrace.weakvalue import coarse_grained_weak_value


def test_untagged_arms_fully_coherent():
    rep = analyze_tagged_inner(nested(), 0.0, 0.0)
    assert rep.distinguishability == pytest.approx(0, abs=1e-12)
    assert rep.visibility == pytest.approx(1)
    assert rep.leak_probability == pytest.approx(0, abs=1e-15)


def test_orthogonal_tags():
    rep = analyze_tagged_inner(nested(), math.pi, 0.0)
    assert rep.distinguishability == pytest.approx(1)
    assert rep.visibility == pytest.approx(0, abs=1e-12)
    assert rep.leak_probability == pytest.approx(0.5)


def test_leak_closed_form():
    # B's tag state overlaps C's by cos(theta/2); the inner exit gets (1 - cos(theta/2)) / 2
    for th in default_theta_grid(7):
        rep = analyze_tagged_inner(nested(), th, 0.0)
        assert rep.leak_probability == pytest.approx((1 - math.cos(th / 2)) / 2, abs=1e-12)


def test_needs_nested():
    with pytest.raises(NotNestedError):
        analyze_tagged_inner(mach_zehnder(), 0.1, 0.0)
    with pytest.raises(ValueError):
        dv_inequality_sweep([])


def test_equal_tags_keep_coarse_grained_zero():
    for th in (0.3, 1.0, math.pi):
        sc = nested(tag_b=th / 2, tag_c=th / 2)
        assert abs(coarse_grained_weak_value(["B", "C"], sc, "D2").value) < 1e-10


def test_mixed_weights():
    d, v = which_path_dv(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
    assert (d, v) == (1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_dv_inequality_saturated_for_pure_tags(tb, tc):
    rep = analyze_tagged_inner(nested(), tb, tc)
    assert rep.dv_sum <= 1 + 1e-10
    assert abs(rep.dv_sum - 1) < 1e-10
