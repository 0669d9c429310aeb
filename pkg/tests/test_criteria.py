import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chisup import criteria as Cr
from chisup.errors import ParameterError, PreconditionError
from chisup.paths import bridge_model, custom_model, fbm_model
from chisup.weights import FbmPlateau, RhoLogLog


@given(st.floats(0.001, 0.999), st.sampled_from(["bridge", "fbm"]))
@settings(max_examples=60, deadline=None)
def test_f_roundtrip(t, kind):
    m = bridge_model() if kind == "bridge" else fbm_model(0.4)
    assert Cr.f_inverse(m, Cr.f_transform(m, t)) == pytest.approx(t, rel=1e-12)


def test_f_transform_is_integral_of_C():
    m = bridge_model()
    # bridge: C^{1/alpha} = 1/(2t(1-t)) integrates to atanh(2t-1)/... = 0.5 log(t/(1-t))
    assert Cr.f_transform(m, 0.8) == pytest.approx(0.5 * math.log(4.0))
    bm = bridge_model()
    cm = custom_model(bm.corr, bm.C, bm.K, 1.0, bm.q)
    assert Cr.f_transform(cm, 0.8) == pytest.approx(0.5 * math.log(4.0), rel=1e-10)
    assert Cr.f_inverse(cm, 0.5 * math.log(4.0)) == pytest.approx(0.8, rel=1e-10)


def test_boundaries():
    assert Cr.f_boundary(bridge_model(), 1) == math.inf
    assert Cr.f_boundary(bridge_model(), 0) == -math.inf
    assert math.isfinite(Cr.f_boundary(fbm_model(0.5), 1))
    with pytest.raises(ParameterError):
        Cr.f_boundary(bridge_model(), 2)


def test_partition_bridge_images():
    parts = Cr.partition(bridge_model(), 0.5, 1, 6)
    assert [p.j for p in parts] == list(range(1, 7))
    for p in parts:
        assert Cr.f_transform(bridge_model(), p.hi) == pytest.approx(p.f_hi, abs=1e-12)
        assert p.gap_hi == pytest.approx(1 - p.hi, rel=1e-9)
    left = Cr.partition(bridge_model(), 0.5, 0, 3)
    assert left[0].f_hi == 0.0 and left[-1].f_lo == -1.5


def test_partition_fbm_right_end_rejected():
    with pytest.raises(PreconditionError):
        Cr.partition(fbm_model(0.5), 0.5, 1, 4)
    with pytest.raises(PreconditionError):
        Cr.eval_J(fbm_model(0.5), FbmPlateau(1.0, 0.1), 1, 1.0)


def test_fbm_left_end_usable():
    assert len(Cr.partition(fbm_model(0.5), 0.5, 0, 4)) == 4


@pytest.mark.parametrize("r1, r2, k, expected", [
    (1.25, 0.0, 1, "finite"),
    (1.0, 0.0, 1, "divergent"),
    (1.0, 3.0, 3, "finite"),
    (0.5, 0.0, 2, "divergent"),
])
def test_eval_I_classification(r1, r2, k, expected):
    v = Cr.eval_I(bridge_model(), RhoLogLog(r1, r2), 1, k)
    assert v.classification == expected
    if expected == "finite":
        assert math.isfinite(v.integral_value) and v.integral_value > 0


def test_eval_J_constant_weight_diverges():
    # w = 1 has no decay: the f-length of [1/2, 1) is infinite
    v = Cr.eval_J(bridge_model(), lambda t: 1.0, 1, 1.0)
    assert v.classification == "divergent"


def test_eval_parameter_checks():
    with pytest.raises(ParameterError):
        Cr.eval_I(bridge_model(), RhoLogLog(1, 0), 1, 0)
    with pytest.raises(ParameterError):
        Cr.eval_J(bridge_model(), RhoLogLog(1, 0), 1, 0.0)


def test_condition_A():
    Cr.check_condition_A(bridge_model(), RhoLogLog(1.0, 0.0), 1)
    with pytest.raises(PreconditionError):
        Cr.check_condition_A(bridge_model(), lambda t: 2.0, 1)


def test_finiteness_verdict_builtin():
    r = Cr.finiteness_verdict(bridge_model(), RhoLogLog(1.0, 0.0), 1)
    assert r.verdict == "as_finite" and r.c is not None


def test_truncation_trace_monotone():
    v = Cr.eval_I(bridge_model(), RhoLogLog(1.0, 0.0), 1, 2)
    vals = [val for _, val in v.truncation_trace]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert v.table()[0][2] == v.classification


def test_conditions_BC_bridge():
    rep = Cr.check_conditions_BC(bridge_model(), 0.5, range(1, 12))
    lo, hi = rep.ratio_bounds
    assert lo > 0 and math.isfinite(hi)
    assert rep.decay_ok and rep.decay_slope < 0
    assert rep.flags == []


def test_conditions_BC_flags_constant_correlation():
    # correlation floor 1/2 between distant points: no cross-interval decay
    bm = bridge_model()
    base = bm.corr_f
    flat = dataclasses.replace(bm, corr_f=lambda x, y: 0.5 + 0.5 * base(x, y))
    rep = Cr.check_conditions_BC(flat, 0.5, range(1, 31))
    assert not rep.decay_ok
    assert any("does not decay" in f for f in rep.flags)
