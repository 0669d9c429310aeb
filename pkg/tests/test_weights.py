import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chisup.errors import ClassificationError, DomainError, ParameterError
from chisup.weights import (F1, F2, L0, X_MIN, CustomWeight, FbmPlateau, RhoLogLog, classify,
                            corollary34_constants, make_weight, rho_case, taylor_fit)


def test_constants():
    assert L0 == pytest.approx(2 + math.log(4))
    assert X_MIN == pytest.approx(1.2197362146989899)


def test_rho_loglog_positivity_range():
    RhoLogLog(1.0, -2.7)
    with pytest.raises(ParameterError):
        RhoLogLog(1.0, -2.72)
    with pytest.raises(ParameterError):
        RhoLogLog(0.0, 1.0)


def test_cases():
    assert rho_case(1.0, 0.0) == "a"
    assert rho_case(1.0, -X_MIN) == "b"
    assert RhoLogLog.boundary(2.0).rho2 == pytest.approx(-2 * X_MIN)
    assert rho_case(1.0, -1.5) == "c"


@given(st.floats(0.2, 3.0), st.floats(-0.5, 3.0))
@settings(max_examples=40, deadline=None)
def test_case_a_minimum_at_half(r1, r2):
    w = RhoLogLog(r1, r2 * r1)
    t = np.linspace(0.01, 0.99, 981)
    assert np.argmin(w.w2(t)) == 490
    d = corollary34_constants(w.rho1, w.rho2)
    assert d.w_min == pytest.approx(math.sqrt(float(w.w2(0.5))), rel=1e-12)


@pytest.mark.parametrize("r1, r2", [(1.0, -1.5), (2.0, -4.0), (1.0, -2.5)])
def test_case_c_minimizers(r1, r2):
    w = RhoLogLog(r1, r2)
    d = corollary34_constants(r1, r2)
    t2, t1 = d.t_points
    assert t1 + t2 == pytest.approx(1.0, abs=1e-12)
    # w^2 at the minimizers equals 2 A2 and lies below neighbours
    assert float(w.w2(t1)) == pytest.approx(2 * d.A, rel=1e-10)
    for t in (t1, t2):
        for h in (1e-3 * min(t, 1 - t), -1e-3 * min(t, 1 - t)):
            assert float(w.w2(t + h)) > float(w.w2(t))


def test_excess_matches_direct_difference():
    w = RhoLogLog(1.3, 0.4)
    for h in (1e-2, -3e-2, 0.1):
        direct = float(w.w(0.5 + h)) - float(w.w(0.5))
        assert w.excess(0.5, h)[0] == pytest.approx(direct, rel=1e-9)


def test_taylor_fit_recovers_constants():
    for r1, r2 in [(1.0, 0.0), (1.0, -X_MIN), (1.0, -1.5)]:
        d = corollary34_constants(r1, r2)
        a, beta = taylor_fit(RhoLogLog(r1, r2), d.t_points[-1])
        assert beta == pytest.approx(d.beta, rel=1e-3)
        assert a == pytest.approx(d.taylor_coeff, rel=1e-3)


def test_classify_builtins():
    f1 = classify(RhoLogLog(1.0, -1.5))
    assert isinstance(f1, F1) and f1.m == 2 and f1.beta == 2.0
    f2 = classify(FbmPlateau(1.0, 0.1))
    assert isinstance(f2, F2) and f2.intervals == ((0.1, 1.0),)
    assert f2.w_min == pytest.approx(math.sqrt(math.log(2 + math.log(10))))


def test_fbm_plateau_domain():
    w = FbmPlateau(1.0, 0.1)
    assert float(w.w2(1.0)) == pytest.approx(w.w2_min)
    assert float(w.w2(0.01)) > w.w2_min
    with pytest.raises(DomainError):
        w.w2(0.0)


def test_custom_weight_classifier():
    w = CustomWeight(lambda t: 1.0 + 3.0 * abs(t - 0.4) ** 1.5)
    cls = classify(w)
    (m,) = cls.minimizers
    assert m.t == pytest.approx(0.4, abs=1e-6)
    assert m.beta == pytest.approx(1.5, rel=1e-2)
    assert m.a == pytest.approx(3.0, rel=1e-2)


def test_custom_weight_two_minimizers():
    w = CustomWeight(lambda t: 2.0 + (t - 0.25) ** 2 * (t - 0.75) ** 2)
    cls = classify(w)
    assert [round(m.t, 5) for m in cls.minimizers] == [0.25, 0.75]
    assert all(m.beta == pytest.approx(2.0, rel=1e-2) for m in cls.minimizers)


def test_custom_weight_boundary_minimum_rejected():
    with pytest.raises(ClassificationError):
        classify(CustomWeight(lambda t: 1.0 + t))


def test_custom_plateau_hint():
    w = CustomWeight(lambda t: 1.0 + max(0.0, 0.3 - t), closed_right=True, hints={"plateaus": [(0.3, 1.0)]})
    cls = classify(w)
    assert isinstance(cls, F2) and cls.w_min == 1.0
    bad = CustomWeight(lambda t: 1.0 + t, hints={"plateaus": [(0.3, 0.6)]})
    with pytest.raises(ClassificationError):
        classify(bad)


def test_f2_rejects_overlap():
    with pytest.raises(ClassificationError):
        F2(((0.1, 0.5), (0.4, 0.9)), 1.0)


def test_make_weight():
    assert make_weight("rho-loglog", rho1=2, rho2=1) == RhoLogLog(2.0, 1.0)
    with pytest.raises(ParameterError):
        make_weight("square")
