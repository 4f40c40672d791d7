import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growthfront.errors import DomainError, ExtrapolationError, InsufficientDataError
from growthfront.metric import SurfaceMetric, check_assumptions, conformal_classify, eval_G

EUC = SurfaceMetric.euclidean()
HYP = SurfaceMetric.hyperbolic()
PROBE = np.geomspace(1e-3, 20.0, 200)


def test_eval_G_examples():
    assert eval_G(EUC, 2.0) == 2.0
    assert eval_G(HYP, 0.0) == 0.0
    oracle = float(mpmath.sinh(mpmath.mpf(1)))
    assert eval_G(HYP, 1.0) == pytest.approx(oracle, rel=1e-15)
    assert oracle == pytest.approx(1.1752011936438014, rel=1e-15)


def test_scaled_hyperbolic_closed_form():
    m = SurfaceMetric.scaled_hyperbolic(4.0)
    assert eval_G(m, 0.7) == pytest.approx(math.sinh(1.4) / 2.0, rel=1e-15)


def test_negative_radius_rejected():
    with pytest.raises(DomainError):
        eval_G(EUC, -0.1)


def test_builtin_kinds_match_closed_forms_at_random_points():
    rng = np.random.default_rng(7)
    r = rng.uniform(0.0, 50.0, 10_000)
    np.testing.assert_array_equal(eval_G(EUC, r), r)
    np.testing.assert_allclose(eval_G(HYP, r), np.sinh(r), rtol=4e-16)
    for kappa in (0.25, 1.0, 4.0):
        s = math.sqrt(kappa)
        m = SurfaceMetric.scaled_hyperbolic(kappa)
        np.testing.assert_allclose(eval_G(m, r), np.sinh(s * r) / s, rtol=4e-16)


def test_derivatives_of_builtins():
    r = np.linspace(0.1, 5, 17)
    np.testing.assert_allclose(HYP.G_prime(r), np.cosh(r), rtol=1e-15)
    np.testing.assert_allclose(HYP.G_double_prime(r), np.sinh(r), rtol=1e-15)
    np.testing.assert_allclose(HYP.curvature(r), -1.0, rtol=1e-15)
    np.testing.assert_array_equal(EUC.curvature(r), 0.0)


def test_assumptions_euclidean_and_hyperbolic():
    for m in (EUC, HYP):
        rep = check_assumptions(m, PROBE)
        assert rep.positivity_ok and rep.origin_limit_ok and rep.nonpositive_curvature_ok


@pytest.mark.parametrize("kappa", [0.25, 1.0, 4.0])
def test_assumptions_scaled_hyperbolic(kappa):
    rep = check_assumptions(SurfaceMetric.scaled_hyperbolic(kappa), PROBE)
    assert rep.nonpositive_curvature_ok
    assert rep.max_curvature == pytest.approx(-kappa, rel=1e-9)


def test_tabulated_sine_has_positive_curvature():
    r = np.linspace(0.01, math.pi - 0.01, 400)
    m = SurfaceMetric.tabulated(r, np.sin(r))
    rep = check_assumptions(m, np.linspace(0.2, 2.9, 50))
    assert not rep.nonpositive_curvature_ok
    # K = -G''/G = +1 for G = sin
    assert rep.max_curvature == pytest.approx(1.0, abs=5e-3)
    assert rep.positivity_ok


def test_tabulated_too_few_samples():
    m = SurfaceMetric.tabulated([0.5, 1.0], [0.5, 1.0])
    with pytest.raises(InsufficientDataError):
        check_assumptions(m, [0.5])


def test_tabulated_extrapolation_rules():
    r = np.linspace(0.1, 5.0, 50)
    unknown = SurfaceMetric.tabulated(r, r)
    with pytest.raises(ExtrapolationError):
        eval_G(unknown, 6.0)
    lin = SurfaceMetric.tabulated(r, r, tail="divergent")
    assert eval_G(lin, 8.0) == pytest.approx(8.0, rel=1e-6)


def test_tabulated_reproduces_samples(tmp_path):
    r = np.linspace(0.05, 4.0, 80)
    path = tmp_path / "g.csv"
    path.write_text("r,G\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(r, np.sinh(r))) + "\n")
    m = SurfaceMetric.from_csv(path, tail="convergent")
    np.testing.assert_allclose(eval_G(m, r), np.sinh(r), rtol=1e-14)
    mid = 0.5 * (r[:-1] + r[1:])
    np.testing.assert_allclose(eval_G(m, mid), np.sinh(mid), rtol=1e-4)


def test_conformal_euclidean_example():
    rep = conformal_classify(EUC, 100.0)
    assert rep.classification == "parabolic"
    assert rep.I_partial == pytest.approx(math.log(100.0), abs=1e-9)


def test_conformal_sinh_example_two_routes():
    rep = conformal_classify(HYP, 50.0)
    assert rep.classification == "hyperbolic"
    closed = -math.log(math.tanh(0.5))
    quad = float(mpmath.quad(lambda x: 1 / mpmath.sinh(x), [1, 50]))
    assert rep.I_partial == pytest.approx(closed, abs=1e-9)
    assert rep.I_partial == pytest.approx(quad, abs=1e-9)


def test_conformal_tabulated_without_tail():
    r = np.linspace(0.1, 10, 100)
    rep = conformal_classify(SurfaceMetric.tabulated(r, r), 5.0)
    assert rep.classification == "inconclusive"


def test_conformal_rejects_small_cut():
    with pytest.raises(DomainError):
        conformal_classify(EUC, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(0.0, 200.0))
def test_conformal_monotone_and_stable(r1, extra):
    r2 = r1 + extra
    for m, label in ((EUC, "parabolic"), (HYP, "hyperbolic")):
        a = conformal_classify(m, r1)
        b = conformal_classify(m, r2)
        assert a.classification == b.classification == label
        assert b.I_partial >= a.I_partial


@settings(max_examples=30, deadline=None)
@given(st.floats(0.25, 4.0))
def test_scaled_hyperbolic_is_hyperbolic(kappa):
    m = SurfaceMetric.scaled_hyperbolic(kappa)
    assert conformal_classify(m, 10.0).classification == "hyperbolic"
    assert check_assumptions(m, PROBE).all_ok
