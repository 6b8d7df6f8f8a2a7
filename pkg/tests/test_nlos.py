import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from uwb_ranger.errors import DimError, FitError, InputError
from uwb_ranger.nlos import (
    ProjectionClassifier,
    RiseTimeClassifier,
    classify_projection,
    classify_rise_time,
    fit_projection_classifier,
    hard_labels,
    misclassification_rate,
    overlap_metric,
)
from uwb_ranger.records import Hypothesis, SoftDecision


def test_rise_time_examples():
    c = RiseTimeClassifier(0.333, 0.075, 0.5)
    assert classify_rise_time(c, 0.0).p_los == pytest.approx(0.333 / 0.408, rel=1e-12)
    assert classify_rise_time(RiseTimeClassifier(prior_los=1.0), 50.0).p_los == 1.0
    for t in (0.0, 3.0, 40.0):
        assert classify_rise_time(RiseTimeClassifier(0.2, 0.2, 0.3), t).p_los == pytest.approx(0.3)


def test_rise_time_long_tail_favours_nlos():
    c = RiseTimeClassifier()
    assert classify_rise_time(c, 30.0).hard is Hypothesis.NLOS
    assert classify_rise_time(c, 1.0).hard is Hypothesis.LOS
    # Huge rise times must not underflow to nan.
    assert classify_rise_time(c, 1e5).p_los == 0.0


def test_rise_time_fit():
    r = np.random.default_rng(0)
    lab = np.r_[np.zeros(20000, bool), np.ones(20000, bool)]
    t = np.r_[r.exponential(1 / 0.333, 20000), r.exponential(1 / 0.075, 20000)]
    c = RiseTimeClassifier.fit(t, lab)
    assert c.lambda_los == pytest.approx(0.333, rel=0.03)
    assert c.lambda_nlos == pytest.approx(0.075, rel=0.03)
    with pytest.raises(FitError):
        RiseTimeClassifier.fit(t[:5], np.zeros(5, bool))
    with pytest.raises(InputError):
        c.p_los_many([-1.0])


def test_fit_projection_two_point_stats():
    y = np.array([[0.0, 1.0], [2.0, 1.5], [5.0, 0.0], [7.0, 3.0]])
    c = fit_projection_classifier(y, [False, False, True, True], m_prime=1)
    assert c.mu_los[0] == pytest.approx(1.0) and c.sigma_los[0] == pytest.approx(math.sqrt(2))
    assert c.m_prime == 1
    with pytest.raises(FitError):
        fit_projection_classifier(y, [False, True, True, True], 1)
    with pytest.raises(DimError):
        fit_projection_classifier(y, [False, False, True, True], 3)


def test_projection_examples():
    c = ProjectionClassifier([0.0], [1.0], [2.0], [1.0])
    assert classify_projection(c, np.array([1.0])).p_los == pytest.approx(0.5, abs=1e-15)
    sep = ProjectionClassifier([0.0], [1.0], [10.0], [1.0])
    assert classify_projection(sep, np.array([0.0])).p_los > 0.999
    assert classify_projection(ProjectionClassifier([0.0], [1.0], [2.0], [1.0], prior_los=0.0),
                               np.array([0.0])).p_nlos == 1.0
    same = ProjectionClassifier([0.0, 0.0], [1.0, 2.0], [1.0, 0.0], [1.0, 2.0])
    one = ProjectionClassifier([0.0], [1.0], [1.0], [1.0])
    for y in (-3.0, 0.2, 4.0):
        assert same.classify(np.array([y, 7.0])).p_los == pytest.approx(one.classify(np.array([y])).p_los)
    with pytest.raises(DimError):
        c.p_los_many(np.zeros((2, 0)))


@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.2, 3), st.floats(-3, 3), st.floats(0.2, 3), st.floats(0.05, 0.95))
@settings(max_examples=100)
def test_single_component_bayes_rule(y, mu_l, s_l, mu_n, s_n, prior):
    c = ProjectionClassifier([mu_l], [s_l], [mu_n], [s_n], prior)
    lo = norm.pdf(y, mu_l, s_l) * prior
    ln = norm.pdf(y, mu_n, s_n) * (1 - prior)
    d = c.classify(np.array([y]))
    assert d.p_los == pytest.approx(lo / (lo + ln), rel=1e-12, abs=1e-300)
    assert abs(d.p_los + d.p_nlos - 1) <= 1e-12


def test_log_space_handles_many_components():
    m = 20
    c = ProjectionClassifier(np.zeros(m), np.full(m, 1e-3), np.ones(m), np.full(m, 1e-3))
    p = c.p_los_many(np.full((1, m), 0.4))[0]
    assert p == pytest.approx(1.0) and np.isfinite(p)


def test_overlap_metric():
    assert overlap_metric(0, 1, 2, 1) == pytest.approx(0.5)
    assert overlap_metric(1, 1, 1, 1) == math.inf
    assert overlap_metric(0, 4, 2, 1) == pytest.approx(2 * overlap_metric(0, 1, 2, 1))
    assert overlap_metric(0, 4, 2, 4) == pytest.approx(4 * overlap_metric(0, 1, 2, 1))
    with pytest.raises(InputError):
        overlap_metric(0, 0, 1, 1)


def test_misclassification():
    labels = [Hypothesis.LOS, Hypothesis.NLOS, Hypothesis.NLOS]
    right = [SoftDecision(0.9, 0.1), SoftDecision(0.2, 0.8), SoftDecision(0.0, 1.0)]
    assert misclassification_rate(right, labels) == 0.0
    wrong = [SoftDecision(0.1, 0.9), SoftDecision(0.8, 0.2), SoftDecision(0.5, 0.5)]
    assert misclassification_rate(wrong, labels) == 1.0
    assert misclassification_rate([0.5], [False]) == 0.0
    assert hard_labels([0.5, 0.49]).tolist() == [False, True]
    assert SoftDecision(0.5, 0.5).hard is Hypothesis.LOS
    with pytest.raises(InputError):
        misclassification_rate([], [])
    with pytest.raises(DimError):
        misclassification_rate([0.1], [True, False])


def test_soft_decision_validation():
    with pytest.raises(ValueError):
        SoftDecision(0.6, 0.6)
    with pytest.raises(ValueError):
        SoftDecision(1.2, -0.2)


def test_serialization():
    c = ProjectionClassifier([0.0, 1.0], [1.0, 2.0], [3.0, -1.0], [0.5, 1.5], 0.4)
    back = ProjectionClassifier.from_dict(c.to_dict())
    y = np.random.default_rng(0).standard_normal((5, 2))
    assert np.array_equal(back.p_los_many(y), c.p_los_many(y))
    r = RiseTimeClassifier(0.3, 0.1, 0.6)
    assert RiseTimeClassifier.from_dict(r.to_dict()) == r
