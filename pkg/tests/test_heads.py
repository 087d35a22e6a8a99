import math

import numpy as np
import pytest

from jointsurv import autodiff as ad
from jointsurv import heads
from jointsurv.autodiff import Node, finite_difference_check
from jointsurv.heads import (BaselineHazard, MonotoneHazardHead, SurvivalEstimate,
                             breslow_baseline, cox_partial_nll, longitudinal_nll,
                             missingness_nll, survival_curve)


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Gaussian head loss


def test_gaussian_nll_standard_normal_at_mode():
    nll = longitudinal_nll(Node([0.0]), Node([1.0]), [0.0], [1.0])
    assert nll.item() == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-9)


def test_gaussian_nll_fully_masked_is_zero():
    nll = longitudinal_nll(Node([3.0, -1.0]), Node([0.5, 2.0]),
                           [100.0, -40.0], [0.0, 0.0])
    assert nll.item() == 0.0


def test_gaussian_nll_unit_offset():
    nll = longitudinal_nll(Node([0.0]), Node([1.0]), [1.0], [1.0])
    assert nll.item() == pytest.approx(0.5 + 0.5 * math.log(2 * math.pi), abs=1e-9)


def test_gaussian_nll_invariant_to_masked_values():
    mu = Node([0.2, -0.3, 1.0])
    sigma = Node([1.0, 0.7, 2.0])
    mask = [1.0, 0.0, 1.0]
    a = longitudinal_nll(mu, sigma, [0.5, 123.0, -0.4], mask).item()
    b = longitudinal_nll(mu, sigma, [0.5, -999.0, -0.4], mask).item()
    assert a == b


def test_gaussian_nll_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        longitudinal_nll(Node([0.0]), Node([0.0]), [0.0], [1.0])


# ---------------------------------------------------------------------------
# Bernoulli head loss


def test_missingness_nll_maximal_entropy():
    assert missingness_nll(Node([0.5]), [1.0]).item() == pytest.approx(math.log(2))


def test_missingness_nll_perfect_prediction():
    assert missingness_nll(Node([1 - 1e-12]), [1.0]).item() == pytest.approx(0.0, abs=1e-9)


def test_missingness_nll_hand_value():
    nll = missingness_nll(Node([0.9, 0.2]), [1.0, 0.0])
    assert nll.item() == pytest.approx(-(math.log(0.9) + math.log(0.8)), abs=1e-9)


def test_missingness_nll_rejects_boundary_probs():
    with pytest.raises(ValueError):
        missingness_nll(Node([1.0]), [1.0])


# ---------------------------------------------------------------------------
# monotone hazard head


def _frozen_head(slope):
    """Linear head with cumulative hazard slope*t regardless of embedding."""
    head = MonotoneHazardHead(rng(), embed_dim=2, hidden_layers=0, hidden_nodes=1)
    head.wt_free.value = np.array([[math.sqrt(slope)]])
    head.wh.value = np.zeros((2, 1))
    return head


def test_cumulative_hazard_zero_at_origin_exactly():
    head = MonotoneHazardHead(rng(1), embed_dim=3, hidden_layers=2, hidden_nodes=5)
    h = Node(rng(2).normal(size=(4, 3)))
    lam = head.cumulative_hazard(h, Node(np.zeros((4, 1))))
    assert np.array_equal(lam.value, np.zeros(4))


def test_cumulative_hazard_monotone_and_bounded_survival():
    for draw in range(25):
        head = MonotoneHazardHead(rng(draw), embed_dim=2,
                                  hidden_layers=draw % 3, hidden_nodes=4)
        h = Node(rng(100 + draw).normal(size=(1, 2)))
        grid = np.linspace(0.0, 30.0, 100)
        values = np.array([head.cumulative_hazard(h, Node([[t]])).item() for t in grid])
        assert np.all(np.diff(values) >= -1e-12)
        surv = np.exp(-values)
        assert np.all((surv > 0) & (surv <= 1.0))
        lam = np.array([head.intensity(h, Node([[t]])).item() for t in grid])
        assert np.all(lam >= 0)


def test_cumulative_hazard_rejects_negative_time():
    head = _frozen_head(1.0)
    with pytest.raises(ValueError):
        head.cumulative_hazard(Node(np.zeros((1, 2))), Node([[-0.1]]))


def test_tpp_nll_unit_rate():
    head = _frozen_head(1.0)
    nll = head.nll_rows(Node(np.zeros((1, 2))), Node([[1.0]]))
    assert nll.item() == pytest.approx(1.0, abs=1e-12)


def test_tpp_nll_rate_two():
    head = _frozen_head(2.0)
    nll = head.nll_rows(Node(np.zeros((1, 2))), Node([[0.5]]))
    assert nll.item() == pytest.approx(1.0 - math.log(2.0), abs=1e-12)


def test_tpp_nll_rejects_nonpositive_gap():
    head = _frozen_head(1.0)
    with pytest.raises(ValueError):
        head.nll_rows(Node(np.zeros((1, 2))), Node([[0.0]]))


def test_tpp_gradient_matches_finite_differences():
    head = MonotoneHazardHead(rng(5), embed_dim=3, hidden_layers=2, hidden_nodes=4)
    h = Node(rng(6).normal(size=(3, 3)))
    gaps = Node(rng(7).uniform(0.5, 4.0, size=(3, 1)))

    def loss():
        return ad.total_sum(head.nll_rows(h, gaps))

    report = finite_difference_check(loss, head.parameters())
    assert report.max_rel_error < 1e-3


# ---------------------------------------------------------------------------
# Cox partial likelihood


def test_cox_singleton_event():
    assert cox_partial_nll(Node([0.0]), [1.0], [1]).item() == pytest.approx(0.0)


def test_cox_two_subjects_hand_value():
    nll = cox_partial_nll(Node([0.0, 0.0]), [1.0, 2.0], [1, 1])
    assert nll.item() == pytest.approx(math.log(2.0), abs=1e-12)


def test_cox_shift_invariance():
    scores = rng(8).normal(size=12)
    times = rng(9).uniform(0.5, 10, size=12)
    events = (rng(10).uniform(size=12) < 0.6).astype(int)
    events[0] = 1
    a = cox_partial_nll(Node(scores), times, events).item()
    b = cox_partial_nll(Node(scores + 7.3), times, events).item()
    assert abs(a - b) < 1e-10


def test_cox_permutation_invariance():
    scores = rng(11).normal(size=10)
    times = rng(12).uniform(0.5, 10, size=10)
    events = (rng(13).uniform(size=10) < 0.5).astype(int)
    events[3] = 1
    perm = rng(14).permutation(10)
    a = cox_partial_nll(Node(scores), times, events).item()
    b = cox_partial_nll(Node(scores[perm]), times[perm], events[perm]).item()
    assert a == pytest.approx(b, abs=1e-10)


def test_cox_all_censored_warns_and_returns_zero():
    with pytest.warns(UserWarning):
        out = cox_partial_nll(Node([0.5, -0.2]), [1.0, 2.0], [0, 0])
    assert out.item() == 0.0


def test_cox_rejects_nonpositive_times():
    with pytest.raises(ValueError):
        cox_partial_nll(Node([0.0]), [0.0], [1])


# ---------------------------------------------------------------------------
# Breslow baseline and survival curves


def test_breslow_single_event_jump():
    base = breslow_baseline(np.zeros(2), [1.0, 2.0], [1, 0])
    assert base.cumulative(0.5) == 0.0
    assert base.cumulative(1.0) == pytest.approx(0.5)
    assert base.cumulative(5.0) == pytest.approx(0.5)


def test_breslow_no_events_is_zero():
    base = breslow_baseline(np.zeros(3), [1.0, 2.0, 3.0], [0, 0, 0])
    assert base.cumulative(10.0) == 0.0


def test_breslow_nondecreasing():
    r = rng(15)
    base = breslow_baseline(r.normal(size=30), r.uniform(0.5, 10, 30),
                            (r.uniform(size=30) < 0.5).astype(int))
    grid = np.linspace(0, 12, 50)
    assert np.all(np.diff(base.cumulative(grid)) >= 0)


def test_survival_curve_values():
    base = BaselineHazard(times=np.array([1.0]), values=np.array([0.5]))
    est = SurvivalEstimate(risk_score=0.0, baseline=base)
    s = survival_curve(est, [0.0, 2.0])
    assert s[0] == 1.0
    assert s[1] == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_survival_curve_extreme_risk_goes_to_zero():
    base = BaselineHazard(times=np.array([1.0]), values=np.array([0.5]))
    est = SurvivalEstimate(risk_score=40.0, baseline=base)
    assert survival_curve(est, [2.0])[0] == pytest.approx(0.0, abs=1e-12)


def test_survival_curve_monotone_in_horizon():
    r = rng(16)
    base = breslow_baseline(r.normal(size=20), r.uniform(0.5, 10, 20),
                            np.ones(20, dtype=int))
    est = SurvivalEstimate(risk_score=float(r.normal()), baseline=base)
    s = survival_curve(est, np.linspace(0, 15, 40))
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(np.diff(s) <= 1e-15)
