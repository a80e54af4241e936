import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_series, random_curves
from regretbid.curves import ClickCurve, CostCurve, CurveArrays, HourlyCurveSet
from regretbid.errors import ZeroGradient
from regretbid.forecasters import (
    FittedRule,
    RuleKind,
    RuleOptions,
    br_bid,
    brreg_solve,
    brreg_step,
    fit_eta_ogd,
    fit_ogdbias,
    fit_rule,
    ftl_step,
    ftrl_step,
    golden_max,
    momentum_br_step,
    next_bid,
    ogd_step,
    ogd_train_mape,
    regress_eta,
    run_series,
    run_stepahead,
)
from regretbid.series import BidderSeries
from regretbid.utility import VisibilityParams, ql_gradient, ql_utility

CURVES = HourlyCurveSet(0, ClickCurve(0.4, 2.0), CostCurve(0.5))


def test_ogd_step_by_hand():
    rule = FittedRule(RuleKind.OGD, 3.0, eta=0.5, bid_max=100.0)
    g = ql_gradient(3.0, 0.4, 2.0, 0.5, 1.0)
    assert ogd_step(rule, 1.0, CURVES) == pytest.approx(1.0 + 0.5 * g)


def test_ogd_projects_onto_box():
    rule = FittedRule(RuleKind.OGD, 3.0, eta=1e6, bid_max=4.0)
    assert ogd_step(rule, 1.0, CURVES) == 4.0
    rule = FittedRule(RuleKind.OGD, 0.01, eta=1e6, bid_max=4.0)
    assert ogd_step(rule, 3.0, CURVES) == 0.0


def test_zero_eta_keeps_bid():
    for kind in (RuleKind.OGD, RuleKind.BRReg):
        rule = FittedRule(kind, 3.0, eta=0.0, bid_max=10.0)
        assert next_bid(rule, 1.7, CurveArrays.from_sets([CURVES]), 1) == 1.7


def test_momentum_is_midpoint():
    rule = FittedRule(RuleKind.MomentumBR, 3.0, bid_max=100.0)
    assert momentum_br_step(rule, 1.0, CURVES) == pytest.approx(0.5 * (1.0 + br_bid(3.0, CURVES, 100.0)))


@settings(max_examples=200, deadline=None)
@given(
    v=st.floats(0.1, 100.0),
    half=st.floats(0.05, 50.0),
    slope=st.floats(1e-3, 5.0),
    prev_rel=st.floats(0.0, 3.0),
    log_eta=st.floats(-4.0, 6.0),
)
def test_brreg_residual(v, half, slope, prev_rel, log_eta):
    a, eta, prev = 0.3, 10.0**log_eta, prev_rel * v
    bid_max = 6.0 * v
    b = float(brreg_solve(v, a, half, slope, prev, eta, bid_max))
    assert 0.0 <= b <= bid_max
    resid = b - prev - eta * ql_gradient(v, a, half, slope, b)
    if 0.0 < b < bid_max:
        assert abs(resid) < 1e-8 * max(1.0, prev, b)
    elif b == 0.0:
        assert resid >= -1e-8 * max(1.0, prev)
    else:
        assert resid <= 1e-8 * max(1.0, prev, b)


def test_brreg_between_prev_and_best_reply():
    rule = FittedRule(RuleKind.BRReg, 3.0, eta=1.0, bid_max=100.0)
    br = br_bid(3.0, CURVES, 100.0)
    b = brreg_step(rule, 0.5, CURVES)
    assert 0.5 < b < br
    big = FittedRule(RuleKind.BRReg, 3.0, eta=1e9, bid_max=100.0)
    assert brreg_step(big, 0.5, CURVES) == pytest.approx(br, rel=1e-6)


def test_golden_max_interior_and_boundary():
    assert golden_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0) == pytest.approx(0.3, abs=1e-8)
    assert golden_max(lambda x: x, 0.0, 1.0) == 1.0
    assert golden_max(lambda x: -x, 0.0, 1.0) == 0.0


def test_ftrl_and_ftl_match_grid_oracle(rng):
    history = random_curves(rng, 30)
    rule = FittedRule(RuleKind.FTRL, 1.0, eta=2.0, beta=0.9, bid_max=6.0)
    grid = np.linspace(0.0, 6.0, 600001)
    w = 0.9 ** np.arange(29, -1, -1)
    obj = sum(w[i] * ql_utility(1.0, history.a[i], history.half[i], history.slope[i], grid) for i in range(30))
    assert ftrl_step(rule, history, 30) == pytest.approx(grid[np.argmax(obj - grid**2 / 4.0)], abs=1e-5 * 6.0)
    obj1 = sum(ql_utility(1.0, history.a[i], history.half[i], history.slope[i], grid) for i in range(30))
    assert ftl_step(rule, history, 30) == pytest.approx(grid[np.argmax(obj1)], abs=1e-5 * 6.0)
    with pytest.raises(ValueError):
        ftrl_step(rule, history, 0)


def test_regress_eta_sign_and_zero():
    assert regress_eta(np.array([-1.0, -2.0]), np.array([1.0, 2.0])) == 1.0
    with pytest.raises(ZeroGradient):
        regress_eta(np.array([1.0]), np.array([0.0]))


def _ogd_path(curves, value, eta, b0, rule_kind=RuleKind.OGD, vis=None):
    rule = FittedRule(rule_kind, value, eta=eta, bid_max=math.inf, vis=vis)
    bids = [b0]
    for t in range(1, len(curves)):
        bids.append(next_bid(rule, bids[-1], curves, t))
    return np.array(bids)


def test_fit_eta_ogd_exact_on_noiseless(rng):
    curves = random_curves(rng, 100)
    bids = _ogd_path(curves, 1.0, 0.37, 0.3)
    s = BidderSeries("x", np.arange(100), bids, curves)
    assert fit_eta_ogd(s, 1.0) == pytest.approx(0.37, abs=1e-12)


def test_ogdbias_alpha_zero_is_ogd(rng):
    curves = random_curves(rng, 50)
    a = _ogd_path(curves, 1.0, 0.4, 0.3)
    b = _ogd_path(curves, 1.0, 0.4, 0.3, RuleKind.OGDBias, VisibilityParams(1.0, 0.0, 0.6))
    assert np.array_equal(a, b)


def test_fit_ogdbias_never_worse_than_ogd(series):
    rule = fit_rule(RuleKind.OGD, series, np.arange(100), value=1.0)
    fit = fit_ogdbias(series.head(100), 1.0)
    assert fit.train_mape <= ogd_train_mape(series.head(100), rule)


def test_run_series_and_stepahead_shapes(series):
    series.train_end = 100
    rule = fit_rule(RuleKind.OGD, series, series.train_idx)
    run = run_series(rule, series)
    assert run.mode == "series" and len(run.predictions) == 20
    np.testing.assert_array_equal(run.truth, series.bids[100:])
    step = run_stepahead(RuleKind.OGD, series, options=RuleOptions(stepahead_refit_value=False))
    assert step.mode == "stepahead" and len(step.predictions) == 20


def test_stepahead_first_prediction_equals_series(series):
    series.train_end = 100
    rule = fit_rule(RuleKind.OGD, series, series.train_idx)
    s = run_series(rule, series)
    st_run = run_stepahead(RuleKind.OGD, series, value=rule.value)
    assert st_run.predictions[0] == s.predictions[0]


def test_br_series_equals_stepahead(series):
    series.train_end = 100
    rule = fit_rule(RuleKind.BR, series, series.train_idx)
    a = run_series(rule, series)
    b = run_stepahead(RuleKind.BR, series, value=rule.value)
    np.testing.assert_array_equal(a.predictions, b.predictions)


def test_fit_rule_kinds(series):
    idx = np.arange(100)
    assert fit_rule("FTL", series, idx).beta == 1.0
    assert math.isinf(fit_rule("FTL", series, idx).eta)
    assert fit_rule("BR", series, idx).eta is None
    for kind in ("BRReg", "FTRL", "OGD", "OGDBias"):
        r = fit_rule(kind, series, idx)
        assert r.eta > 0 and r.bid_max == pytest.approx(6.0 * series.bids[:100].mean())
