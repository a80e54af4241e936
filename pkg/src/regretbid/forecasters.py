"""Learning-rule bid predictors and the fitting of their parameters.

Every rule maps the previous bid and the curves observed so far to the next
bid, projected onto ``[0, bid_max]``:

* ``BR``          best reply to the last hour's utility
* ``MomentumBR``  average of the previous bid and the best reply
* ``OGD``         ``b + eta * grad u(b)``
* ``BRReg``       implicit (proximal) gradient step
* ``FTRL``        discounted follow-the-regularized-leader, no linearisation
* ``FTL``         FTRL with ``beta = 1`` and ``eta = inf``
* ``OGDBias``     OGD on the visibility-biased utility
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ._kernels import brreg_roots, ftrl_grid_predictions
from .curves import CurveArrays, HourlyCurveSet
from .errors import ZeroGradient
from .regret import estimate_value, min_regret_value
from .series import BidderSeries, adjacent_pairs
from .utility import (
    REPEL,
    VisibilityParams,
    br_closed_form,
    ql_curvature,
    ql_gradient,
    ql_utility,
    vis_gradient,
    visibility_of,
)

DEFAULT_BETA = 0.9
ALPHA_GRID = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0, 300.0)
VIS0_GRID = tuple(round(0.1 * i, 1) for i in range(11))
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class RuleKind(str, Enum):
    BR = "BR"
    MomentumBR = "MomentumBR"
    OGD = "OGD"
    BRReg = "BRReg"
    FTRL = "FTRL"
    FTL = "FTL"
    OGDBias = "OGDBias"


@dataclass(frozen=True)
class FittedRule:
    kind: RuleKind
    value: float
    eta: float | None = None
    beta: float = DEFAULT_BETA
    vis: VisibilityParams | None = None
    bid_max: float = math.inf

    def __post_init__(self):
        if self.eta is not None and self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if not self.bid_max > 0:
            raise ValueError("bid_max must be positive")


@dataclass
class RuleOptions:
    beta: float = DEFAULT_BETA
    bid_max_factor: float = 6.0
    lam: float | None = None
    lambda_rule: str = "gap10"
    value_method: str = "quantal"
    vis_sign: int = REPEL
    eta_grid_size: int = 40
    eta_grid_span: float = 1e4
    alpha_grid: tuple = ALPHA_GRID
    vis0_grid: tuple = VIS0_GRID
    stepahead_refit_value: bool = True


@dataclass
class PredictionRun:
    mode: str
    predictions: np.ndarray
    hours: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    truth: np.ndarray = field(default_factory=lambda: np.zeros(0))


# single-step rules ---------------------------------------------------------


def _clip(bid, bid_max):
    return np.clip(bid, 0.0, bid_max)


def golden_max(f, lo: float, hi: float, rel_tol: float = 1e-10) -> float:
    """Golden-section maximiser of a unimodal function on ``[lo, hi]``."""
    tol = rel_tol * max(hi - lo, 1e-300)
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    cands = [(f(lo), -1, lo), (f(mid), 0, mid), (f(hi), -2, hi)]
    return max(cands)[2]


def br_bid(value: float, curves: HourlyCurveSet, bid_max: float) -> float:
    return float(br_closed_form(value, curves.click.a, curves.click.b, curves.cost.slope, bid_max))


def _rule_gradient(rule: FittedRule, a, half, slope, bid):
    if rule.kind == RuleKind.OGDBias and rule.vis is not None:
        p = rule.vis
        return vis_gradient(rule.value, p.alpha, p.vis0, p.sign, a, half, slope, bid)
    return ql_gradient(rule.value, a, half, slope, bid)


def ogd_step(rule: FittedRule, prev_bid: float, curves: HourlyCurveSet) -> float:
    g = _rule_gradient(rule, curves.click.a, curves.click.b, curves.cost.slope, prev_bid)
    return float(_clip(prev_bid + rule.eta * g, rule.bid_max))


def brreg_solve(value, a, half, slope, prev, eta, bid_max, tol=1e-11, max_iter=200):
    """Vectorised root of ``b - prev - eta * grad u(b)`` on ``[0, bid_max]``.

    The map is strictly increasing (the utility is concave), so a bracketed
    Newton iteration converges; where no sign change exists the boundary is
    returned.
    """
    arrs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (value, a, half, slope, prev, eta)))
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(x).ravel() for x in arrs]
    out = np.empty(flat[0].size)
    brreg_roots(*flat, float(bid_max), float(tol), int(max_iter), out)
    return out.reshape(shape)


def brreg_step(rule: FittedRule, prev_bid: float, curves: HourlyCurveSet) -> float:
    if rule.eta == 0:
        return float(prev_bid)
    b = brreg_solve(rule.value, curves.click.a, curves.click.b, curves.cost.slope, prev_bid, rule.eta, rule.bid_max)
    return float(b)


def _discounted_objective(rule: FittedRule, history: CurveArrays, t: int, beta: float, eta: float):
    h = history[:t]
    weights = beta ** np.arange(t - 1, -1, -1, dtype=float)

    def objective(b):
        return float(np.dot(weights, ql_utility(rule.value, h.a, h.half, h.slope, b)) - b * b / (2.0 * eta))

    return objective


def ftrl_step(rule: FittedRule, history: CurveArrays, t: int) -> float:
    """Maximiser of ``sum_tau beta^(t-tau) u_tau(b) - b^2 / (2 eta)`` over the first ``t`` hours."""
    if t < 1:
        raise ValueError("FTRL needs at least one hour of history")
    eta = math.inf if rule.eta is None else rule.eta
    return golden_max(_discounted_objective(rule, history, t, rule.beta, eta), 0.0, rule.bid_max)


def ftl_step(rule: FittedRule, history: CurveArrays, t: int) -> float:
    if t < 1:
        raise ValueError("FTL needs at least one hour of history")
    return golden_max(_discounted_objective(rule, history, t, 1.0, math.inf), 0.0, rule.bid_max)


def momentum_br_step(rule: FittedRule, prev_bid: float, curves: HourlyCurveSet) -> float:
    return 0.5 * (prev_bid + br_bid(rule.value, curves, rule.bid_max))


def next_bid(rule: FittedRule, prev_bid: float, history: CurveArrays, t: int) -> float:
    """Prediction for hour index ``t`` from the state at ``t - 1`` and curves ``[0, t)``."""
    kind = rule.kind
    if kind in (RuleKind.FTRL, RuleKind.FTL):
        step = ftrl_step if kind == RuleKind.FTRL else ftl_step
        return step(rule, history, t)
    curves = history.at(t - 1)
    if kind == RuleKind.BR:
        return br_bid(rule.value, curves, rule.bid_max)
    if kind == RuleKind.MomentumBR:
        return momentum_br_step(rule, prev_bid, curves)
    if kind in (RuleKind.OGD, RuleKind.OGDBias):
        return ogd_step(rule, prev_bid, curves)
    if kind == RuleKind.BRReg:
        return brreg_step(rule, prev_bid, curves)
    raise ValueError(f"unknown rule {kind}")


# parameter fitting -----------------------------------------------------------


def _pairs(series: BidderSeries, pairs):
    return adjacent_pairs(np.arange(len(series))) if pairs is None else np.asarray(pairs)


def _train_gradients(series, value, t):
    c = series.curves
    return ql_gradient(value, c.a[t], c.half[t], c.slope[t], series.bids[t])


def regress_eta(diffs, grads) -> float:
    """Least-squares step size, made positive by taking the absolute value."""
    denom = float(np.dot(grads, grads))
    if not denom > 0:
        raise ZeroGradient("gradient sequence is identically zero")
    return abs(float(np.dot(diffs, grads)) / denom)


def fit_eta_ogd(series: BidderSeries, value: float, pairs=None) -> float:
    t = _pairs(series, pairs)
    if len(t) == 0:
        raise ZeroGradient("no consecutive training hours")
    diffs = series.bids[t + 1] - series.bids[t]
    return regress_eta(diffs, _train_gradients(series, value, t))


def eta_grid(series: BidderSeries, value: float, pairs=None, size: int = 40, span: float = 1e4) -> np.ndarray:
    t = _pairs(series, pairs)
    grads = np.abs(_train_gradients(series, value, t))
    scale = float(np.mean(series.bids[t])) / max(float(np.mean(grads)), 1e-300)
    return np.geomspace(1.0 / span, span, size) * scale


def _brreg_one_step(series, value, t, etas, bid_max):
    c = series.curves
    return brreg_solve(
        value, c.a[t][None, :], c.half[t][None, :], c.slope[t][None, :],
        series.bids[t][None, :], np.asarray(etas)[:, None], bid_max,
    )


def _ftrl_one_step(series, value, t, etas, beta, bid_max, n_grid=4096):
    """Approximate FTRL one-step predictions for many step sizes (grid inversion)."""
    c = series.curves
    t = np.sort(np.asarray(t, dtype=np.int64))
    etas = np.ascontiguousarray(etas, dtype=float)
    out = np.empty((len(etas), len(t)))
    grid = np.linspace(0.0, bid_max, n_grid)
    ftrl_grid_predictions(float(value), c.a, c.half, c.slope, float(beta), grid, t, etas, float(bid_max), out)
    return out


def fit_eta_grid(
    series: BidderSeries,
    value: float,
    kind: RuleKind,
    pairs=None,
    beta: float = DEFAULT_BETA,
    bid_max: float | None = None,
    size: int = 40,
    span: float = 1e4,
) -> float:
    """Grid search of the step size minimising one-step training MSE."""
    kind = RuleKind(kind)
    t = np.sort(_pairs(series, pairs))
    if len(t) == 0:
        raise ZeroGradient("no consecutive training hours")
    if bid_max is None:
        bid_max = 6.0 * float(np.mean(series.bids[t]))
    etas = eta_grid(series, value, t, size, span)
    if kind == RuleKind.BRReg:
        preds = _brreg_one_step(series, value, t, etas, bid_max)
    elif kind == RuleKind.FTRL:
        preds = _ftrl_one_step(series, value, t, etas, beta, bid_max)
    else:
        raise ValueError(f"grid step-size fit is defined for BRReg and FTRL, not {kind}")
    mse = np.mean((series.bids[t + 1][None, :] - preds) ** 2, axis=1)
    return float(etas[int(np.argmin(mse))])


def ogd_train_mape(series: BidderSeries, rule: FittedRule, pairs=None) -> float:
    """One-step MAPE of an (OGD-family) rule over consecutive training hours."""
    t = _pairs(series, pairs)
    c = series.curves
    g = _rule_gradient(rule, c.a[t], c.half[t], c.slope[t], series.bids[t])
    pred = _clip(series.bids[t] + rule.eta * g, rule.bid_max)
    truth = series.bids[t + 1]
    return float(np.mean(np.abs(truth - pred) / truth))


@dataclass(frozen=True)
class BiasFit:
    alpha: float
    vis0: float
    eta: float
    train_mape: float


def fit_ogdbias(
    series: BidderSeries,
    value: float,
    pairs=None,
    sign: int = REPEL,
    bid_max: float | None = None,
    alpha_grid=ALPHA_GRID,
    vis0_grid=VIS0_GRID,
) -> BiasFit:
    """Grid search over ``(alpha, vis0)`` on training one-step MAPE.

    The step size is refit by regression for every candidate. Candidates are
    visited alpha-major in ascending order and only strict improvements are
    kept, so ties resolve toward ``alpha = 0`` and then the smaller ``vis0``.
    """
    t = _pairs(series, pairs)
    if bid_max is None:
        bid_max = 6.0 * float(np.mean(series.bids[t]))
    c = series.curves
    a, half, slope, b = c.a[t], c.half[t], c.slope[t], series.bids[t]
    truth = series.bids[t + 1]
    diffs = truth - b
    cands = [(float(al), float(v0)) for al in sorted(alpha_grid) for v0 in sorted(vis0_grid)]
    etas = np.full(len(cands), np.nan)
    mapes = np.full(len(cands), np.inf)

    # alpha = 0 goes through the plain OGD path so it matches OGD bit for bit
    zero = [i for i, (al, _) in enumerate(cands) if al == 0.0]
    if zero:
        g = ql_gradient(value, a, half, slope, b)
        try:
            eta = regress_eta(diffs, g)
            etas[zero] = eta
            mapes[zero] = float(np.mean(np.abs(truth - _clip(b + eta * g, bid_max)) / truth))
        except ZeroGradient:
            pass
    rest = np.array([i for i, (al, _) in enumerate(cands) if al != 0.0], dtype=np.int64)
    if rest.size:
        al = np.array([cands[i][0] for i in rest])[:, None]
        v0 = np.array([cands[i][1] for i in rest])[:, None]
        base = ql_gradient(value, a, half, slope, b)[None, :]
        dvis = (half / (half + b) ** 2)[None, :]
        G = base + sign * al * (visibility_of(half, b)[None, :] - v0) * dvis
        denom = np.einsum("ij,ij->i", G, G)
        usable = denom > 0
        eta = np.abs(G @ diffs / np.where(usable, denom, 1.0))
        pred = _clip(b[None, :] + eta[:, None] * G, bid_max)
        m = np.mean(np.abs(truth[None, :] - pred) / truth[None, :], axis=1)
        etas[rest] = np.where(usable, eta, np.nan)
        mapes[rest] = np.where(usable, m, np.inf)
    if not np.isfinite(mapes).any():
        raise ZeroGradient("no visibility candidate had a usable gradient")
    i = int(np.argmin(mapes))  # first minimum: alpha-major ascending, so ties go low
    return BiasFit(cands[i][0], cands[i][1], float(etas[i]), float(mapes[i]))


def estimate_rule_value(series: BidderSeries, train_idx, options: RuleOptions) -> float:
    est = estimate_value(series.take(train_idx), lam=options.lam, lambda_rule=options.lambda_rule)
    return est.v_mr if options.value_method == "min" else est.v_qr


def fit_rule(
    kind,
    series: BidderSeries,
    train_idx,
    options: RuleOptions | None = None,
    value: float | None = None,
) -> FittedRule:
    """Fit value, bounds and step-size parameters of one rule on training hours."""
    options = options or RuleOptions()
    kind = RuleKind(kind)
    train_idx = np.asarray(train_idx)
    if value is None:
        value = estimate_rule_value(series, train_idx, options)
    bid_max = options.bid_max_factor * float(np.mean(series.bids[train_idx]))
    pairs = adjacent_pairs(train_idx)
    rule = FittedRule(kind, value, beta=options.beta, bid_max=bid_max)
    if kind == RuleKind.OGD:
        return replace(rule, eta=fit_eta_ogd(series, value, pairs))
    if kind in (RuleKind.BRReg, RuleKind.FTRL):
        eta = fit_eta_grid(
            series, value, kind, pairs, options.beta, bid_max, options.eta_grid_size, options.eta_grid_span
        )
        return replace(rule, eta=eta)
    if kind == RuleKind.FTL:
        return replace(rule, beta=1.0, eta=math.inf)
    if kind == RuleKind.OGDBias:
        fit = fit_ogdbias(series, value, pairs, options.vis_sign, bid_max, options.alpha_grid, options.vis0_grid)
        vis = VisibilityParams(value, fit.alpha, fit.vis0, options.vis_sign)
        return replace(rule, eta=fit.eta, vis=vis)
    return rule


# prediction tasks ------------------------------------------------------------


def run_series(rule: FittedRule, series: BidderSeries, test_idx=None) -> PredictionRun:
    """Roll the frozen rule forward from the last bid before the test block."""
    test_idx = series.test_idx if test_idx is None else np.asarray(test_idx)
    prev = float(series.bids[test_idx[0] - 1])
    preds = np.empty(len(test_idx))
    for j, t in enumerate(test_idx):
        prev = next_bid(rule, prev, series.curves, int(t))
        preds[j] = prev
    return PredictionRun("series", preds, series.hours[test_idx], series.bids[test_idx])


def stepahead_values(series: BidderSeries, train_idx, test_idx, options: RuleOptions | None = None) -> np.ndarray:
    """Value estimate available before each test hour (train plus earlier test hours)."""
    options = options or RuleOptions()
    train_idx, test_idx = np.asarray(train_idx), np.asarray(test_idx)
    out = np.empty(len(test_idx))
    for j in range(len(test_idx)):
        seen = np.union1d(train_idx, test_idx[:j])
        out[j] = estimate_rule_value(series, seen, options)
    return out


def run_stepahead(
    kind,
    series: BidderSeries,
    train_idx=None,
    test_idx=None,
    options: RuleOptions | None = None,
    value: float | None = None,
    step_values=None,
) -> PredictionRun:
    """Refit on all true data before each test hour, then predict one step.

    The value is re-estimated at every step unless ``value`` is given or
    ``options.stepahead_refit_value`` is off (then the train estimate is
    frozen); ``step_values`` supplies precomputed per-step estimates.
    """
    options = options or RuleOptions()
    kind = RuleKind(kind)
    train_idx = series.train_idx if train_idx is None else np.asarray(train_idx)
    test_idx = series.test_idx if test_idx is None else np.asarray(test_idx)
    if kind == RuleKind.BR:
        # best reply ignores the bid history, so stepahead equals series
        v0 = value if value is not None else (None if step_values is None else float(step_values[0]))
        run = run_series(fit_rule(kind, series, train_idx, options, v0), series, test_idx)
        run.mode = "stepahead"
        return run
    if value is not None:
        step_values = np.full(len(test_idx), float(value))
    elif step_values is None:
        if options.stepahead_refit_value:
            step_values = stepahead_values(series, train_idx, test_idx, options)
        else:
            step_values = np.full(len(test_idx), estimate_rule_value(series, train_idx, options))
    preds = np.empty(len(test_idx))
    for j, t in enumerate(test_idx):
        seen = np.union1d(train_idx, test_idx[:j])
        rule = fit_rule(kind, series, seen, options, float(step_values[j]))
        preds[j] = next_bid(rule, float(series.bids[t - 1]), series.curves, int(t))
    return PredictionRun("stepahead", preds, series.hours[test_idx], series.bids[test_idx])
