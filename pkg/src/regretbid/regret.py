"""Regret-based estimation of a bidder's value-per-click.

Under the quasi-linear utility, ``u_t(g; v) = v * x_t(g) - slope_t * g * x_t(g)``
is affine in ``v``. Summing over hours therefore collapses the regret of
every candidate value to two curve sums evaluated once on the deviation grid,
which is what makes sweeping 120 candidates cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import EmptySeries, InsufficientDays, NonPositiveBids, ZeroVariance
from .series import BidderSeries, adjacent_pairs
from .utility import ql_gradient

N_CANDIDATES = 120
CANDIDATE_LOW = 0.01
CANDIDATE_HIGH = 6.0
N_DEVIATION_BIDS = 60


@dataclass(frozen=True)
class RegretProfile:
    candidates: np.ndarray
    regrets: np.ndarray
    bid_grid: np.ndarray

    def __len__(self):
        return len(self.candidates)

    @property
    def pairs(self):
        return list(zip(self.candidates.tolist(), self.regrets.tolist()))


@dataclass(frozen=True)
class ValueEstimate:
    v_qr: float
    v_mr: float
    lam: float
    profile: RegretProfile


def default_bid_grid(bids) -> np.ndarray:
    """Realised bids plus evenly spaced deviations over ``[0, 2 * max bid]``."""
    bids = np.asarray(bids, dtype=float)
    spread = np.linspace(0.0, 2.0 * bids.max(), N_DEVIATION_BIDS)
    return np.unique(np.concatenate([bids, spread]))


def candidate_values(series) -> np.ndarray:
    bids = series.bids if isinstance(series, BidderSeries) else np.asarray(series, dtype=float)
    if len(bids) == 0:
        raise EmptySeries("no bids to build a candidate grid from")
    avg = float(np.mean(bids))
    if not avg > 0:
        raise NonPositiveBids(f"average bid must be positive, got {avg}")
    return np.linspace(CANDIDATE_LOW * avg, CANDIDATE_HIGH * avg, N_CANDIDATES)


def _curve_sums(series: BidderSeries, grid):
    c = series.curves
    g = np.asarray(grid, dtype=float)[None, :]
    clicks = c.a[:, None] * g / (c.half[:, None] + g)
    click_sum = clicks.sum(axis=0)
    cost_sum = (c.slope[:, None] * g * clicks).sum(axis=0)
    b = series.bids
    real_clicks = c.a * b / (c.half + b)
    return click_sum, cost_sum, real_clicks.sum(), (c.slope * b * real_clicks).sum()


def regret_profile(series: BidderSeries, candidates=None, bid_grid=None) -> RegretProfile:
    if len(series) == 0:
        raise EmptySeries("regret needs at least one hour")
    if candidates is None:
        candidates = candidate_values(series)
    if bid_grid is None:
        bid_grid = default_bid_grid(series.bids)
    candidates = np.asarray(candidates, dtype=float)
    bid_grid = np.asarray(bid_grid, dtype=float)
    click_sum, cost_sum, real_clicks, real_cost = _curve_sums(series, bid_grid)
    gain = candidates[:, None] * click_sum[None, :] - cost_sum[None, :]
    realised = candidates * real_clicks - real_cost
    regrets = (gain.max(axis=1) - realised) / len(series)
    return RegretProfile(candidates, regrets, bid_grid)


def regret(series: BidderSeries, value: float, bid_grid) -> float:
    if len(bid_grid) == 0:
        raise ValueError("bid_grid must be non-empty")
    return float(regret_profile(series, [value], bid_grid).regrets[0])


def min_regret_value(profile: RegretProfile) -> float:
    order = np.argsort(profile.candidates, kind="stable")
    regrets = profile.regrets[order]
    # argmin returns the first minimum, i.e. the smallest value on ties
    return float(profile.candidates[order][np.argmin(regrets)])


LAMBDA_RULES = ("gap10", "median")


def default_lambda(profile: RegretProfile, rule: str = "gap10") -> float:
    """Per-bidder inverse temperature of the quantal estimator.

    ``gap10`` uses the regret gap between the best tenth of candidates and the
    minimum; ``median`` uses the median absolute regret over the grid. Both
    are invariant to the bidder's currency scale.
    """
    r = profile.regrets
    if rule == "gap10":
        scale = float(np.quantile(r, 0.1) - r.min())
    elif rule == "median":
        scale = float(np.median(np.abs(r)))
    else:
        raise ValueError(f"unknown lambda rule {rule!r}")
    if not scale > 0:
        scale = float(np.mean(np.abs(r - r.min())))
    return 1.0 / scale if scale > 0 else 1.0


def quantal_regret_value(profile: RegretProfile, lam: float) -> float:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r = profile.regrets
    weights = np.exp(-lam * (r - r.min()))
    return float(np.sum(profile.candidates * weights) / np.sum(weights))


def estimate_value(
    series: BidderSeries, lam: float | None = None, bid_grid=None, lambda_rule: str = "gap10"
) -> ValueEstimate:
    profile = regret_profile(series, bid_grid=bid_grid)
    if lam is None:
        lam = default_lambda(profile, lambda_rule)
    return ValueEstimate(quantal_regret_value(profile, lam), min_regret_value(profile), lam, profile)


def shade_ratio(series: BidderSeries, value: float) -> float:
    mean_bid = float(np.mean(series.bids))
    if not mean_bid > 0:
        raise NonPositiveBids("mean bid must be positive")
    return value / mean_bid


def daily_values(
    series: BidderSeries, min_hours: int = 6, lam: float | None = None, lambda_rule: str = "gap10", method: str = "quantal"
) -> dict:
    days = series.days
    out = {}
    for day in np.unique(days):
        idx = np.flatnonzero(days == day)
        if len(idx) >= min_hours:
            est = estimate_value(series.take(idx), lam=lam, lambda_rule=lambda_rule)
            out[int(day)] = est.v_mr if method == "min" else est.v_qr
    return out


def daily_value_cv(
    series: BidderSeries, min_hours: int = 6, lam: float | None = None, lambda_rule: str = "gap10", method: str = "quantal"
) -> float:
    values = np.array(list(daily_values(series, min_hours, lam, lambda_rule, method).values()))
    if len(values) < 2:
        raise InsufficientDays(f"need two days with {min_hours}+ active hours, found {len(values)}")
    return float(np.std(values) / np.mean(values))


@dataclass(frozen=True)
class Plausibility:
    signed_neg_log_p: float
    r: float
    p_value: float
    eligible: bool


def ogd_plausibility(series: BidderSeries, value: float, min_move: float = 1.0) -> Plausibility:
    """Signed -log10 p of the correlation between bid changes and utility gradients."""
    if len(series) < 3:
        raise EmptySeries("plausibility test needs at least three hours")
    t = adjacent_pairs(np.arange(len(series)))
    diffs = series.bids[t + 1] - series.bids[t]
    c = series.curves
    grads = ql_gradient(value, c.a[t], c.half[t], c.slope[t], series.bids[t])
    if np.ptp(diffs) == 0 or np.ptp(grads) == 0:
        raise ZeroVariance("bid changes or gradients are constant")
    r = float(np.corrcoef(diffs, grads)[0, 1])
    r = max(-1.0, min(1.0, r))
    df = len(diffs) - 2
    if df <= 0:
        p = 1.0
    elif abs(r) == 1.0:
        p = 0.0
    else:
        tstat = r * math.sqrt(df / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(tstat), df))
    p_floor = max(p, np.finfo(float).tiny)
    signed = math.copysign(-math.log10(p_floor), r) if p < 1.0 else 0.0
    eligible = bool(np.mean(np.abs(diffs)) >= min_move)
    return Plausibility(signed, r, p, eligible)
