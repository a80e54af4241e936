"""Counterfactual click and cost curves.

An hour of competition is summarised by two curves of the bid: a saturating
click curve ``x(bid) = a * bid / (b + bid)`` and a linear cost-per-click
curve ``p(bid) = slope * bid``. Curves are fitted by pooling the discrete
multiplier points of every auction in the hour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit

MULTIPLIERS = (0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 5.0)

_MAX_ITER = 500
_STEP_TOL = 1e-8


@dataclass(frozen=True)
class CurvePoint:
    bid: float
    click_prob: float
    cpc: float

    def __post_init__(self):
        if not self.bid > 0:
            raise ValueError(f"bid must be positive, got {self.bid}")
        if self.click_prob < 0 or self.cpc < 0:
            raise ValueError("click_prob and cpc must be non-negative")


@dataclass(frozen=True)
class ClickCurve:
    a: float  # saturation level
    b: float  # half-saturation bid

    @property
    def xmax(self) -> float:
        return self.a


@dataclass(frozen=True)
class CostCurve:
    slope: float


@dataclass(frozen=True)
class HourlyCurveSet:
    hour: int
    click: ClickCurve
    cost: CostCurve
    n_auctions: int = 1


def eval_click(curve: ClickCurve, bid):
    return curve.a * bid / (curve.b + bid)


def grad_click(curve: ClickCurve, bid):
    return curve.a * curve.b / (curve.b + bid) ** 2


def eval_cost(curve: CostCurve, bid):
    return curve.slope * bid


def _sse(bids, probs, mask, a, half):
    r = (probs - a[:, None] * bids / (half[:, None] + bids)) * mask
    return np.einsum("ij,ij->i", r, r)


def _levenberg_marquardt(bids, probs, mask, a, half, half_lo, half_hi):
    """Damped Gauss-Newton on (a, half) for a batch of independent rows."""
    a = a.astype(float).copy()
    half = half.astype(float).copy()
    mu = np.full(a.shape, 1e-3)
    sse = _sse(bids, probs, mask, a, half)
    active = sse > 0
    for _ in range(_MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x, y, m = bids[idx], probs[idx], mask[idx]
        ai, hi = a[idx], half[idx]
        den = hi[:, None] + x
        phi = x / den
        r = (y - ai[:, None] * phi) * m
        ja = phi * m
        jh = -ai[:, None] * x / den**2 * m
        haa = np.einsum("ij,ij->i", ja, ja)
        hah = np.einsum("ij,ij->i", ja, jh)
        hhh = np.einsum("ij,ij->i", jh, jh)
        ga = np.einsum("ij,ij->i", ja, r)
        gh = np.einsum("ij,ij->i", jh, r)
        daa = haa * (1.0 + mu[idx])
        dhh = hhh * (1.0 + mu[idx])
        det = daa * dhh - hah**2
        with np.errstate(divide="ignore", invalid="ignore"):
            da = np.where(det > 0, (dhh * ga - hah * gh) / det, 0.0)
            dh = np.where(det > 0, (daa * gh - hah * ga) / det, 0.0)
        a_new = np.maximum(ai + da, 1e-300)
        h_new = np.clip(hi + dh, half_lo[idx], half_hi[idx])
        sse_new = _sse(x, y, m, a_new, h_new)
        accept = sse_new < sse[idx]
        small = (np.abs(a_new - ai) <= _STEP_TOL * ai) & (np.abs(h_new - hi) <= _STEP_TOL * hi)

        acc = idx[accept]
        a[acc] = a_new[accept]
        half[acc] = h_new[accept]
        sse[acc] = sse_new[accept]
        mu[acc] *= 0.3
        mu[idx[~accept]] *= 10.0

        done = (accept & small) | (~accept & (mu[idx] > 1e12)) | (sse[idx] == 0)
        active[idx[done]] = False
    return a, half, sse


def fit_click_batch(bids, probs, mask=None, weights=None):
    """Fit one click curve per row of padded point arrays.

    ``weights`` are per-point multiplicities: a point with weight ``w``
    counts as ``w`` identical points. Returns ``(a, b, ok)``; rows where
    ``ok`` is False are degenerate (all click probabilities zero or fewer
    than two distinct bids).
    """
    bids = np.atleast_2d(np.asarray(bids, dtype=float))
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    if mask is None:
        mask = np.ones_like(bids, dtype=bool)
    mask = np.asarray(mask, dtype=bool) & (bids > 0)
    if weights is not None:
        mask &= np.asarray(weights) > 0
    # residuals are scaled by sqrt(weight) so squared errors carry the weight
    maskf = mask * (1.0 if weights is None else np.sqrt(np.where(mask, weights, 0.0)))
    bids = np.where(mask, bids, 1.0)
    probs = np.where(mask, probs, 0.0)

    big = np.finfo(float).max
    bmin = np.where(mask, bids, big).min(axis=1)
    bmax = np.where(mask, bids, -big).max(axis=1)
    ymax = np.where(mask, probs, 0.0).max(axis=1)
    ok = (mask.sum(axis=1) >= 2) & (bmax > bmin) & (ymax > 0)

    masked = np.where(mask, bids, np.nan)
    with np.errstate(all="ignore"):
        med = np.nanmedian(masked, axis=1) if masked.size else np.zeros(len(bids))
    med = np.where(ok, med, 1.0)
    ystart = np.where(ok, ymax, 1.0)
    half_lo = 1e-9 * np.where(ok, bmax, 1.0)
    half_hi = 1e6 * np.where(ok, bmax, 1.0)

    best_a = np.zeros(len(bids))
    best_h = np.ones(len(bids))
    best_sse = np.full(len(bids), np.inf)
    for a0 in (ystart, 2.0 * ystart):
        for h0 in (med, 5.0 * med):
            a, h, sse = _levenberg_marquardt(bids, probs, maskf, a0, h0, half_lo, half_hi)
            better = sse < best_sse
            best_a = np.where(better, a, best_a)
            best_h = np.where(better, h, best_h)
            best_sse = np.where(better, sse, best_sse)
    return best_a, best_h, ok


def fit_cost_batch(bids, cpcs, mask=None, weights=None):
    """Least-squares slope through the origin per row, clamped at zero."""
    bids = np.atleast_2d(np.asarray(bids, dtype=float))
    cpcs = np.atleast_2d(np.asarray(cpcs, dtype=float))
    if mask is None:
        mask = np.ones_like(bids, dtype=bool)
    m = np.asarray(mask, dtype=float)
    if weights is not None:
        m = m * np.asarray(weights, dtype=float)
    sxx = np.sum(m * bids * bids, axis=1)
    sxy = np.sum(m * bids * cpcs, axis=1)
    ok = sxx > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(ok, sxy / np.where(ok, sxx, 1.0), 0.0)
    return np.maximum(slope, 0.0), ok


def fit_click_curve(points) -> ClickCurve:
    if len(points) < 2:
        raise DegenerateFit("need at least two points to fit a click curve")
    bids = np.array([p.bid for p in points])
    probs = np.array([p.click_prob for p in points])
    a, b, ok = fit_click_batch(bids[None, :], probs[None, :])
    if not ok[0]:
        raise DegenerateFit("click points carry no curvature information")
    return ClickCurve(float(a[0]), float(b[0]))


def fit_cost_curve(points) -> CostCurve:
    bids = np.array([p.bid for p in points], dtype=float)
    cpcs = np.array([p.cpc for p in points], dtype=float)
    slope, ok = fit_cost_batch(bids[None, :], cpcs[None, :])
    if not ok[0]:
        raise DegenerateFit("sum of squared bids is zero")
    return CostCurve(float(slope[0]))


@dataclass(frozen=True)
class CurveArrays:
    """Column view of many hours' curves, aligned with a bid array."""

    a: np.ndarray
    half: np.ndarray
    slope: np.ndarray

    def __len__(self):
        return len(self.a)

    def __getitem__(self, idx) -> "CurveArrays":
        return CurveArrays(self.a[idx], self.half[idx], self.slope[idx])

    def at(self, i: int, hour: int = 0, n_auctions: int = 1) -> HourlyCurveSet:
        return HourlyCurveSet(
            hour, ClickCurve(float(self.a[i]), float(self.half[i])), CostCurve(float(self.slope[i])), n_auctions
        )

    @classmethod
    def from_sets(cls, sets) -> "CurveArrays":
        return cls(
            np.array([s.click.a for s in sets], dtype=float),
            np.array([s.click.b for s in sets], dtype=float),
            np.array([s.cost.slope for s in sets], dtype=float),
        )
