"""Scoring and distribution statistics for per-bidder prediction errors."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import TooFewScores, ZeroTrueBid

Z95 = 1.96
TUKEY_K = 1.5


@dataclass(frozen=True)
class MapeScore:
    bidder_id: str
    method: str
    mode: str
    mape: float
    n_test: int

    def __post_init__(self):
        if not math.isfinite(self.mape) or self.mape < 0:
            raise ValueError("mape must be finite and non-negative")
        if self.n_test < 1:
            raise ValueError("n_test must be at least 1")


def mape(true_bids, predicted_bids) -> float:
    t = np.asarray(true_bids, dtype=float)
    p = np.asarray(predicted_bids, dtype=float)
    if t.shape != p.shape or t.size == 0:
        raise ValueError("true and predicted bids must be non-empty and equally long")
    if np.any(t <= 0):
        raise ZeroTrueBid("MAPE is undefined for non-positive true bids")
    return float(np.mean(np.abs(t - p) / t))


@dataclass(frozen=True)
class DistStats:
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    mean_excl: float
    stderr: float
    ci95: tuple
    n: int
    n_outliers: int

    def row(self) -> dict:
        d = asdict(self)
        lb, ub = d.pop("ci95")
        d.update(lb=lb, ub=ub)
        return d


def tukey_fences(scores) -> tuple:
    q1, q3 = np.quantile(scores, [0.25, 0.75])
    iqr = q3 - q1
    return q1 - TUKEY_K * iqr, q3 + TUKEY_K * iqr


def dist_stats(scores) -> DistStats:
    """Quartiles, Tukey whiskers, and mean/stderr/CI over the non-outliers.

    Quartiles interpolate linearly between order statistics. Whiskers end
    at the most extreme scores inside the fences; the standard error uses
    the sample standard deviation (``ddof=1``).
    """
    x = np.asarray(scores, dtype=float)
    if x.size < 4:
        raise TooFewScores(f"need at least 4 scores, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("scores must be finite")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    lo, hi = tukey_fences(x)
    inside = (x >= lo) & (x <= hi)
    kept = x[inside]
    mean = float(kept.mean())
    se = float(kept.std(ddof=1) / np.sqrt(kept.size)) if kept.size > 1 else 0.0
    return DistStats(
        float(q1), float(med), float(q3), float(kept.min()), float(kept.max()),
        mean, se, (mean - Z95 * se, mean + Z95 * se), int(x.size), int((~inside).sum()),
    )


def hourly_profile(day_bids) -> tuple:
    """Per-hour mean and 25th/75th percentiles of mean-normalised 24-hour bid sequences.

    Accepts shift instances (using their ``day_bids``) or raw 24-vectors.
    """
    rows = [np.asarray(getattr(d, "day_bids", d), dtype=float) for d in day_bids]
    if not rows:
        raise ValueError("hourly profile needs at least one day")
    M = np.vstack(rows)
    if M.shape[1] != 24:
        raise ValueError("each day must have 24 hourly bids")
    M = M / M.mean(axis=1, keepdims=True)
    return M.mean(axis=0), np.quantile(M, 0.25, axis=0), np.quantile(M, 0.75, axis=0)
