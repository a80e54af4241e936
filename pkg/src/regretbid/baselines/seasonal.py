"""Hour-of-day mean bid, a plain seasonal stand-in for heavier forecasting models."""

from __future__ import annotations

import numpy as np

from ..errors import InsufficientCoverage
from ..series import HOURS_PER_DAY


def hour_of_day_means(hour_of_day, bids, needed, min_count: int = 2) -> np.ndarray:
    hod = np.asarray(hour_of_day) % HOURS_PER_DAY
    bids = np.asarray(bids, dtype=float)
    counts = np.bincount(hod, minlength=HOURS_PER_DAY)
    sums = np.bincount(hod, weights=bids, minlength=HOURS_PER_DAY)
    needed = np.unique(np.asarray(needed) % HOURS_PER_DAY)
    short = needed[counts[needed] < min_count]
    if short.size:
        raise InsufficientCoverage(f"train has fewer than {min_count} bids at hour(s) {short.tolist()}")
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts


def seasonal_mean(series, train_idx=None, test_idx=None) -> np.ndarray:
    train_idx = series.train_idx if train_idx is None else np.asarray(train_idx)
    test_idx = series.test_idx if test_idx is None else np.asarray(test_idx)
    hod = series.hour_of_day
    means = hour_of_day_means(hod[train_idx], series.bids[train_idx], hod[test_idx])
    return means[hod[test_idx]]
