"""Lag features for the bid-only and econ-augmented baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..curves import CurveArrays

ECON_DIM = 6


@dataclass(frozen=True)
class FeatureRow:
    lag1: float
    lag2: float
    econ: tuple | None = None

    def __post_init__(self):
        vals = [self.lag1, self.lag2, *(self.econ or ())]
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature entries must be finite")
        if self.econ is not None and len(self.econ) != ECON_DIM:
            raise ValueError(f"econ block must have {ECON_DIM} entries")

    def as_array(self) -> np.ndarray:
        return np.array([self.lag1, self.lag2, *(self.econ or ())], dtype=float)


def econ_block(curves: CurveArrays, t1, t2, lag1, lag2) -> np.ndarray:
    """(x(lag1), x(lag2), p(lag1), p(lag2), x'(lag1), p'(lag1)), each lag on its own hour's curves."""
    a1, h1, s1 = curves.a[t1], curves.half[t1], curves.slope[t1]
    a2, h2, s2 = curves.a[t2], curves.half[t2], curves.slope[t2]
    x1 = a1 * lag1 / (h1 + lag1)
    x2 = a2 * lag2 / (h2 + lag2)
    dx1 = a1 * h1 / (h1 + lag1) ** 2
    return np.column_stack([x1, x2, s1 * lag1, s2 * lag2, dx1, np.broadcast_to(s1, np.shape(x1))])


def feature_matrix(curves: CurveArrays, targets, lag1, lag2, use_econ: bool) -> np.ndarray:
    targets = np.atleast_1d(np.asarray(targets))
    lag1 = np.atleast_1d(np.asarray(lag1, dtype=float))
    lag2 = np.atleast_1d(np.asarray(lag2, dtype=float))
    X = np.column_stack([lag1, lag2])
    if use_econ:
        X = np.hstack([X, econ_block(curves, targets - 1, targets - 2, lag1, lag2)])
    return X


def lagged_targets(idx) -> np.ndarray:
    """Indices ``t`` in the set whose two predecessors are also in the set."""
    idx = np.asarray(idx)
    member = np.zeros(int(idx.max()) + 1 if idx.size else 0, dtype=bool)
    member[idx] = True
    ok = idx >= 2
    ok[ok] &= member[idx[ok] - 1] & member[idx[ok] - 2]
    return idx[ok]


def training_rows(series, idx, use_econ: bool):
    t = lagged_targets(idx)
    b = series.bids
    return feature_matrix(series.curves, t, b[t - 1], b[t - 2], use_econ), b[t]
