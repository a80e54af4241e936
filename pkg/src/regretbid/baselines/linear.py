"""Lag-2 linear regression (AR2), optionally with econ features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooFewRows

RIDGE = 1e-8


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coef: np.ndarray

    def predict(self, X) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coef


def fit_ar2(X, y) -> LinearModel:
    """Ordinary least squares with an intercept.

    Zero-variance columns get a zero weight (they are absorbed by the
    intercept); a singular normal matrix falls back to a tiny ridge.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) < 3:
        raise TooFewRows(f"AR2 needs at least 3 rows, got {len(X)}")
    mx, my = X.mean(axis=0), y.mean()
    Xc = X - mx
    live = np.ptp(X, axis=0) > 0
    coef = np.zeros(X.shape[1])
    if live.any():
        A = Xc[:, live]
        gram = A.T @ A
        rhs = A.T @ (y - my)
        try:
            if np.linalg.cond(gram) > 1e12:
                raise np.linalg.LinAlgError
            w = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            w = np.linalg.solve(gram + RIDGE * np.trace(gram) / len(gram) * np.eye(len(gram)), rhs)
        coef[live] = w
    return LinearModel(float(my - mx @ coef), coef)
