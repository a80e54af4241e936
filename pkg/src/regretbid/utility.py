"""Quasi-linear and visibility-biased bidder utilities.

The array-level functions (``ql_utility`` and friends) broadcast over numpy
arrays of curve parameters and bids; the object-level wrappers take an
``HourlyCurveSet`` for a single hour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ATTRACT = -1
REPEL = 1


@dataclass(frozen=True)
class QuasiLinearParams:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"value must be positive, got {self.value}")


@dataclass(frozen=True)
class VisibilityParams:
    value: float
    alpha: float = 0.0
    vis0: float = 0.0
    sign: int = REPEL

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"value must be positive, got {self.value}")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 <= self.vis0 <= 1.0:
            raise ValueError("vis0 must lie in [0, 1]")
        if self.sign not in (ATTRACT, REPEL):
            raise ValueError("sign must be +1 (repel) or -1 (attract)")


def ql_utility(value, a, half, slope, bid):
    clicks = a * bid / (half + bid)
    return (value - slope * bid) * clicks


def ql_gradient(value, a, half, slope, bid):
    clicks = a * bid / (half + bid)
    dclicks = a * half / (half + bid) ** 2
    return value * dclicks - slope * clicks - slope * bid * dclicks


def ql_curvature(value, a, half, slope, bid):
    """Second derivative of the quasi-linear utility; always negative."""
    return -2.0 * a * half * (slope * half + value) / (half + bid) ** 3


def visibility_of(half, bid):
    return bid / (half + bid)


def vis_utility(value, alpha, vis0, sign, a, half, slope, bid):
    base = ql_utility(value, a, half, slope, bid)
    if alpha == 0:
        return base
    return base + sign * 0.5 * alpha * (visibility_of(half, bid) - vis0) ** 2


def vis_gradient(value, alpha, vis0, sign, a, half, slope, bid):
    base = ql_gradient(value, a, half, slope, bid)
    if alpha == 0:
        return base
    dvis = half / (half + bid) ** 2
    return base + sign * alpha * (visibility_of(half, bid) - vis0) * dvis


def _unpack(curves):
    return curves.click.a, curves.click.b, curves.cost.slope


def util_ql(params: QuasiLinearParams, curves, bid):
    return ql_utility(params.value, *_unpack(curves), bid)


def grad_ql(params: QuasiLinearParams, curves, bid):
    return ql_gradient(params.value, *_unpack(curves), bid)


def visibility(curves, bid):
    return visibility_of(curves.click.b, bid)


def util_vis(params: VisibilityParams, curves, bid):
    return vis_utility(params.value, params.alpha, params.vis0, params.sign, *_unpack(curves), bid)


def grad_vis(params: VisibilityParams, curves, bid):
    return vis_gradient(params.value, params.alpha, params.vis0, params.sign, *_unpack(curves), bid)


def br_closed_form(value, a, half, slope, bid_max):
    """Maximiser of the quasi-linear utility on ``[0, bid_max]``.

    Setting the gradient to zero gives ``slope*b^2 + 2*slope*half*b - value*half = 0``.
    """
    value = np.asarray(value, dtype=float)
    slope = np.asarray(slope, dtype=float)
    half = np.asarray(half, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = value * half / slope
        # cancellation-free form of -half + sqrt(half^2 + q)
        root = q / (half + np.sqrt(half * half + q))
    root = np.where(slope > 0, root, np.inf)
    root = np.where(value > 0, root, 0.0)
    return np.clip(root, 0.0, bid_max)
