"""Compiled scalar loops behind the implicit-step solver and the FTRL step-size grid."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy", inline="always")
def _grad(value, a, half, slope, bid):
    clicks = a * bid / (half + bid)
    dclicks = a * half / (half + bid) ** 2
    return value * dclicks - slope * clicks - slope * bid * dclicks


@njit(cache=True, error_model="numpy")
def brreg_roots(value, a, half, slope, prev, eta, bid_max, tol, max_iter, out):
    """Root of ``b - prev - eta * grad u(b)`` on ``[0, bid_max]`` per element.

    Bracketed Newton: the map is increasing, so each Newton step that leaves
    the current bracket is replaced by bisection.
    """
    for i in range(out.size):
        v, ai, hi_, si, p, e = value[i], a[i], half[i], slope[i], prev[i], eta[i]
        lo, hi = 0.0, bid_max
        g_lo = lo - p - e * _grad(v, ai, hi_, si, lo)
        if g_lo >= 0.0:
            out[i] = 0.0
            continue
        g_hi = hi - p - e * _grad(v, ai, hi_, si, hi)
        if g_hi <= 0.0:
            out[i] = bid_max
            continue
        b = min(max(p + e * _grad(v, ai, hi_, si, p), lo), hi)
        for _ in range(max_iter):
            g = b - p - e * _grad(v, ai, hi_, si, b)
            if abs(g) <= tol:
                break
            if g < 0.0:
                lo = b
            else:
                hi = b
            curv = -2.0 * ai * hi_ * (si * hi_ + v) / (hi_ + b) ** 3
            nxt = b - g / (1.0 - e * curv)
            if not (lo < nxt < hi):
                nxt = 0.5 * (lo + hi)
            if nxt == b:
                break
            b = nxt
        out[i] = b


@njit(cache=True, error_model="numpy")
def ftrl_grid_predictions(value, a, half, slope, beta, grid, targets, etas, bid_max, out):
    """One-step FTRL predictions for many step sizes at once.

    The discounted gradient sum ``D_s(g)`` over hours ``0..s`` is tabulated on
    ``grid``; the first-order condition ``D_s(b) = b / eta`` is inverted as
    ``eta = b / D_s(b)``, increasing in ``b`` while ``D_s > 0``, and read off
    by linear interpolation for every ``eta``.
    """
    n_grid = grid.size
    acc = np.zeros(n_grid)
    xs = np.empty(n_grid)
    j = 0
    last = targets[targets.size - 1] + 1
    for s in range(last):
        for k in range(n_grid):
            acc[k] = beta * acc[k] + _grad(value, a[s], half[s], slope[s], grid[k])
        while j < targets.size and targets[j] == s:
            n_pos = n_grid
            for k in range(n_grid):
                if not acc[k] > 0.0:
                    n_pos = k
                    break
            if n_pos <= 1:
                for q in range(etas.size):
                    out[q, j] = 0.0
                j += 1
                continue
            if n_pos == n_grid:
                top = bid_max
            else:
                g0, g1, d0, d1 = grid[n_pos - 1], grid[n_pos], acc[n_pos - 1], acc[n_pos]
                top = g0 + (g1 - g0) * d0 / (d0 - d1)
            xs[0] = 0.0
            for k in range(1, n_pos):
                xs[k] = grid[k] / acc[k]
            for q in range(etas.size):
                e = etas[q]
                if e >= xs[n_pos - 1]:
                    y = top if e > xs[n_pos - 1] else grid[n_pos - 1]
                else:
                    r = np.searchsorted(xs[:n_pos], e, side="right")
                    x0, x1 = xs[r - 1], xs[r]
                    y = grid[r - 1] + (grid[r] - grid[r - 1]) * (e - x0) / (x1 - x0)
                out[q, j] = min(max(y, 0.0), bid_max)
            j += 1
