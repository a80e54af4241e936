import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regretbid.errors import TooFewScores, ZeroTrueBid
from regretbid.evaluation import MapeScore, dist_stats, hourly_profile, mape


def brute_stats(x):
    """Sort-and-formula oracle: linear-interpolated quartiles, 1.5 IQR fences."""
    s = sorted(float(v) for v in x)
    n = len(s)

    def q(p):
        h = (n - 1) * p
        lo = math.floor(h)
        hi = min(lo + 1, n - 1)
        return s[lo] + (h - lo) * (s[hi] - s[lo])

    q1, med, q3 = q(0.25), q(0.5), q(0.75)
    lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
    kept = [v for v in s if lo <= v <= hi]
    m = sum(kept) / len(kept)
    sd = math.sqrt(sum((v - m) ** 2 for v in kept) / (len(kept) - 1))
    se = sd / math.sqrt(len(kept))
    return dict(q1=q1, median=med, q3=q3, whisker_lo=min(kept), whisker_hi=max(kept), mean_excl=m, stderr=se,
                lb=m - 1.96 * se, ub=m + 1.96 * se, n=n, n_outliers=n - len(kept))


def test_mape_examples():
    assert mape([1, 2], [1.1, 1.8]) == pytest.approx(0.10, abs=1e-15)
    assert mape([3.0, 4.0], [3.0, 4.0]) == 0.0
    assert mape([2.0], [0.0]) == 1.0
    with pytest.raises(ZeroTrueBid):
        mape([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        mape([1.0], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(c=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_mape_scale_invariant(c, seed):
    rng = np.random.default_rng(seed)
    t, p = rng.uniform(0.1, 5, 20), rng.uniform(0, 5, 20)
    assert mape(c * t, c * p) == pytest.approx(mape(t, p), rel=1e-12)


def test_mape_score_validation():
    MapeScore("b", "OGD", "series", 0.1, 3)
    with pytest.raises(ValueError):
        MapeScore("b", "OGD", "series", math.nan, 3)
    with pytest.raises(ValueError):
        MapeScore("b", "OGD", "series", 0.1, 0)


def test_quartiles_by_hand():
    st_ = dist_stats([1, 2, 3, 4])
    assert (st_.q1, st_.median, st_.q3) == (1.75, 2.5, 3.25)
    assert st_.mean_excl == 2.5 and st_.n_outliers == 0


def test_outlier_excluded():
    x = [0.1, 0.12, 0.15, 0.18, 0.2, 100.0]
    st_ = dist_stats(x)
    assert st_.n_outliers == 1
    assert st_.mean_excl == pytest.approx(np.mean(x[:-1]))
    assert st_.whisker_hi == 0.2
    lb, ub = st_.ci95
    assert ub - st_.mean_excl == pytest.approx(1.96 * st_.stderr)
    assert st_.mean_excl - lb == pytest.approx(1.96 * st_.stderr)


def test_too_few_scores():
    with pytest.raises(TooFewScores):
        dist_stats([1.0, 2.0, 3.0])


@pytest.mark.parametrize("seed", range(20))
def test_dist_stats_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    x = rng.lognormal(-1.5, 1.0, rng.integers(4, 200))
    got = dist_stats(x).row()
    for k, v in brute_stats(x).items():
        assert got[k] == pytest.approx(v, rel=1e-12, abs=1e-12), k


def test_hourly_profile():
    flat = np.full(24, 3.0)
    mean, q25, q75 = hourly_profile([flat, 2 * flat])
    np.testing.assert_allclose(mean, 1.0)
    day = np.where((np.arange(24) >= 10) & (np.arange(24) <= 21), 1.2, 1.0)
    mean, q25, q75 = hourly_profile([day])
    np.testing.assert_allclose(mean, day / day.mean())
    np.testing.assert_allclose(q25, mean)
    with pytest.raises(ValueError):
        hourly_profile([])
    with pytest.raises(ValueError):
        hourly_profile([np.ones(12)])


def test_hourly_profile_on_simulated_shift_days():
    from regretbid.dataset import aggregate_hourly, build_shift_dataset
    from regretbid.simulator import MarketConfig, generate_shift_market

    m = generate_shift_market(MarketConfig(n_bidders=6, shift_scenario="daynight", seed=2))
    inst = build_shift_dataset(aggregate_hourly(m.log))
    assert inst
    mean, _, _ = hourly_profile(inst)
    # bids answer the previous hour's curves, so hours 10 and 22 straddle the switch
    hod = np.arange(24)
    day = (hod >= 11) & (hod <= 21)
    night = (hod >= 23) | (hod <= 9)
    assert np.all(mean[day] > 1.0) and np.all(mean[night] < 1.0)
