"""Synthetic series that need no simulator."""

import numpy as np

from regretbid.curves import CurveArrays
from regretbid.series import BidderSeries


def iid_series(rng, bidder_id, days=30, sd=0.3):
    n = 24 * days
    curves = CurveArrays(rng.uniform(0.05, 0.5, n), rng.uniform(0.3, 2.0, n), rng.uniform(0.2, 1.0, n))
    return BidderSeries(bidder_id, np.arange(n), rng.lognormal(0.0, sd, n), curves)
