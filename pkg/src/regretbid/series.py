"""Per-bidder hourly series: bids aligned with that hour's fitted curves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import CurveArrays, HourlyCurveSet

HOURS_PER_DAY = 24


@dataclass
class BidderSeries:
    bidder_id: str
    hours: np.ndarray
    bids: np.ndarray
    curves: CurveArrays
    n_auctions: np.ndarray | None = None
    train_end: int | None = None
    won_top_slot_ever: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hours = np.asarray(self.hours, dtype=np.int64)
        self.bids = np.asarray(self.bids, dtype=float)
        if self.n_auctions is None:
            self.n_auctions = np.ones(len(self.bids), dtype=np.int64)
        if not (len(self.hours) == len(self.bids) == len(self.curves)):
            raise ValueError("hours, bids and curves must be aligned")

    def __len__(self):
        return len(self.bids)

    def take(self, idx) -> "BidderSeries":
        idx = np.asarray(idx)
        return BidderSeries(
            self.bidder_id,
            self.hours[idx],
            self.bids[idx],
            self.curves[idx],
            self.n_auctions[idx],
            None,
            self.won_top_slot_ever,
            dict(self.meta),
        )

    def head(self, n: int) -> "BidderSeries":
        return self.take(np.arange(n))

    @property
    def train(self) -> "BidderSeries":
        return self.head(self.train_end)

    @property
    def train_idx(self) -> np.ndarray:
        return np.arange(self.train_end)

    @property
    def test_idx(self) -> np.ndarray:
        return np.arange(self.train_end, len(self))

    @property
    def days(self) -> np.ndarray:
        return self.hours // HOURS_PER_DAY

    @property
    def hour_of_day(self) -> np.ndarray:
        return self.hours % HOURS_PER_DAY

    def curve_set(self, i: int) -> HourlyCurveSet:
        return self.curves.at(i, int(self.hours[i]), int(self.n_auctions[i]))


def adjacent_pairs(idx) -> np.ndarray:
    """Positions ``t`` with both ``t`` and ``t + 1`` in the index set."""
    idx = np.asarray(idx)
    keep = np.zeros(idx.max() + 2 if idx.size else 1, dtype=bool)
    keep[idx] = True
    return idx[keep[idx + 1]]
