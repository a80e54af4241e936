"""Raw-log ingestion, hourly aggregation, bidder filters, splits and the shift dataset."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .curves import CurveArrays, fit_click_batch, fit_cost_batch
from .errors import SchemaError, TooShort
from .series import HOURS_PER_DAY, BidderSeries

__all__ = [
    "BidderSeries", "REQUIRED_COLUMNS", "ShiftInstance", "aggregate_hourly", "build_shift_dataset",
    "filter_bidders", "ks_pvalue", "read_manifest", "read_raw_log", "split_train_test", "write_manifest",
]

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ["bidder_id", "timestamp_hour", "auction_id", "multiplier", "bid", "click_prob", "cpc"]
NUMERIC_COLUMNS = ["timestamp_hour", "auction_id", "multiplier", "bid", "click_prob", "cpc"]
DAY_HOURS = tuple(range(10, 22))
MIN_ACTIVE_HOURS = 100
TRAIN_FRACTION = (9, 10)
_FIT_CHUNK = 4096


# ingestion -------------------------------------------------------------------


def _bad_rows(mask) -> list:
    # data row r sits on file line r + 2 (one header line, 1-based lines)
    return (np.flatnonzero(np.asarray(mask)) + 2).tolist()


def _fail(what: str, mask) -> None:
    rows = _bad_rows(mask)
    if rows:
        shown = ", ".join(map(str, rows[:10])) + (" ..." if len(rows) > 10 else "")
        raise SchemaError(f"{what} at line(s) {shown}")


def validate_log(frame: pd.DataFrame) -> pd.DataFrame:
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    out = frame.copy()
    _fail("empty bidder_id", out["bidder_id"].isna() | (out["bidder_id"].astype(str).str.len() == 0))
    out["bidder_id"] = out["bidder_id"].astype(str)
    for col in NUMERIC_COLUMNS + (["top_slot"] if "top_slot" in out.columns else []):
        num = pd.to_numeric(out[col], errors="coerce")
        _fail(f"non-numeric {col}", num.isna() | ~np.isfinite(num.to_numpy(dtype=float, na_value=np.nan)))
        out[col] = num
    for col in ("timestamp_hour", "auction_id"):
        _fail(f"non-integer {col}", out[col] != np.floor(out[col]))
        out[col] = out[col].astype(np.int64)
    _fail("non-positive bid", out["bid"] <= 0)
    _fail("non-positive multiplier", out["multiplier"] <= 0)
    _fail("negative click_prob", out["click_prob"] < 0)
    _fail("negative cpc", out["cpc"] < 0)
    if "top_slot" in out.columns:
        _fail("top_slot not 0/1", ~out["top_slot"].isin([0, 1]))
        out["top_slot"] = out["top_slot"].astype(np.int64)
    return out


def read_raw_log(path) -> pd.DataFrame:
    """Read and validate a counterfactual-point CSV; errors name the offending lines."""
    try:
        frame = pd.read_csv(path, dtype={"bidder_id": str}, keep_default_na=False, na_values=[""])
    except pd.errors.ParserError as exc:
        raise SchemaError(f"malformed CSV: {exc}") from exc
    return validate_log(frame)


# aggregation -----------------------------------------------------------------


def _padded(group_ids, n_groups, *columns):
    order = np.argsort(group_ids, kind="stable")
    gid = group_ids[order]
    counts = np.bincount(gid, minlength=n_groups)
    width = int(counts.max()) if n_groups else 0
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    pos = np.arange(len(gid)) - np.repeat(starts, counts)
    mask = np.zeros((n_groups, width), dtype=bool)
    mask[gid, pos] = True
    outs = []
    for col in columns:
        arr = np.zeros((n_groups, width))
        arr[gid, pos] = np.asarray(col, dtype=float)[order]
        outs.append(arr)
    return mask, outs


def _collapse(group_ids, bids, probs, cpcs):
    """Merge points sharing (group, bid) into their mean with a count weight.

    Least squares over duplicated abscissae equals weighted least squares
    over their means, so the fits are unchanged while the padded width drops
    to the number of distinct bids per group.
    """
    order = np.lexsort((bids, group_ids))
    g, b = group_ids[order], bids[order]
    start = np.ones(len(g), dtype=bool)
    start[1:] = (g[1:] != g[:-1]) | (b[1:] != b[:-1])
    key = np.cumsum(start) - 1
    n = int(key[-1]) + 1 if len(key) else 0
    counts = np.bincount(key, minlength=n).astype(float)
    mean_p = np.bincount(key, weights=probs[order], minlength=n) / counts
    mean_c = np.bincount(key, weights=cpcs[order], minlength=n) / counts
    return g[start], b[start], mean_p, mean_c, counts


def fit_hour_groups(group_ids, n_groups, bids, probs, cpcs):
    """Pooled click and cost fits for every group of points, in chunks."""
    a = np.zeros(n_groups)
    half = np.ones(n_groups)
    slope = np.zeros(n_groups)
    ok = np.zeros(n_groups, dtype=bool)
    group_ids, bids, probs, cpcs, weights = _collapse(np.asarray(group_ids), bids, probs, cpcs)
    bounds = np.searchsorted(group_ids, np.arange(0, n_groups + _FIT_CHUNK, _FIT_CHUNK))
    for c, lo in enumerate(range(0, n_groups, _FIT_CHUNK)):
        hi = min(lo + _FIT_CHUNK, n_groups)
        sl = slice(bounds[c], bounds[c + 1])
        mask, (b, p, k, w) = _padded(group_ids[sl] - lo, hi - lo, bids[sl], probs[sl], cpcs[sl], weights[sl])
        ca, ch, cok = fit_click_batch(b, p, mask, w)
        cs, sok = fit_cost_batch(b, k, mask, w)
        a[lo:hi], half[lo:hi], slope[lo:hi], ok[lo:hi] = ca, ch, cs, cok & sok
    return a, half, slope, ok


def aggregate_hourly(raw_log: pd.DataFrame) -> list:
    """One series per bidder: hourly mean realised bid and pooled curve fits.

    The realised bid of an auction is recovered from its points as
    ``bid / multiplier``; the hour's bid is the mean over its auctions.
    Hours whose click fit is degenerate are dropped and counted in
    ``meta["dropped_hours"]``.
    """
    frame = raw_log
    keys = frame[["bidder_id", "timestamp_hour"]]
    hour_codes, hour_keys = pd.MultiIndex.from_frame(keys).factorize()
    hour_codes = np.asarray(hour_codes)
    n_hours = len(hour_keys)
    bids = frame["bid"].to_numpy(dtype=float)
    mult = frame["multiplier"].to_numpy(dtype=float)
    auction_codes = pd.MultiIndex.from_arrays(
        [hour_codes, frame["auction_id"].to_numpy()]
    ).factorize()[0]
    n_auc = int(auction_codes.max()) + 1 if len(auction_codes) else 0
    realised = np.bincount(auction_codes, weights=bids / mult, minlength=n_auc) / np.bincount(
        auction_codes, minlength=n_auc
    )
    auction_hour = np.zeros(n_auc, dtype=np.int64)
    auction_hour[auction_codes] = hour_codes
    n_auctions = np.bincount(auction_hour, minlength=n_hours)
    mean_bid = np.bincount(auction_hour, weights=realised, minlength=n_hours) / n_auctions

    a, half, slope, ok = fit_hour_groups(
        hour_codes, n_hours, bids, frame["click_prob"].to_numpy(dtype=float), frame["cpc"].to_numpy(dtype=float)
    )
    if "top_slot" in frame.columns:
        top = np.bincount(hour_codes, weights=frame["top_slot"].to_numpy(dtype=float), minlength=n_hours) > 0
    else:
        top = np.ones(n_hours, dtype=bool)

    bidder_of = np.asarray(hour_keys.get_level_values(0))
    hour_of = np.asarray(hour_keys.get_level_values(1), dtype=np.int64)
    out = []
    for bidder in sorted(set(bidder_of.tolist())):
        rows = np.flatnonzero(bidder_of == bidder)
        rows = rows[np.argsort(hour_of[rows], kind="stable")]
        good = rows[ok[rows]]
        dropped = len(rows) - len(good)
        if dropped:
            log.info("bidder %s: dropped %d degenerate hour(s)", bidder, dropped)
        curves = CurveArrays(a[good], half[good], slope[good])
        out.append(
            BidderSeries(
                bidder, hour_of[good], mean_bid[good], curves, n_auctions[good], None,
                bool(top[rows].any()), {"dropped_hours": int(dropped), "raw_hours": int(len(rows))},
            )
        )
    return out


# filters and split -----------------------------------------------------------


def split_train_test(series: BidderSeries) -> BidderSeries:
    n = len(series)
    if n < 10:
        raise TooShort(f"bidder {series.bidder_id} has {n} hours; a split needs at least 10")
    out = series.take(np.arange(n))
    out.train_end = n * TRAIN_FRACTION[0] // TRAIN_FRACTION[1]
    return out


FILTERS = ("too_few_hours", "never_top_slot", "non_positive_bid", "zero_variance")


def filter_reason(series: BidderSeries, min_hours: int = MIN_ACTIVE_HOURS) -> str | None:
    if len(series) < min_hours:
        return "too_few_hours"
    if not series.won_top_slot_ever:
        return "never_top_slot"
    if not np.all(series.bids > 0):
        return "non_positive_bid"
    s = series if series.train_end is not None else split_train_test(series)
    b = s.bids
    if np.ptp(b[: s.train_end]) == 0 or np.ptp(b[s.train_end:]) == 0:
        return "zero_variance"
    return None


def filter_bidders(series_list, min_hours: int = MIN_ACTIVE_HOURS, counts: dict | None = None) -> list:
    """Keep bidders with enough hours, a top-slot win, positive bids and varying train and test bids.

    Series without a split are split before the variance check. Drop counts
    per filter are added into ``counts`` when given.
    """
    kept = []
    for s in series_list:
        reason = filter_reason(s, min_hours)
        if reason is None:
            kept.append(s if s.train_end is not None else split_train_test(s))
        else:
            log.info("bidder %s dropped: %s", s.bidder_id, reason)
            if counts is not None:
                counts[reason] = counts.get(reason, 0) + 1
    return kept


# covariate-shift dataset -------------------------------------------------------


@dataclass
class ShiftInstance:
    bidder_id: str
    test_day: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    ks_p: float
    t_p: float
    ks_stat: float = float("nan")
    day_mean: float = float("nan")
    night_mean: float = float("nan")
    day_bids: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def test_date(self) -> str:
        return str(np.datetime64(int(self.test_day), "D"))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("train_idx", "test_idx", "day_bids"):
            d[k] = np.asarray(d[k]).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ShiftInstance":
        d = dict(d)
        d["train_idx"] = np.asarray(d["train_idx"], dtype=np.int64)
        d["test_idx"] = np.asarray(d["test_idx"], dtype=np.int64)
        d["day_bids"] = np.asarray(d["day_bids"], dtype=float)
        return cls(**d)


def ks_pvalue(x, y) -> tuple:
    """Two-sample KS statistic and its asymptotic (Kolmogorov distribution) p-value."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    d = float(stats.ks_2samp(x, y, method="asymp").statistic)
    en = len(x) * len(y) / (len(x) + len(y))
    return d, float(stats.kstwobign.sf(np.sqrt(en) * d))


def is_day_hour(hour_of_day) -> np.ndarray:
    hod = np.asarray(hour_of_day)
    return (hod >= DAY_HOURS[0]) & (hod <= DAY_HOURS[-1])


def build_shift_dataset(
    series_list, ks_alpha: float = 1e-3, t_alpha: float = 0.05, min_cv: float = 0.1, counts: dict | None = None
) -> list:
    """Days whose day-time bids are shifted above the bidder's pooled night bids.

    A candidate day has bids in all 24 hours and a coefficient of variation
    of at least ``min_cv`` over those 24 bids. It is accepted when the KS
    test against all night bids gives ``p < ks_alpha`` and a Welch t-test
    gives ``p < t_alpha`` with the day mean above the night mean.
    ``counts``, if given, receives the number of candidate and accepted days.
    """
    out = []
    n_candidates = 0
    for s in series_list:
        days = s.days
        hod = s.hour_of_day
        night = ~is_day_hour(hod)
        train_idx = np.flatnonzero(night)
        night_bids = s.bids[night]
        if len(night_bids) < 2:
            continue
        for day in np.unique(days):
            idx = np.flatnonzero(days == day)
            if len(idx) != HOURS_PER_DAY:
                continue
            bids = s.bids[idx]
            mean = bids.mean()
            if not mean > 0 or bids.std() / mean < min_cv:
                continue
            n_candidates += 1
            test_idx = idx[is_day_hour(hod[idx])]
            day_bids = s.bids[test_idx]
            d, ks_p = ks_pvalue(day_bids, night_bids)
            if not ks_p < ks_alpha:
                continue
            t_p = float(stats.ttest_ind(day_bids, night_bids, equal_var=False).pvalue)
            if not (t_p < t_alpha and day_bids.mean() > night_bids.mean()):
                continue
            out.append(
                ShiftInstance(
                    s.bidder_id, int(day), train_idx, test_idx, ks_p, t_p, d,
                    float(day_bids.mean()), float(night_bids.mean()), bids.copy(),
                )
            )
    if counts is not None:
        counts["candidate_days"] = n_candidates
        counts["accepted_days"] = len(out)
    return out


# manifests ---------------------------------------------------------------------


def series_to_dict(s: BidderSeries) -> dict:
    return {
        "bidder_id": s.bidder_id,
        "hours": s.hours.tolist(),
        "bids": s.bids.tolist(),
        "a": s.curves.a.tolist(),
        "half": s.curves.half.tolist(),
        "slope": s.curves.slope.tolist(),
        "n_auctions": np.asarray(s.n_auctions).tolist(),
        "train_end": s.train_end,
        "won_top_slot_ever": s.won_top_slot_ever,
        "meta": s.meta,
    }


def series_from_dict(d: dict) -> BidderSeries:
    curves = CurveArrays(np.asarray(d["a"], float), np.asarray(d["half"], float), np.asarray(d["slope"], float))
    return BidderSeries(
        d["bidder_id"], d["hours"], d["bids"], curves, np.asarray(d["n_auctions"], dtype=np.int64),
        d.get("train_end"), bool(d.get("won_top_slot_ever", True)), dict(d.get("meta", {})),
    )


def write_manifest(path, series_list, drop_counts=None, shift=None, info=None) -> None:
    doc = {
        "info": info or {},
        "drop_counts": drop_counts or {},
        "bidders": [series_to_dict(s) for s in series_list],
        "shift_instances": None if shift is None else [inst.to_dict() for inst in shift],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    doc["bidders"] = [series_from_dict(d) for d in doc["bidders"]]
    if doc.get("shift_instances") is not None:
        doc["shift_instances"] = [ShiftInstance.from_dict(d) for d in doc["shift_instances"]]
    return doc

