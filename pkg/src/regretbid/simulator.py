"""Synthetic repeated-auction markets with known ground truth.

Competition is exogenous. Each bidder faces its own stream of hourly
competition: a hour-level scale ``S`` multiplies the click curve's
half-saturation bid and divides the cost slope, which moves the best-reply
bid by exactly the factor ``S``. Per-auction jitter perturbs only the click
saturation level and the cost slope; all auctions in an hour share the
half-saturation bid and the realised bid, so the pooled least-squares fit of
an hour is exactly the auction-average curve. Bidders respond to that pooled
curve, which keeps simulated bids consistent with what aggregation recovers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import polars as pl

from .curves import MULTIPLIERS, CurveArrays
from .forecasters import FittedRule, RuleKind, next_bid
from .utility import REPEL, VisibilityParams, br_closed_form, ql_curvature

LOG_COLUMNS = ["bidder_id", "timestamp_hour", "auction_id", "multiplier", "bid", "click_prob", "cpc", "top_slot"]
START_HOUR = 438_288  # 2020-01-01 00:00 UTC
DAY_HOURS = range(10, 22)


@dataclass
class MarketConfig:
    n_bidders: int = 50
    horizon_hours: int = 240
    auctions_per_hour: float = 4.0
    value_range: tuple = (20.0, 400.0)
    a_range: tuple = (0.05, 0.4)
    half_rel_range: tuple = (0.5, 2.0)
    shade_range: tuple = (0.45, 0.65)
    diurnal_amplitude: float = 0.05
    hourly_sd: float = 0.1
    jitter_sd: float = 0.1
    shift_scenario: str = "none"
    day_uplift: float = 0.2
    bid_noise_sd: float = 0.01
    rules: tuple = ("OGD",)
    ogd_rate_range: tuple = (0.3, 0.8)
    brreg_rate_range: tuple = (0.3, 2.0)
    ftrl_rate_range: tuple = (2.0, 8.0)
    start_hour: int = START_HOUR
    seed: int = 0

    def __post_init__(self):
        if self.n_bidders < 1 or self.horizon_hours < 1:
            raise ValueError("n_bidders and horizon_hours must be positive")
        if self.auctions_per_hour <= 0:
            raise ValueError("auctions_per_hour must be positive")
        if self.diurnal_amplitude < 0 or self.hourly_sd < 0 or self.jitter_sd < 0 or self.bid_noise_sd < 0:
            raise ValueError("amplitudes and noise scales must be non-negative")
        if self.shift_scenario not in ("none", "daynight"):
            raise ValueError(f"unknown shift scenario {self.shift_scenario!r}")
        for lo, hi in (self.value_range, self.a_range, self.half_rel_range, self.shade_range):
            if not 0 < lo <= hi:
                raise ValueError("parameter ranges must be positive and ordered")


@dataclass
class GroundTruthBidder:
    bidder_id: str
    value: float
    rule: RuleKind
    eta: float | None
    beta: float = 0.9
    vis: VisibilityParams | None = None
    bid_noise_sd: float = 0.0
    a0: float = 0.2
    half0: float = 100.0
    slope0: float = 0.5
    init_bid: float | None = None

    def __post_init__(self):
        self.rule = RuleKind(self.rule)
        if not self.value > 0:
            raise ValueError("value must be positive")
        if self.bid_noise_sd < 0:
            raise ValueError("bid noise must be non-negative")

    @property
    def base_bid(self) -> float:
        return float(br_closed_form(self.value, self.a0, self.half0, self.slope0, math.inf))

    def rule_object(self) -> FittedRule:
        return FittedRule(self.rule, self.value, self.eta, self.beta, self.vis, bid_max=20.0 * self.value)

    def sidecar(self) -> dict:
        return {
            "value": self.value,
            "rule": self.rule.value,
            "eta": self.eta,
            "beta": self.beta,
            "vis_params": None if self.vis is None else {
                "alpha": self.vis.alpha, "vis0": self.vis.vis0, "sign": self.vis.sign,
            },
            "bid_noise_sd": self.bid_noise_sd,
        }


@dataclass
class SimulatedMarket:
    log: pd.DataFrame
    bidders: list
    hourly: dict = field(default_factory=dict)

    def truth_json(self) -> str:
        return json.dumps({b.bidder_id: b.sidecar() for b in self.bidders}, indent=2, sort_keys=True)


def slope_for_shade(value, half, shade):
    """Cost slope that puts the best reply at ``shade * value``."""
    b = shade * value
    return value * half / (b * b + 2.0 * half * b)


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def draw_bidders(config: MarketConfig, rules=None, vis: VisibilityParams | None = None) -> list:
    """Draw bidder environments and learning parameters from the config ranges."""
    rng = np.random.default_rng([config.seed, 0xB1D])
    rules = tuple(rules or config.rules)
    out = []
    for i in range(config.n_bidders):
        value = _log_uniform(rng, *config.value_range)
        a0 = float(rng.uniform(*config.a_range))
        half0 = value * float(rng.uniform(*config.half_rel_range))
        shade = float(rng.uniform(*config.shade_range))
        slope0 = slope_for_shade(value, half0, shade)
        kind = RuleKind(rules[i % len(rules)])
        b_star = shade * value
        curv = abs(float(ql_curvature(value, a0, half0, slope0, b_star)))
        rate_range = {
            RuleKind.BRReg: config.brreg_rate_range,
            RuleKind.FTRL: config.ftrl_rate_range,
        }.get(kind, config.ogd_rate_range)
        eta = float(rng.uniform(*rate_range)) / curv
        beta = 0.9
        if kind == RuleKind.FTL:
            eta, beta = math.inf, 1.0
        elif kind in (RuleKind.BR, RuleKind.MomentumBR):
            eta = None
        bias = None
        if kind == RuleKind.OGDBias:
            bias = VisibilityParams(value, vis.alpha, vis.vis0, vis.sign) if vis else VisibilityParams(value)
        out.append(
            GroundTruthBidder(
                f"b{i:04d}", value, kind, eta, beta, bias, config.bid_noise_sd, a0, half0, slope0
            )
        )
    return out


def competition_scale(config: MarketConfig, hour_of_day: np.ndarray) -> np.ndarray:
    hod = np.asarray(hour_of_day)
    if config.shift_scenario == "daynight":
        return np.where((hod >= 10) & (hod <= 21), 1.0 + config.day_uplift, 1.0)
    return 1.0 + config.diurnal_amplitude * np.cos(2.0 * np.pi * (hod - 15.5) / 24.0)


def _simulate_bidder(config: MarketConfig, bidder: GroundTruthBidder, index: int):
    rng = np.random.default_rng([config.seed, index])
    T = config.horizon_hours
    hours = config.start_hour + np.arange(T)
    scale = competition_scale(config, hours % 24) * np.exp(rng.normal(0.0, config.hourly_sd, T))
    a_hour = bidder.a0 * np.exp(rng.normal(0.0, config.hourly_sd, T))
    counts = np.maximum(rng.poisson(config.auctions_per_hour, T), 1)
    total = int(counts.sum())
    a_auction = np.repeat(a_hour, counts) * np.exp(rng.normal(0.0, config.jitter_sd, total))
    slope_auction = np.repeat(bidder.slope0 / scale, counts) * np.exp(rng.normal(0.0, config.jitter_sd, total))
    noise = np.exp(rng.normal(0.0, bidder.bid_noise_sd, T)) if bidder.bid_noise_sd > 0 else np.ones(T)
    top_draw = rng.random(total)

    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    curves = CurveArrays(
        np.add.reduceat(a_auction, starts) / counts,
        bidder.half0 * scale,
        np.add.reduceat(slope_auction, starts) / counts,
    )

    rule = bidder.rule_object()
    floor = 1e-6 * bidder.value
    bids = np.empty(T)
    init = bidder.init_bid if bidder.init_bid is not None else bidder.base_bid
    bids[0] = max(init * float(np.exp(rng.normal(0.0, bidder.bid_noise_sd))) if bidder.bid_noise_sd > 0 else init, floor)
    for t in range(1, T):
        bids[t] = max(next_bid(rule, float(bids[t - 1]), curves, t) * noise[t], floor)

    bid_auction = np.repeat(bids, counts)
    half_auction = np.repeat(curves.half, counts)
    vis = bid_auction / (half_auction + bid_auction)
    top = (top_draw < vis * vis).astype(np.int64)

    m = np.array(MULTIPLIERS)
    cf_bid = bid_auction[:, None] * m[None, :]
    click = a_auction[:, None] * cf_bid / (half_auction[:, None] + cf_bid)
    cpc = slope_auction[:, None] * cf_bid
    n_m = len(m)
    frame = pd.DataFrame(
        {
            "bidder_id": bidder.bidder_id,
            "timestamp_hour": np.repeat(np.repeat(hours, counts), n_m),
            "auction_id": np.repeat(np.arange(total), n_m),
            "multiplier": np.tile(m, total),
            "bid": cf_bid.ravel(),
            "click_prob": click.ravel(),
            "cpc": cpc.ravel(),
            "top_slot": np.repeat(top, n_m),
        },
        columns=LOG_COLUMNS,
    )
    hourly = {"hours": hours, "bids": bids, "curves": curves, "n_auctions": counts}
    return frame, hourly


def generate_market(config: MarketConfig, bidders=None) -> SimulatedMarket:
    """Simulate every bidder and emit the raw counterfactual log."""
    bidders = draw_bidders(config) if bidders is None else list(bidders)
    frames, hourly = [], {}
    for i, bidder in enumerate(bidders):
        frame, h = _simulate_bidder(config, bidder, i)
        frames.append(frame)
        hourly[bidder.bidder_id] = h
    log = pd.concat(frames, ignore_index=True)
    return SimulatedMarket(log, bidders, hourly)


def generate_shift_market(config: MarketConfig, bidders=None) -> SimulatedMarket:
    if config.shift_scenario != "daynight":
        raise ValueError("generate_shift_market requires shift_scenario='daynight'")
    return generate_market(config, bidders)


def write_market(market: SimulatedMarket, log_path, truth_path) -> None:
    # polars formats floats with the shortest round-trip repr, same text as pandas but far faster
    pl.from_pandas(market.log).write_csv(log_path)
    with open(truth_path, "w") as fh:
        fh.write(market.truth_json())
        fh.write("\n")


def config_dict(config: MarketConfig) -> dict:
    return asdict(config)
