"""Shared helpers for the experiment scripts."""

import logging
from pathlib import Path

from regretbid.dataset import aggregate_hourly, filter_bidders
from regretbid.simulator import generate_market


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


def simulate_series(config):
    """Simulate a market and return its aggregated, filtered series and the market."""
    market = generate_market(config)
    return filter_bidders(aggregate_hourly(market.log)), market


def out_dir(path) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
