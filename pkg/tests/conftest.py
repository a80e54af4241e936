import re

import numpy as np
import pytest

from regretbid.curves import CurveArrays
from regretbid.series import BidderSeries

_CRITERION = re.compile(r"test_criterion_(\d+)_")


def random_curves(rng, n, value=1.0):
    """Curves whose best reply sits at a moderate fraction of ``value``."""
    a = rng.uniform(0.05, 0.5, n)
    half = value * rng.uniform(0.3, 2.0, n)
    slope = rng.uniform(0.2, 1.0, n) / value
    return CurveArrays(a, half, slope)


def make_series(rng, n=120, value=1.0, bidder_id="b0", start_hour=0):
    curves = random_curves(rng, n, value)
    bids = value * rng.uniform(0.2, 0.8, n)
    return BidderSeries(bidder_id, start_hour + np.arange(n), bids, curves)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def series(rng):
    return make_series(rng)


# one line per acceptance criterion -------------------------------------------------


def pytest_configure(config):
    config._acceptance = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    store = getattr(pytest, "_acceptance_store", None)
    if store is None:
        return
    detail = dict(report.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = str(report.longrepr).strip().splitlines()[-1][:160]
    store[int(m.group(1))] = ("PASS" if report.passed else "FAIL", detail)


def pytest_sessionstart(session):
    pytest._acceptance_store = {}


def pytest_terminal_summary(terminalreporter):
    store = getattr(pytest, "_acceptance_store", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        status, detail = store[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
