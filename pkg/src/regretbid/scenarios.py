"""Named market presets used by the experiment scripts and the acceptance suite."""

from __future__ import annotations

from .simulator import MarketConfig

NO_REGRET_RULES = ("OGD", "BRReg", "FTRL")


def recovery_market(seed: int = 0, n_bidders: int = 50, horizon_hours: int = 300) -> MarketConfig:
    """OGD and FTRL bidders with 1% bid noise, for value recovery."""
    return MarketConfig(
        n_bidders=n_bidders, horizon_hours=horizon_hours, bid_noise_sd=0.01, rules=("OGD", "FTRL"), seed=seed
    )


def insample_market(seed: int = 0, n_bidders: int = 50, horizon_hours: int = 240) -> MarketConfig:
    """Slow learners with behavioural noise and volatile competition.

    Bids wander with the competition and with persistent noise, so a lag-2
    regression can track them about as well as the learning rule, while a
    myopic best reply overshoots every hourly swing.
    """
    return MarketConfig(
        n_bidders=n_bidders,
        horizon_hours=horizon_hours,
        bid_noise_sd=0.08,
        hourly_sd=0.2,
        rules=NO_REGRET_RULES,
        ogd_rate_range=(0.05, 0.2),
        brreg_rate_range=(0.05, 0.3),
        ftrl_rate_range=(0.3, 1.0),
        seed=seed,
    )


def shift_market(seed: int = 0, n_bidders: int = 40, horizon_hours: int = 240, day_uplift: float = 0.2) -> MarketConfig:
    """Day/night covariate shift: competition eases by ``day_uplift`` from 10:00 to 21:59."""
    return MarketConfig(
        n_bidders=n_bidders,
        horizon_hours=horizon_hours,
        hourly_sd=0.2,
        rules=NO_REGRET_RULES,
        shift_scenario="daynight",
        day_uplift=day_uplift,
        seed=seed,
    )


def bias_market(seed: int = 0, n_bidders: int = 10, horizon_hours: int = 200, noise: float = 0.0) -> MarketConfig:
    """OGDBias bidders for recovering (alpha, vis0).

    Values start at 100 so that a bias of alpha = 50 is comparable to the
    quasi-linear utility; the volatile competition moves visibility enough
    for alpha and vis0 to be told apart.
    """
    return MarketConfig(
        n_bidders=n_bidders,
        horizon_hours=horizon_hours,
        value_range=(100.0, 400.0),
        hourly_sd=0.2,
        bid_noise_sd=noise,
        rules=("OGDBias",),
        seed=seed,
    )


def scale_market(seed: int = 0, n_bidders: int = 200, horizon_hours: int = 240) -> MarketConfig:
    """The default market at full scale, for the runtime and determinism check."""
    return MarketConfig(n_bidders=n_bidders, horizon_hours=horizon_hours, rules=NO_REGRET_RULES, seed=seed)


PRESETS = {
    "recovery": recovery_market,
    "insample": insample_market,
    "shift": shift_market,
    "bias": bias_market,
    "scale": scale_market,
}
