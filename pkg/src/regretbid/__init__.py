"""No-regret econometric bid prediction for repeated sponsored-search auctions."""

__version__ = "0.1.0"
