"""Acceptance rate of the shift filter when day and night bids share one distribution.

Reports two nulls: independent draws, and a simulated market with zero day
uplift (learning dynamics make consecutive hours correlated).

    python scripts/calibrate_null.py --seeds 0 1 2 3 4
"""

import argparse

import numpy as np

from _common import setup_logging, simulate_series
from synthetic import iid_series
from regretbid.dataset import build_shift_dataset
from regretbid.scenarios import shift_market


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--bidders", type=int, default=40)
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    setup_logging(args.verbose)
    tot = {"iid": [0, 0], "market": [0, 0]}
    for seed in args.seeds:
        rng = np.random.default_rng(seed)
        for name, series in (
            ("iid", [iid_series(rng, f"n{i}", days=30) for i in range(args.bidders)]),
            ("market", simulate_series(shift_market(seed=seed, n_bidders=args.bidders, day_uplift=0.0))[0]),
        ):
            c = {}
            build_shift_dataset(series, counts=c)
            tot[name][0] += c["accepted_days"]
            tot[name][1] += c["candidate_days"]
            print(f"seed {seed} {name:6s} {c['accepted_days']}/{c['candidate_days']}")
    for name, (acc, cand) in tot.items():
        print(f"{name:6s} acceptance {acc}/{cand} = {acc / max(cand, 1):.2%}")


if __name__ == "__main__":
    main()
