"""Realised day/night bid ratio of the shift simulator, per learning rule.

    python scripts/uplift_ratio.py --seeds 50
"""

import argparse

import numpy as np

from regretbid.simulator import MarketConfig, generate_shift_market


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--uplift", type=float, default=0.2)
    p.add_argument("--rules", default="OGD,BRReg,FTRL,BR")
    args = p.parse_args()
    for rule in args.rules.split(","):
        ratios = []
        for seed in range(args.seeds):
            cfg = MarketConfig(n_bidders=4, horizon_hours=120, rules=(rule,), shift_scenario="daynight",
                               day_uplift=args.uplift, seed=seed)
            for h in generate_shift_market(cfg).hourly.values():
                hod, bids = (h["hours"] % 24)[24:], h["bids"][24:]
                day = (hod >= 10) & (hod <= 21)
                ratios.append(bids[day].mean() / bids[~day].mean())
        lo, hi = np.percentile(ratios, [5, 95])
        print(f"{rule:6s} mean {np.mean(ratios):.4f}  p5-p95 [{lo:.3f}, {hi:.3f}]")


if __name__ == "__main__":
    main()
