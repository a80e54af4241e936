"""In-sample comparison on the behavioural-noise market (series and stepahead, every method).

    python scripts/run_insample.py --seeds 0 1 2 --out results/insample
"""

import argparse

from _common import out_dir, setup_logging, simulate_series
from regretbid.baselines import BaselineOptions
from regretbid.experiment import ALL_METHODS, ExperimentConfig, insample_tasks, run_experiment
from regretbid.reports import markdown_table, write_report
from regretbid.scenarios import insample_market


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--bidders", type=int, default=50)
    p.add_argument("--methods", default=",".join(ALL_METHODS))
    p.add_argument("--fast-mlp", action="store_true", help="MLP stepahead without refitting")
    p.add_argument("--jobs", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    setup_logging(args.verbose)
    base = out_dir(args.out)
    for seed in args.seeds:
        series, _ = simulate_series(insample_market(seed=seed, n_bidders=args.bidders))
        cfg = ExperimentConfig(
            methods=tuple(args.methods.split(",")),
            baselines=BaselineOptions(seed=seed, mlp_stepahead_retrain=not args.fast_mlp),
            jobs=args.jobs,
        )
        rep = run_experiment(insample_tasks(series), cfg)
        print(f"\nseed {seed}: {len(series)} bidders")
        print(markdown_table(rep.summary, ["mode", "rank", "method", "mean_excl", "lb", "ub", "n"]))
        print(f"AR2/OGD {rep.mean_mape('AR2', 'series') / rep.mean_mape('OGD', 'series'):.3f}  "
              f"BR/OGD {rep.mean_mape('BR', 'series') / rep.mean_mape('OGD', 'series'):.3f}")
        if base:
            write_report(rep, base / f"seed{seed}", {"scenario": "insample", "seed": seed}, "MAPE summary, in-sample")


if __name__ == "__main__":
    main()
