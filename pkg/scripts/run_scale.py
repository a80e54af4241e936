"""Full pipeline at 200 bidders x 240 hours through the CLI, timed per stage.

    python scripts/run_scale.py --out results/scale
"""

import argparse
import dataclasses
import subprocess
import sys
import time
from pathlib import Path

from regretbid.config import RunConfig, dump_config
from regretbid.scenarios import scale_market


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--full-mlp", action="store_true", help="refit MLP2 at every stepahead hour")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(simulate=scale_market(seed=args.seed))
    cfg = dataclasses.replace(
        cfg,
        baselines=dataclasses.replace(cfg.baselines, mlp_stepahead_retrain=args.full_mlp),
        run=dataclasses.replace(cfg.run, jobs=args.jobs),
    )
    conf = out / "scale.ini"
    conf.write_text(dump_config(cfg))
    total = 0.0
    for cmd in ("simulate", "prepare", "run"):
        t0 = time.perf_counter()
        subprocess.run([sys.executable, "-m", "regretbid", cmd, "--out", str(out), "--config", str(conf)], check=True)
        dt = time.perf_counter() - t0
        total += dt
        print(f"{cmd:9s} {dt:7.1f}s")
    print(f"{'total':9s} {total:7.1f}s")


if __name__ == "__main__":
    main()
