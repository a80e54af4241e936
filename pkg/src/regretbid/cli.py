"""Command-line entry point: simulate, prepare, run, report.

Every command works inside one output directory (``--out``). Paths in the
``[paths]`` config section are resolved against it unless absolute.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import __version__
from .config import RunConfig, load_config
from .dataset import (
    FILTERS,
    aggregate_hourly,
    build_shift_dataset,
    filter_bidders,
    read_manifest,
    read_raw_log,
    write_manifest,
)
from .errors import ConfigError, RegretBidError
from .experiment import (
    ALL_METHODS,
    ECON_METHODS,
    ML_METHODS,
    MODES,
    EvalReport,
    ExperimentConfig,
    insample_tasks,
    run_experiment,
    shift_tasks,
    summarize,
)
from .reports import summary_markdown, write_report
from .simulator import generate_market, write_market

log = logging.getLogger("regretbid")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
METHOD_GROUPS = {"all": ALL_METHODS, "econ": ECON_METHODS, "ml": ML_METHODS}


class UsageError(Exception):
    pass


def parse_methods(text: str) -> tuple:
    out = []
    for item in (t.strip() for t in text.split(",")):
        if not item:
            continue
        group = METHOD_GROUPS.get(item.lower())
        if group:
            out.extend(group)
        elif item in ALL_METHODS:
            out.append(item)
        else:
            raise UsageError(f"unknown method {item!r}; choose from {', '.join(ALL_METHODS)} or all/econ/ml")
    return tuple(dict.fromkeys(out))


def parse_modes(text: str) -> tuple:
    if text.strip().lower() in ("both", "all"):
        return MODES
    out = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [m for m in out if m not in MODES]
    if bad or not out:
        raise UsageError(f"unknown mode(s) {bad}; choose from {', '.join(MODES)} or both")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regretbid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out", required=True, help="existing working/output directory")
    common.add_argument("--seed", type=int, help="override every seed of the command")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="generate a synthetic market")
    s.add_argument("--shift", action="store_true", help="day/night covariate-shift market")
    s = sub.add_parser("prepare", parents=[common], help="aggregate, filter, split; optional shift dataset")
    s.add_argument("--shift", action="store_true", help="also build the covariate-shift instances")
    s = sub.add_parser("run", parents=[common], help="fit, predict and score the experiment matrix")
    s.add_argument("--methods", help="comma list of methods, or all/econ/ml")
    s.add_argument("--modes", help="comma list of series/stepahead, or both")
    s.add_argument("--shift", action="store_true", help="evaluate on the covariate-shift instances")
    s.add_argument("--jobs", type=int, help="worker processes (0: every available core)")
    s = sub.add_parser("report", parents=[common], help="rebuild summary tables from scores.csv")
    return p


def _resolve(out: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else out / p


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg,
            simulate=dataclasses.replace(cfg.simulate, seed=args.seed),
            baselines=dataclasses.replace(cfg.baselines, seed=args.seed),
        )
    if getattr(args, "shift", False):
        if args.command == "simulate":
            cfg = dataclasses.replace(cfg, simulate=dataclasses.replace(cfg.simulate, shift_scenario="daynight"))
        cfg = dataclasses.replace(cfg, prepare=dataclasses.replace(cfg.prepare, shift=True))
    run = cfg.run
    if getattr(args, "methods", None):
        run = dataclasses.replace(run, methods=parse_methods(args.methods))
    if getattr(args, "modes", None):
        run = dataclasses.replace(run, modes=parse_modes(args.modes))
    if getattr(args, "jobs", None) is not None:
        if args.jobs < 0:
            raise UsageError("--jobs must be >= 0")
        run = dataclasses.replace(run, jobs=args.jobs)
    return dataclasses.replace(cfg, run=run)


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    market = generate_market(cfg.simulate)
    raw, truth = _resolve(out, cfg.paths.raw_log), _resolve(out, cfg.paths.truth)
    write_market(market, raw, truth)
    log.info("wrote %d log rows for %d bidders to %s", len(market.log), len(market.bidders), raw)
    return EXIT_OK


def cmd_prepare(cfg: RunConfig, out: Path) -> int:
    raw = read_raw_log(_resolve(out, cfg.paths.raw_log))
    series = aggregate_hourly(raw)
    counts = {k: 0 for k in FILTERS}
    kept = filter_bidders(series, min_hours=cfg.prepare.min_hours, counts=counts)
    shift = None
    if cfg.prepare.shift:
        shift = build_shift_dataset(
            kept, ks_alpha=cfg.prepare.ks_alpha, t_alpha=cfg.prepare.t_alpha, min_cv=cfg.prepare.min_cv
        )
    info = {"version": __version__, "input_bidders": len(series), "kept_bidders": len(kept),
            "prepare": dataclasses.asdict(cfg.prepare)}
    path = _resolve(out, cfg.paths.manifest)
    write_manifest(path, kept, counts, shift, info)
    log.info("kept %d of %d bidders; drops %s", len(kept), len(series), counts)
    if shift is not None:
        log.info("%d covariate-shift instances", len(shift))
    return EXIT_OK


def _header(cfg: RunConfig, manifest: dict, shift: bool, n_tasks: int) -> dict:
    header = {"version": __version__, "dataset": "shift" if shift else "in-sample", "tasks": n_tasks,
              "manifest_bidders": len(manifest["bidders"])}
    for k, v in cfg.flat().items():
        if k.startswith(("rules.", "baselines.", "run.")) and k != "run.jobs":
            header[k] = ", ".join(map(str, v)) if isinstance(v, tuple) else v
    return header


def cmd_run(cfg: RunConfig, out: Path) -> int:
    manifest = read_manifest(_resolve(out, cfg.paths.manifest))
    series = manifest["bidders"]
    shift = cfg.prepare.shift
    if shift:
        instances = manifest.get("shift_instances")
        if instances is None:
            raise ConfigError("manifest has no shift instances; rerun prepare with --shift")
        tasks = shift_tasks(series, instances)
    else:
        tasks = insample_tasks(series)
    ecfg = ExperimentConfig(cfg.run.methods, cfg.run.modes, cfg.rules, cfg.baselines, cfg.run.jobs,
                            cfg.run.keep_predictions)
    report = run_experiment(tasks, ecfg)
    rdir = _resolve(out, cfg.paths.report_dir)
    rdir.mkdir(exist_ok=True)
    header = _header(cfg, manifest, shift, len(tasks))
    title = "MAPE summary, covariate shift" if shift else "MAPE summary, in-sample"
    write_report(report, rdir, header, title)
    (rdir / "provenance.json").write_text(json.dumps(header, indent=2, sort_keys=True, default=str) + "\n")
    log.info("%d tasks, %d scores, %d failures -> %s", len(tasks), len(report.scores), len(report.failures), rdir)
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Path) -> int:
    rdir = _resolve(out, cfg.paths.report_dir)
    scores = pd.read_csv(rdir / "scores.csv", dtype={"bidder_id": str, "task_id": str}, float_precision="round_trip")
    fpath = rdir / "failures.csv"
    failures = pd.read_csv(fpath) if fpath.exists() else pd.DataFrame()
    summary = summarize(scores)
    summary.to_csv(rdir / "summary.csv", index=False)
    empty = pd.DataFrame()
    report = EvalReport(scores, summary, failures, empty, empty, empty)
    header = {}
    ppath = rdir / "provenance.json"
    if ppath.exists():
        header = json.loads(ppath.read_text())
    title = "MAPE summary, covariate shift" if header.get("dataset") == "shift" else "MAPE summary, in-sample"
    (rdir / "summary.md").write_text(summary_markdown(report, header, title) + "\n")
    print((rdir / "summary.md").read_text(), end="")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "prepare": cmd_prepare, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    out = Path(args.out)
    if not out.is_dir():
        print(f"error: output directory {out} does not exist", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _apply_flags(load_config(args.config), args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RegretBidError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
