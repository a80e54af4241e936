"""The experiment matrix: every (task, method, mode) fitted, predicted and scored."""

from __future__ import annotations

import logging
import math
import multiprocessing as mp
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .baselines import BaselineOptions, bidder_seed, fit_baseline, predict_baseline, training_rows
from .errors import RegretBidError
from .evaluation import dist_stats, hourly_profile, mape
from .forecasters import (
    RuleKind,
    RuleOptions,
    fit_rule,
    ogd_train_mape,
    run_series,
    run_stepahead,
    stepahead_values,
)
from .regret import daily_value_cv, estimate_value, ogd_plausibility, shade_ratio
from .series import adjacent_pairs

log = logging.getLogger(__name__)

ECON_METHODS = tuple(k.value for k in RuleKind)
ML_METHODS = ("AR2", "RF2", "MLP2", "AR2+econ", "RF2+econ", "MLP2+econ", "Seasonal")
ALL_METHODS = ECON_METHODS + ML_METHODS
MODES = ("series", "stepahead")
_EXPECTED = (RegretBidError, ValueError, ArithmeticError, np.linalg.LinAlgError)


@dataclass
class Task:
    task_id: str
    series: object
    train_idx: np.ndarray
    test_idx: np.ndarray
    day_bids: np.ndarray | None = None


def insample_tasks(series_list) -> list:
    return [Task(s.bidder_id, s, s.train_idx, s.test_idx) for s in series_list]


def shift_tasks(series_list, instances) -> list:
    by_id = {s.bidder_id: s for s in series_list}
    out = []
    for inst in instances:
        s = by_id.get(inst.bidder_id)
        if s is None:
            continue
        out.append(Task(f"{inst.bidder_id}@{inst.test_date}", s, inst.train_idx, inst.test_idx, inst.day_bids))
    return out


@dataclass
class ExperimentConfig:
    methods: tuple = ALL_METHODS
    modes: tuple = MODES
    rules: RuleOptions = field(default_factory=RuleOptions)
    baselines: BaselineOptions = field(default_factory=BaselineOptions)
    jobs: int = 1
    keep_predictions: bool = True

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"unknown method(s): {', '.join(unknown)}")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown mode(s): {', '.join(bad)}")


@dataclass
class TaskResult:
    task_id: str
    bidder_id: str
    scores: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    params: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    estimate: dict | None = None
    day_bids: np.ndarray | None = None


def _reason(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _diagnostics(task: Task, cfg: ExperimentConfig) -> tuple:
    s = task.series
    train = s.take(task.train_idx)
    est = estimate_value(train, lam=cfg.rules.lam, lambda_rule=cfg.rules.lambda_rule)
    row = {
        "task_id": task.task_id, "bidder_id": s.bidder_id, "v_qr": est.v_qr, "v_mr": est.v_mr, "lambda": est.lam,
        "shade_ratio": shade_ratio(train, est.v_qr),
    }
    try:
        row["daily_cv"] = daily_value_cv(train, lam=cfg.rules.lam, lambda_rule=cfg.rules.lambda_rule)
    except RegretBidError:
        row["daily_cv"] = math.nan
    try:
        p = ogd_plausibility(train, est.v_qr)
        row.update(ogd_plausibility=p.signed_neg_log_p, ogd_r=p.r, ogd_p=p.p_value, eligible_flag=p.eligible)
    except RegretBidError:
        row.update(ogd_plausibility=math.nan, ogd_r=math.nan, ogd_p=math.nan, eligible_flag=False)
    value = est.v_mr if cfg.rules.value_method == "min" else est.v_qr
    return row, value


def _record(res: TaskResult, task: Task, method: str, run, keep: bool) -> None:
    res.scores.append({
        "task_id": task.task_id, "bidder_id": task.series.bidder_id, "method": method, "mode": run.mode,
        "mape": mape(run.truth, run.predictions), "n_test": len(run.truth),
    })
    if keep:
        for h, p, t in zip(run.hours.tolist(), run.predictions.tolist(), run.truth.tolist()):
            res.predictions.append({
                "task_id": task.task_id, "bidder_id": task.series.bidder_id, "hour": h, "mode": run.mode,
                "rule": method, "predicted_bid": p, "true_bid": t,
            })


def _fail(res: TaskResult, task: Task, method: str, mode: str, exc: BaseException) -> None:
    log.warning("task %s %s/%s failed: %s", task.task_id, method, mode, _reason(exc))
    res.failures.append({"task_id": task.task_id, "method": method, "mode": mode, "reason": _reason(exc)})


def _run_econ(res, task, kind, value, step_values, cfg):
    s, opts = task.series, cfg.rules
    try:
        rule = fit_rule(kind, s, task.train_idx, opts, value)
    except _EXPECTED as exc:
        for mode in cfg.modes:
            _fail(res, task, kind.value, mode, exc)
        return
    param = {
        "task_id": task.task_id, "method": kind.value, "value": rule.value, "eta": rule.eta, "beta": rule.beta,
        "alpha": rule.vis.alpha if rule.vis else math.nan, "vis0": rule.vis.vis0 if rule.vis else math.nan,
        "train_mape": math.nan,
    }
    if kind in (RuleKind.OGD, RuleKind.OGDBias):
        param["train_mape"] = ogd_train_mape(s, rule, adjacent_pairs(task.train_idx))
    res.params.append(param)
    series_run = None
    for mode in cfg.modes:
        try:
            if mode == "series":
                series_run = run_series(rule, s, task.test_idx)
                run = series_run
            elif kind == RuleKind.BR and series_run is not None:
                run = type(series_run)("stepahead", series_run.predictions, series_run.hours, series_run.truth)
            else:
                run = run_stepahead(kind, s, task.train_idx, task.test_idx, opts, step_values=step_values)
            _record(res, task, kind.value, run, cfg.keep_predictions)
        except _EXPECTED as exc:
            _fail(res, task, kind.value, mode, exc)


def _run_baseline(res, task, method, cfg):
    name, _, econ = method.partition("+")
    use_econ = econ == "econ"
    s, opts = task.series, cfg.baselines
    model = None
    if name != "Seasonal":
        try:
            X, y = training_rows(s, task.train_idx, use_econ)
            model = fit_baseline(name, X, y, opts, bidder_seed(opts.seed, s.bidder_id, method))
        except _EXPECTED as exc:
            for mode in cfg.modes:
                _fail(res, task, method, mode, exc)
            return
    for mode in cfg.modes:
        try:
            run = predict_baseline(name, mode, s, task.train_idx, task.test_idx, use_econ, opts, model)
            _record(res, task, method, run, cfg.keep_predictions)
        except _EXPECTED as exc:
            _fail(res, task, method, mode, exc)


def run_task(task: Task, cfg: ExperimentConfig) -> TaskResult:
    res = TaskResult(task.task_id, task.series.bidder_id, day_bids=task.day_bids)
    econ = [RuleKind(m) for m in cfg.methods if m in ECON_METHODS]
    value, step_values = None, None
    try:
        res.estimate, value = _diagnostics(task, cfg)
        if econ and "stepahead" in cfg.modes:
            if cfg.rules.stepahead_refit_value:
                step_values = stepahead_values(task.series, task.train_idx, task.test_idx, cfg.rules)
            else:
                step_values = np.full(len(task.test_idx), value)
    except _EXPECTED as exc:
        for m in econ:
            for mode in cfg.modes:
                _fail(res, task, m.value, mode, exc)
        econ = []
    for kind in econ:
        _run_econ(res, task, kind, value, step_values, cfg)
    for method in cfg.methods:
        if method in ML_METHODS:
            _run_baseline(res, task, method, cfg)
    return res


def _worker(args):
    task, cfg = args
    return run_task(task, cfg)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


@dataclass
class EvalReport:
    scores: pd.DataFrame
    summary: pd.DataFrame
    failures: pd.DataFrame
    estimates: pd.DataFrame
    params: pd.DataFrame
    predictions: pd.DataFrame
    profile: pd.DataFrame | None = None

    def mean_mape(self, method: str, mode: str) -> float:
        row = self.summary[(self.summary.method == method) & (self.summary["mode"] == mode)]
        return float(row["mean_excl"].iloc[0]) if len(row) else math.nan


SUMMARY_COLUMNS = [
    "mode", "rank", "method", "mean_excl", "stderr", "lb", "ub", "q1", "median", "q3",
    "whisker_lo", "whisker_hi", "n", "n_outliers",
]


def summarize(scores: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for (method, mode), grp in scores.groupby(["method", "mode"], sort=True):
        try:
            st = dist_stats(grp["mape"].to_numpy())
        except RegretBidError as exc:
            log.warning("no statistics for %s/%s: %s", method, mode, exc)
            continue
        rows.append({"method": method, "mode": mode, **st.row()})
    if not rows:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    df = pd.DataFrame(rows).sort_values(["mode", "mean_excl", "method"], kind="stable").reset_index(drop=True)
    df["rank"] = df.groupby("mode").cumcount() + 1
    return df[SUMMARY_COLUMNS]


def run_experiment(tasks, cfg: ExperimentConfig | None = None) -> EvalReport:
    """Fit, predict and score every configured method on every task.

    Failures are logged and reported with their reason. Results are reduced
    in task-id order, so the report does not depend on ``jobs``.
    """
    cfg = cfg or ExperimentConfig()
    tasks = sorted(tasks, key=lambda t: t.task_id)
    jobs = cfg.jobs if cfg.jobs and cfg.jobs > 0 else default_jobs()
    if jobs > 1 and len(tasks) > 1:
        with mp.get_context("fork").Pool(jobs) as pool:
            results = pool.map(_worker, [(t, cfg) for t in tasks], chunksize=1)
    else:
        results = [run_task(t, cfg) for t in tasks]
    results.sort(key=lambda r: r.task_id)

    def frame(key, columns):
        rows = [row for r in results for row in getattr(r, key)]
        return pd.DataFrame(rows, columns=columns)

    scores = frame("scores", ["task_id", "bidder_id", "method", "mode", "mape", "n_test"])
    predictions = frame(
        "predictions", ["task_id", "bidder_id", "hour", "mode", "rule", "predicted_bid", "true_bid"]
    )
    params = frame("params", ["task_id", "method", "value", "eta", "beta", "alpha", "vis0", "train_mape"])
    failures = frame("failures", ["task_id", "method", "mode", "reason"])
    estimates = pd.DataFrame(
        [r.estimate for r in results if r.estimate],
        columns=["task_id", "bidder_id", "v_qr", "v_mr", "lambda", "shade_ratio", "daily_cv",
                 "ogd_plausibility", "ogd_r", "ogd_p", "eligible_flag"],
    )
    days = [r.day_bids for r in results if r.day_bids is not None and len(r.day_bids) == 24]
    profile = None
    if days:
        mean, q25, q75 = hourly_profile(days)
        profile = pd.DataFrame({"hour_of_day": np.arange(24), "mean": mean, "q25": q25, "q75": q75})
    return EvalReport(scores, summarize(scores), failures, estimates, params, predictions, profile)
