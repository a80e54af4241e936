"""Write an EvalReport to disk: score files, ranked tables and figure data."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pandas as pd

from .experiment import EvalReport

HIST_BINS = 20
TABLE_COLUMNS = ["rank", "method", "mean_excl", "stderr", "lb", "ub", "median", "n", "n_outliers"]


def histogram(values, bins=HIST_BINS, range_=None) -> pd.DataFrame:
    """Counts over equal-width bins; non-finite values are dropped."""
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return pd.DataFrame(columns=["bin_lo", "bin_hi", "count"])
    counts, edges = np.histogram(x, bins=bins, range=range_)
    return pd.DataFrame({"bin_lo": edges[:-1], "bin_hi": edges[1:], "count": counts})


def ogdbias_histogram(params: pd.DataFrame) -> pd.DataFrame:
    """Joint counts of the fitted (alpha, vis0) pairs across bidders."""
    p = params[params.method == "OGDBias"]
    if p.empty:
        return pd.DataFrame(columns=["alpha", "vis0", "count"])
    return (p.groupby(["alpha", "vis0"], dropna=False).size().rename("count").reset_index()
            .sort_values(["alpha", "vis0"], kind="stable").reset_index(drop=True))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{v:.4f}"
    return str(v)


def markdown_table(df: pd.DataFrame, columns=None) -> str:
    """Aligned-text markdown table; numbers right-aligned, text left-aligned."""
    columns = list(columns or df.columns)
    cells = [[_fmt(v) for v in row] for row in df[columns].itertuples(index=False)]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    numeric = [pd.api.types.is_numeric_dtype(df[c]) for c in columns]

    def line(vals):
        out = [v.rjust(w) if num else v.ljust(w) for v, w, num in zip(vals, widths, numeric)]
        return "| " + " | ".join(out) + " |"

    sep = "|" + "|".join(("-" * (w + 1) + ":") if num else ("-" * (w + 2)) for w, num in zip(widths, numeric)) + "|"
    return "\n".join([line(columns), sep] + [line(r) for r in cells])


def summary_markdown(report: EvalReport, header: dict | None = None, title: str = "MAPE summary") -> str:
    parts = [f"# {title}", ""]
    if header:
        parts.append("Provenance:")
        parts.append("")
        parts += [f"- {k}: {header[k]}" for k in sorted(header)]
        parts.append("")
    for mode in ("series", "stepahead"):
        tab = report.summary[report.summary["mode"] == mode]
        if tab.empty:
            continue
        parts += [f"## {mode}", "", markdown_table(tab, TABLE_COLUMNS), ""]
    if len(report.failures):
        parts += ["## failures", "", markdown_table(report.failures), ""]
    return "\n".join(parts)


def write_report(report: EvalReport, out_dir, header: dict | None = None, title: str = "MAPE summary") -> list:
    """Write every report file into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "scores.csv": report.scores,
        "summary.csv": report.summary,
        "failures.csv": report.failures,
        "estimates.csv": report.estimates,
        "params.csv": report.params,
        "ogdbias_params_hist.csv": ogdbias_histogram(report.params),
        "fig1_shade_ratio_hist.csv": histogram(report.estimates.get("shade_ratio", [])),
        "fig1_daily_cv_hist.csv": histogram(report.estimates.get("daily_cv", [])),
        "plausibility_hist.csv": histogram(report.estimates.get("ogd_plausibility", [])),
    }
    if len(report.predictions):
        files["predictions.csv"] = report.predictions
    if report.profile is not None:
        files["hourly_profile.csv"] = report.profile
    written = []
    for name, df in files.items():
        path = out / name
        df.to_csv(path, index=False)
        written.append(path)
    md = out / "summary.md"
    md.write_text(summary_markdown(report, header, title) + "\n")
    written.append(md)
    return written


def read_summary(out_dir) -> pd.DataFrame:
    return pd.read_csv(Path(out_dir) / "summary.csv")
