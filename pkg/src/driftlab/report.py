"""Merge rate tables from result directories and emit plot-ready CSV and figures."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .theory import RATE_COLUMNS, RateTable, fit_rate_slope

FIT_COLUMNS = ["fit_slope", "fit_slope_se", "fit_intercept"]
PLOT_COLUMNS = ["scenario", "beta", "T", "log_T", "median_error", "log_median_error",
                "fitted_log_error", "fit_slope"]


class ReportError(ValueError):
    pass


def load_tables(dirs) -> RateTable:
    if not dirs:
        raise ReportError("no result directories given")
    rows = []
    for d in dirs:
        fname = Path(d) / "rates.csv"
        if not fname.exists():
            raise ReportError(f"{d}: no rates.csv found")
        try:
            table = RateTable.from_csv(fname)
        except ValueError as exc:
            raise ReportError(f"schema mismatch: {exc}") from exc
        if not table.rows:
            raise ReportError(f"{fname}: no rows")
        rows.extend(table.rows)
    seen = set()
    unique = []
    for r in rows:
        key = tuple(r[c] for c in RATE_COLUMNS)
        if key not in seen:
            seen.add(key)
            unique.append(r)
    return RateTable(unique).sorted()


def fit_groups(table: RateTable) -> dict:
    """Per (scenario, beta): medians, and the log-log fit where the design allows one."""
    out = {}
    for key in sorted({(r["scenario"], str(r["beta"])) for r in table.rows}):
        sub = table.select(scenario=key[0], beta=key[1])
        Ts, med = sub.medians()
        g = {"T": Ts, "median": med, "slope": None, "slope_se": None, "intercept": None, "fitted": None}
        try:
            slope, se = fit_rate_slope(sub)
        except ValueError:
            pass
        else:
            intercept = float(np.mean(np.log(med)) - slope * np.mean(np.log(Ts)))
            g.update(slope=slope, slope_se=se, intercept=intercept,
                     fitted=intercept + slope * np.log(Ts))
        out[key] = g
    return out


def cmd_report(dirs, out) -> dict:
    from .plots import plot_rates, plot_small_ball

    table = load_tables(dirs)
    groups = fit_groups(table)
    out = Path(out)
    (out / "figures").mkdir(parents=True, exist_ok=True)

    with open(out / "rates_merged.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_COLUMNS + FIT_COLUMNS)
        for r in table.rows:
            g = groups[(r["scenario"], str(r["beta"]))]
            w.writerow([r[c] for c in RATE_COLUMNS] + [_blank(g["slope"]), _blank(g["slope_se"]),
                                                        _blank(g["intercept"])])

    with open(out / "plot_data.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for (scen, beta), g in groups.items():
            for i, T in enumerate(g["T"]):
                fitted = "" if g["fitted"] is None else repr(float(g["fitted"][i]))
                w.writerow([scen, beta, repr(float(T)), repr(float(np.log(T))), repr(float(g["median"][i])),
                            repr(float(np.log(g["median"][i]))), fitted, _blank(g["slope"])])

    plot_rates({f"{s}, beta={b}": g for (s, b), g in groups.items()}, out / "figures" / "rates.png")
    sb_rows = []
    for d in dirs:
        sb = Path(d) / "theory" / "small_ball.csv"
        if sb.exists():
            with open(sb, newline="", encoding="utf-8") as fh:
                sb_rows.extend(csv.DictReader(fh))
    if sb_rows:
        plot_small_ball(sb_rows, out / "figures" / "small_ball.png")
    return {f"{s}|{b}": {"slope": g["slope"], "slope_se": g["slope_se"]} for (s, b), g in groups.items()}


def _blank(v):
    return "" if v is None else repr(float(v))
