"""Tabular summaries for the command line: CSV frames and rich tables.

Rounding happens here and only here.
"""

from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..core.rkd import RkdFit
from ..core.schedule import ScheduleConfig
from ..core.welfare import WelfareInputs, WelfareResult

SUMMARY_VARIABLES = [
    ("gross_ref_wage", "Reference wage (gross)"),
    ("net_ref_wage", "Reference wage (net)"),
    ("age", "Age"),
    ("male", "Male"),
    ("spouse", "Dependent spouse"),
    ("children", "Dependent children"),
    ("tenure_months", "Tenure (months)"),
    ("contributions_36m", "Contributions, last 36 months"),
    ("eligibility_months", "Potential duration (months)"),
    ("ui_months_collected", "UI months collected"),
    ("total_ui_paid", "Total UI paid"),
    ("nonemployment_months", "Non-employment (months)"),
    ("censored", "Censored share"),
    ("reemployment_wage", "Re-employment wage"),
]

SEGMENTS = ("below_min", "between_kinks", "above_max")

REPORT_COLUMNS = [
    "label",
    "outcome",
    "method",
    "poly_order",
    "alpha",
    "se_alpha",
    "mean_outcome",
    "elasticity",
    "h_used",
    "n_used",
    "first_stage_f",
    "weak_instrument",
]

WELFARE_COLUMNS = [
    "label",
    "eta_wb",
    "dR_db",
    "R_over_b",
    "delta",
    "lhs",
    "rhs",
    "gains",
]


def summary_frame(frame: pd.DataFrame, schedule: ScheduleConfig) -> pd.DataFrame:
    """Means overall, by regime and by benefit segment, one row per variable.

    Each regime present is split at its own net kinks into spells below the
    minimum benefit, between the kinks and above the maximum benefit.
    """
    groups = [("all", frame)]
    for regime in ("pre", "post"):
        part = frame[frame["regime"] == regime]
        if not len(part):
            continue
        groups.append((regime, part))
        kinks = schedule.kinks_for(regime)
        net = part["net_ref_wage"]
        groups.append((f"{regime}/{SEGMENTS[0]}", part[net < kinks.net_low]))
        between = (net >= kinks.net_low) & (net <= kinks.net_high)
        groups.append((f"{regime}/{SEGMENTS[1]}", part[between]))
        groups.append((f"{regime}/{SEGMENTS[2]}", part[net > kinks.net_high]))
    rows = []
    for column, name in SUMMARY_VARIABLES:
        row = {"variable": name}
        for label, part in groups:
            values = part[column].astype(float)
            row[label] = float(values.mean()) if values.notna().any() else np.nan
        rows.append(row)
    rows.append({"variable": "Observations", **{g: len(p) for g, p in groups}})
    return pd.DataFrame(rows, columns=["variable"] + [g for g, _ in groups])


def _rounded(value, digits: int):
    return None if value is None else round(value, digits)


def report_frame(fits: Sequence[RkdFit]) -> pd.DataFrame:
    """One row per fit; header only when there are no fits."""
    rows = []
    for fit in fits:
        rows.append(
            {
                "label": fit.label,
                "outcome": fit.outcome,
                "method": fit.method,
                "poly_order": fit.poly_order,
                "alpha": round(fit.alpha, 6),
                "se_alpha": round(fit.se_alpha, 6),
                "mean_outcome": round(fit.mean_outcome, 2),
                "elasticity": _rounded(fit.elasticity, 2),
                "h_used": round(fit.h_used, 2),
                "n_used": fit.n_used,
                "first_stage_f": _rounded(fit.first_stage_f, 2),
                "weak_instrument": fit.weak_instrument,
            }
        )
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def welfare_frame(
    inputs: Iterable[WelfareInputs], results: Iterable[WelfareResult]
) -> pd.DataFrame:
    rows = []
    for given, result in zip(inputs, results):
        rows.append(
            {
                "label": result.label,
                "eta_wb": given.eta_wb,
                "dR_db": given.dR_db,
                "R_over_b": given.R_over_b,
                "delta": given.delta,
                "lhs": round(result.lhs, 2),
                "rhs": round(result.rhs, 2),
                "gains": round(result.gains, 2),
            }
        )
    return pd.DataFrame(rows, columns=WELFARE_COLUMNS)


def _cell(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    if isinstance(value, float):
        return f"{value:,.4g}" if abs(value) < 1 else f"{value:,.2f}"
    return str(value)


def render(
    console: Console, frame: pd.DataFrame, title: str, styles: Sequence[str] = ()
):
    """Print a frame as a rich table."""
    table = Table(title=title)
    palette = list(styles) or ["cyan", "magenta", "blue", "green", "white"]
    for i, column in enumerate(frame.columns):
        table.add_column(str(column), style=palette[i % len(palette)])
    for row in frame.itertuples(index=False):
        table.add_row(*(_cell(value) for value in row))
    console.print(table)
