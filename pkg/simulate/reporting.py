# -*- coding: utf-8 -*-
# Tables for simulation reports.
from typing import List

import pandas as pd

from infrastructure.schemas import CoverageReport, RemainderDiagnostic

COVERAGE_COLUMNS = ["setting", "tau", "coord", "method", "coverage", "mc_se", "mean_sqrt_n_width", "n_ok"]


def coverage_frame(reports: List[CoverageReport]) -> pd.DataFrame:
    """One row per (setting, tau, coord, method) cell."""
    rows = [cell.to_dict() for report in reports for cell in report.cells]
    return pd.DataFrame(rows, columns=COVERAGE_COLUMNS)


def format_coverage_table(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Coverage table: one row per setting, tau and method, one column per
    coefficient, entries "coverage (sqrt(n) width)".
    """
    if frame.empty:
        return pd.DataFrame()
    cells = frame.assign(
        entry=[f"{c:.1f} ({w:.2f})" for c, w in zip(frame["coverage"], frame["mean_sqrt_n_width"])],
        column=[f"beta_{j}" for j in frame["coord"]],
    )
    table = cells.pivot(index=["setting", "tau", "method"], columns="column", values="entry")
    ordered = sorted(table.columns, key=lambda c: int(c.split("_")[1]))
    table = table[ordered]
    table.columns.name = None
    return table.reset_index()


def markdown_table(df: pd.DataFrame) -> str:
    """Renders a frame as a pipe-delimited markdown table."""
    if df.empty:
        return "(no rows)"
    headers = [str(c) for c in df.columns]
    lines = ["| " + " | ".join(headers) + " |", "| " + " | ".join(["---"] * len(headers)) + " |"]
    for _, row in df.iterrows():
        lines.append("| " + " | ".join(str(x) for x in row.tolist()) + " |")
    return "\n".join(lines)


def remainder_frame(diagnostic: RemainderDiagnostic) -> pd.DataFrame:
    return pd.DataFrame([row.to_dict() for row in diagnostic.rows],
                        columns=["n", "p", "mode", "median_sup_remainder", "median_rank_score_gap", "seeds"])
