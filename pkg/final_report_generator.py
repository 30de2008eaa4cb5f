# -*- coding: utf-8 -*-
# Collects the simulation outputs under one directory into a markdown report.
import os
import sys

import pandas as pd

from simulate.reporting import format_coverage_table, markdown_table


def load_results(out_dir, preset, name):
    """Load one result CSV; an empty frame if the preset was not run."""
    path = os.path.join(out_dir, preset, name)
    try:
        return pd.read_csv(path)
    except FileNotFoundError:
        print(f"Warning: {path} not found.", file=sys.stderr)
        return pd.DataFrame()


def _section(title, body):
    return f"### {title}\n\n{body}\n"


def generate_final_report(out_dir="results"):
    sections = []

    for preset in ("desk", "paper-scale"):
        coverage = load_results(out_dir, preset, "coverage_report.csv")
        if not coverage.empty:
            table = format_coverage_table(coverage)
            sections.append(_section(
                f"Coverage ({preset})",
                "Entries are empirical coverage in percent with the mean sqrt(n)-scaled "
                "interval width in parentheses.\n\n" + markdown_table(table)))

    power = load_results(out_dir, "power", "power.csv")
    if not power.empty:
        table = power.pivot_table(index=["setting", "delta"], columns="test", values="rejection_rate").reset_index()
        sections.append(_section("Rejection rates", markdown_table(table.round(3))))

    remainder = load_results(out_dir, "remainder", "remainder.csv")
    if not remainder.empty:
        sections.append(_section("Remainder diagnostic", markdown_table(remainder.round(4))))

    curve = load_results(out_dir, "sparsity-curve", "sparsity_curve.csv")
    if not curve.empty:
        at_median = curve[(curve["tau"] - 0.5).abs() < 1e-9]
        sections.append(_section("Sparsity estimates at tau = 0.5", markdown_table(at_median.round(4))))

    if not sections:
        return "(No simulation results available)\n"
    return "## Simulation results\n\n" + "\n".join(sections)


if __name__ == "__main__":
    print(generate_final_report(sys.argv[1] if len(sys.argv) > 1 else "results"))
