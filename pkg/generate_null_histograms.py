# -*- coding: utf-8 -*-
# Histograms of standardized estimates against the standard normal density.
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from scipy import stats


def plot_null_histograms(stats_csv, out_png):
    df = pd.read_csv(stats_csv)
    panels = list(df.groupby(["setting", "tau", "coord"], sort=True))
    if not panels:
        print("No null statistics found.")
        return 1

    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.5), squeeze=False)
    grid = np.linspace(-4, 4, 200)
    for ax, ((setting, tau, coord), frame) in zip(axes[0], panels):
        for method, sub in frame.groupby("method"):
            ax.hist(sub["stat"], bins=30, range=(-4, 4), density=True, alpha=0.5, label=method)
        ax.plot(grid, stats.norm.pdf(grid), color="black", linewidth=1)
        ax.set_title(f"{setting}\ntau={tau:g}, beta_{coord}")
        ax.set_xlabel("standardized estimate")
        ax.legend(fontsize=8)

    plt.tight_layout()
    plt.savefig(out_png, dpi=150)
    print(f"Saved {out_png}")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 3:
        print("usage: generate_null_histograms.py NULL_STATS_CSV OUT_PNG")
        sys.exit(2)
    sys.exit(plot_null_histograms(sys.argv[1], sys.argv[2]))
