"""Figure rendering for sweep and mode-statistics reports.

Figures are written next to the CSV output; the CSV stays the interchange
format and the figures are a convenience view of the same rows.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEME_STYLE = {
    "simcom": dict(color="#c0392b", marker="o"),
    "fpc": dict(color="#2471a3", marker="s"),
    "bdi": dict(color="#7d3c98", marker="^"),
    "biscaling": dict(color="#229954", marker="D"),
    "raw": dict(color="#7f8c8d", marker="x"),
}

plt.rcParams.update({
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 120,
})


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return None


def plot_sweep(rows, out_dir, baseline="raw", fmt="png"):
    """One figure per workload: bit-write ratio, write units and bit-writes
    against output RMSE, one line per scheme (corpus mean per af).

    Returns the list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    ratio = "bit_write_ratio" if baseline == "raw" else "bit_write_ratio_fnw"
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r.get("error"):
            continue
        vals = [_num(r[k]) for k in ("af", "rmse", ratio, "latency_units", "energy_units")]
        if None in vals:
            continue
        acc[(r["workload"], r["scheme"])][vals[0]].append(vals[1:])

    by_workload = defaultdict(dict)
    for (wl, scheme), per_af in acc.items():
        pts = []
        for af in sorted(per_af):
            cols = list(zip(*per_af[af]))
            pts.append([sum(c) / len(c) for c in cols])
        by_workload[wl][scheme] = pts

    paths = []
    for wl in sorted(by_workload):
        fig, axes = plt.subplots(1, 3, figsize=(9.5, 2.8))
        for scheme in sorted(by_workload[wl]):
            pts = by_workload[wl][scheme]
            x = [100 * p[0] for p in pts]
            style = SCHEME_STYLE.get(scheme, {})
            for ax, k in zip(axes, (1, 2, 3)):
                ax.plot(x, [p[k] for p in pts], label=scheme, lw=1.2, ms=3.5, **style)
        axes[0].set_ylabel(f"bit-write ratio (vs {baseline})")
        axes[1].set_ylabel("write units")
        axes[2].set_ylabel("bit-writes (energy units)")
        for ax in axes:
            ax.set_xlabel("output error (RMSE %)")
            ax.grid(alpha=0.3, lw=0.5)
        axes[0].legend(frameon=False)
        fig.suptitle(wl)
        fig.tight_layout()
        path = os.path.join(out_dir, f"sweep_{wl}.{fmt}")
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_modestats(table, formats, labels, path):
    """Heat map of selected-mode percentages, rows = selected mode,
    columns = true bitmap format."""
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    grid = [[table[f].get(lab, 0.0) for f in formats] for lab in labels]
    fig, ax = plt.subplots(figsize=(1.1 * len(formats) + 1.5, 0.45 * len(labels) + 1.0))
    ax.imshow(grid, cmap="Blues", vmin=0, vmax=100, aspect="auto")
    ax.set_xticks(range(len(formats)))
    ax.set_xticklabels([f"({cc}, {bpc})" for cc, bpc in formats])
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    for i, row in enumerate(grid):
        for j, v in enumerate(row):
            ax.text(j, i, f"{v:.1f}", ha="center", va="center", fontsize=7,
                    color="white" if v > 60 else "black")
    ax.set_xlabel("bitmap format (CC, BPC)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
