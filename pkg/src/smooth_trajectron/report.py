"""Markdown tables and SVG plots from a results CSV."""

from __future__ import annotations

import os
from collections import defaultdict

import numpy as np

from .exceptions import ValidationError
from .training import METRICS, MetricsTable

HIGHER_IS_BETTER = {"auc"}
METRIC_TITLES = {"fde": "FDE", "ade": "ADE", "kde_nll": "KDE-NLL", "auc": "AUC"}


def _fmt_beta(beta: float) -> str:
    return "baseline (β = 0)" if beta == 0 else f"β = {beta:g}"


def aggregate(table: MetricsTable) -> dict:
    """{(model, split): {metric: {beta: {horizon: mean over seeds}}}}."""
    acc = defaultdict(list)
    for r in table.rows:
        acc[(r["model"], r["split"], r["metric"], r["beta"], r["horizon_s"])].append(r["value"])
    out = defaultdict(lambda: defaultdict(dict))
    for (model, split, metric, beta, h), vals in sorted(acc.items()):
        out[(model, split)][metric].setdefault(beta, {})[h] = float(np.mean(vals))
    return out


def best_cells(cells: dict, metric: str) -> set:
    """(beta, horizon) pairs holding the best value of each horizon column."""
    pick = max if metric in HIGHER_IS_BETTER else min
    horizons = sorted({h for row in cells.values() for h in row})
    best = set()
    for h in horizons:
        col = {b: row[h] for b, row in cells.items() if h in row}
        target = pick(col.values())
        best.update((b, h) for b, v in col.items() if v == target)
    return best


def metric_table(cells: dict, metric: str, digits: int = 3) -> str:
    """One markdown table: baseline row first, then increasing β; best per column in bold."""
    betas = sorted(cells, key=lambda b: (b != 0, b))
    horizons = sorted({h for row in cells.values() for h in row})
    best = best_cells(cells, metric)
    lines = [
        "| model | " + " | ".join(f"@{h:g}s" for h in horizons) + " |",
        "|---|" + "---:|" * len(horizons),
    ]
    for b in betas:
        vals = []
        for h in horizons:
            if h not in cells[b]:
                vals.append("")
                continue
            text = f"{cells[b][h]:.{digits}f}"
            vals.append(f"**{text}**" if (b, h) in best else text)
        lines.append(f"| {_fmt_beta(b)} | " + " | ".join(vals) + " |")
    return "\n".join(lines)


def render_markdown(table: MetricsTable) -> str:
    if not len(table):
        raise ValidationError("results are empty; nothing to report")
    groups = aggregate(table)
    parts = ["# Results", "",
             "Values are means over seeds. Bold marks the best value per horizon "
             "(lowest, or highest for AUC) across the β rows, baseline included.", ""]
    for (model, split) in sorted(groups):
        parts += [f"## {model}, {split} split", ""]
        for metric in METRICS:
            if metric in groups[(model, split)]:
                parts += [f"### {METRIC_TITLES[metric]}", "", metric_table(groups[(model, split)][metric], metric), ""]
    return "\n".join(parts)


def plot_metrics(table: MetricsTable, out_dir) -> list:
    """One SVG per metric: value vs. β, one panel per (model, split), one line per horizon."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups = aggregate(table)
    keys = sorted(groups)
    paths = []
    with matplotlib.rc_context({"svg.hashsalt": "smooth-trajectron", "svg.fonttype": "none"}):
        for metric in METRICS:
            panels = [k for k in keys if metric in groups[k]]
            if not panels:
                continue
            fig, axes = plt.subplots(1, len(panels), figsize=(4.0 * len(panels), 3.2), squeeze=False)
            for ax, key in zip(axes[0], panels):
                cells = groups[key][metric]
                betas = sorted(cells)
                for h in sorted({h for row in cells.values() for h in row}):
                    xs = [b for b in betas if h in cells[b]]
                    ax.plot(xs, [cells[b][h] for b in xs], marker="o", label=f"{h:g} s")
                ax.set_xscale("symlog", linthresh=0.01)
                ax.set_xlabel("β")
                ax.set_title(f"{key[0]} ({key[1]})", fontsize=9)
            axes[0][0].set_ylabel(METRIC_TITLES[metric])
            axes[0][-1].legend(fontsize=8)
            fig.tight_layout()
            path = os.path.join(out_dir, f"{metric}.svg")
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths


def write_report(results_csv, out_dir) -> list:
    """Write ``report.md`` plus SVG plots to ``out_dir``; returns written paths."""
    table = MetricsTable.from_csv(results_csv)
    text = render_markdown(table)
    os.makedirs(out_dir, exist_ok=True)
    md = os.path.join(out_dir, "report.md")
    with open(md, "w", encoding="utf-8") as fh:
        fh.write(text)
    return [md] + plot_metrics(table, out_dir)
