"""Report rendering: Markdown tables, CSV, and matplotlib figures.

Every writer takes a base path without extension and emits base.md,
base.csv and base.png side by side. Percentages are rounded to one
decimal in reports only; the tables keep full precision.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import GapReport, RecallTable

FIG_DPI = 120


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.1f}"


def write_recall_report(table: RecallTable, base_path, title: str = "Recall") -> list[Path]:
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    ks = table.ks

    md = [
        f"# {title}",
        "",
        f"Queries: {table.query_count}, positive threshold: {table.threshold_m:g} m",
        "",
        "| " + " | ".join(f"R@{k}" for k in ks) + " |",
        "|" + "|".join(["---"] * len(ks)) + "|",
        "| " + " | ".join(_fmt(table.recall[k]) for k in ks) + " |",
        "",
    ]
    (base.with_suffix(".md")).write_text("\n".join(md))

    with open(base.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "recall_pct", "query_count", "threshold_m"])
        for k in ks:
            w.writerow([k, f"{table.recall[k]:.4f}", table.query_count,
                        f"{table.threshold_m:g}"])

    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = range(len(ks))
    ax.bar(xs, [table.recall[k] for k in ks], color="#4878a8")
    ax.set_xticks(list(xs), [f"R@{k}" for k in ks])
    ax.set_ylim(0, 100)
    ax.set_ylabel("recall (%)")
    ax.set_title(title)
    for x, k in zip(xs, ks):
        ax.text(x, table.recall[k] + 1.5, _fmt(table.recall[k]),
                ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(base.with_suffix(".png"), dpi=FIG_DPI)
    plt.close(fig)
    return [base.with_suffix(ext) for ext in (".md", ".csv", ".png")]


def write_gap_report(report: GapReport, base_path,
                     title: str = "Real vs synthetic database") -> list[Path]:
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    has_aligned = any(r.aligned is not None for r in report.rows)

    header = ["K", "real DB", "synthetic DB", "gap"]
    if has_aligned:
        header += ["aligned DB", "gap recovered (%)"]
    md = [
        f"# {title}",
        "",
        f"Queries: {report.query_count}, positive threshold: {report.threshold_m:g} m",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    for r in report.rows:
        cells = [f"R@{r.k}", _fmt(r.real), _fmt(r.synt), _fmt(r.gap)]
        if has_aligned:
            cells += [_fmt(r.aligned), _fmt(r.recovered_pct)]
        md.append("| " + " | ".join(cells) + " |")
    md.append("")
    (base.with_suffix(".md")).write_text("\n".join(md))

    with open(base.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["k", "real_pct", "synt_pct", "gap_pts"]
        if has_aligned:
            cols += ["aligned_pct", "recovered_pct"]
        w.writerow(cols)
        for r in report.rows:
            row = [r.k, f"{r.real:.4f}", f"{r.synt:.4f}", f"{r.gap:.4f}"]
            if has_aligned:
                row += [
                    "" if r.aligned is None else f"{r.aligned:.4f}",
                    "" if r.recovered_pct is None else f"{r.recovered_pct:.4f}",
                ]
            w.writerow(row)

    fig, ax = plt.subplots(figsize=(6, 3.4))
    ks = [r.k for r in report.rows]
    xs = range(len(ks))
    width = 0.27 if has_aligned else 0.38
    ax.bar([x - width for x in xs], [r.real for r in report.rows], width,
           label="real DB", color="#4878a8")
    ax.bar(list(xs), [r.synt for r in report.rows], width,
           label="synthetic DB", color="#d1605e")
    if has_aligned:
        ax.bar([x + width for x in xs], [r.aligned for r in report.rows], width,
               label="aligned", color="#6aa56e")
    ax.set_xticks(list(xs), [f"R@{k}" for k in ks])
    ax.set_ylim(0, 100)
    ax.set_ylabel("recall (%)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(base.with_suffix(".png"), dpi=FIG_DPI)
    plt.close(fig)
    return [base.with_suffix(ext) for ext in (".md", ".csv", ".png")]
