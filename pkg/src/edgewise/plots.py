"""Figure rendering for bench and eval reports.

Figures are written next to the delimited report output; the CSV/JSON stays
the canonical machine-readable artifact.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bencheval import BenchReport, EvalReport
from .telemetry import REALTIME_IPS


def render_bench_figure(report: BenchReport, path) -> Path:
    """Bar chart of throughput per configuration with the real-time line."""
    rows = [r for r in report.rows if r.ips is not None]
    names = [
        r.name if r.power_mode is None else f"{r.name}\n({r.power_mode})"
        for r in rows
    ]
    ips = [r.ips for r in rows]

    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(rows)), 4))
    bars = ax.bar(names, ips, color="#4878a8")
    ax.axhline(REALTIME_IPS, color="#b04030", linestyle="--", linewidth=1,
               label=f"real-time ({REALTIME_IPS:.0f} IPS)")
    for bar, value in zip(bars, ips):
        ax.annotate(f"{value:.1f}", (bar.get_x() + bar.get_width() / 2, value),
                    ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("inferences per second")
    ax.set_title("Inference throughput per acceleration configuration")
    ax.legend(loc="upper left")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_eval_figure(report: EvalReport, path) -> Path:
    """Per-category bars: collected totals behind correct predictions."""
    categories = report.labels
    totals = [report.per_category[c]["total"] for c in categories]
    corrects = [report.per_category[c]["correct"] for c in categories]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(categories, totals, color="#c8c8c8", label="collected")
    ax.bar(categories, corrects, color="#4878a8", width=0.55, label="correct")
    ax.set_ylabel("items")
    ax.set_title(
        "Accuracy per category "
        f"(incl. errors {report.accuracy_including_errors:.1%}, "
        f"excl. errors {report.accuracy_excluding_errors:.1%})"
    )
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
