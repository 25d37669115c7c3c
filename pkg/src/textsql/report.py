"""Figure rendering for evaluation reports.

Figures are written next to the JSON report so a run leaves both the
machine-readable numbers and a quick visual summary.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport


def render_report_figures(report: EvalReport, fig_dir) -> list[Path]:
    """Render the accuracy summary and per-instance outcome figures as PNGs."""
    out_dir = Path(fig_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        _accuracy_summary(report, out_dir / "accuracy_summary.png"),
        _instance_outcomes(report, out_dir / "instance_outcomes.png"),
    ]
    return paths


def _accuracy_summary(report: EvalReport, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    values = [report.em_pct, report.ex_pct]
    bars = ax.bar(["EM", "EX"], values, color=["#4c72b0", "#55a868"], width=0.55)
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.1f}",
            (bar.get_x() + bar.get_width() / 2, value),
            ha="center",
            va="bottom",
            fontsize=10,
        )
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    ax.set_title(f"exact-set-match / execution accuracy (n={report.n})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _instance_outcomes(report: EvalReport, path: Path) -> Path:
    n = max(report.n, 1)
    grid = np.zeros((2, n))
    for i, record in enumerate(report.instances):
        grid[0, i] = 1.0 if record.em else 0.0
        grid[1, i] = 1.0 if record.ex else 0.0
    fig, ax = plt.subplots(figsize=(max(4.0, 0.18 * n + 1.5), 2.2))
    ax.imshow(grid, aspect="auto", cmap="RdYlGn", vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_yticks([0, 1], labels=["EM", "EX"])
    ax.set_xlabel("instance")
    ax.set_title("per-instance outcomes (green = correct)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
