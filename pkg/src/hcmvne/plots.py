"""Time-series figures of the three evaluation metrics, written as PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = {
    "acceptance_ratio": ("acceptance.png", "VNR acceptance ratio"),
    "avg_revenue": ("revenue.png", "Average revenue"),
    "rc_ratio": ("rc_ratio.png", "Revenue / cost"),
}

_STYLE = {"hcm": ("C0", "-"), "no-coarsen": ("C1", "--"), "greedy": ("C2", ":")}


def plot_series(series: Mapping[str, Sequence[dict]], out_dir) -> list[Path]:
    """One figure per metric with a line per algorithm; returns the files written.

    *series* maps a label to report rows (as from ``read_report_csv``).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for column, (filename, title) in METRICS.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, (label, rows) in enumerate(series.items()):
            color, ls = _STYLE.get(label, (f"C{(i + 3) % 10}", "-"))
            ax.plot([r["time"] for r in rows], [r[column] for r in rows],
                    color=color, linestyle=ls, marker="o", markersize=3, label=label)
        ax.set_xlabel("time")
        ax.set_ylabel(title)
        ax.grid(True, alpha=0.3)
        ax.legend(frameon=False)
        fig.tight_layout()
        path = out_dir / filename
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
