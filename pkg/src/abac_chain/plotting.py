"""Render cost curves to image files with matplotlib (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .cost_eval import SHARED_ALL, CostReport, Sharing  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _label(p: Sharing) -> str:
    return "proposed, n=m/m" if p == SHARED_ALL else ("proposed, n=m" if p == 1 else f"proposed, n=m/{p}")


def plot_curves(curves: Mapping[Sharing, CostReport], path: str | Path, title: str = "",
                mark_crossovers: bool = True) -> Path:
    """Cumulative gas vs. pair count: one line per sharing factor plus the ACL baseline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        baseline = None
        for p, report in curves.items():
            ms = [r.m for r in report.rows]
            (line,) = ax.plot(ms, [r.proposed_gas for r in report.rows], label=_label(p), lw=1.2)
            if mark_crossovers:
                for _, m in report.crossovers:
                    r = report.row(m)
                    ax.plot([m], [r.proposed_gas], "o", ms=3, color=line.get_color())
            baseline = report
        if baseline is not None:
            ax.plot([r.m for r in baseline.rows], [r.acl_gas for r in baseline.rows],
                    "k--", lw=1.2, label="ACL baseline")
        ax.set_xlabel("number of subject-object pairs m")
        ax.set_ylabel("cumulative gas")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
