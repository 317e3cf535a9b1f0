"""Report figures, rendered to files (no display backend required)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_hv_series(series: Sequence[float], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(series)), series, marker="o", markersize=3, lw=1.2)
    ax.set_xlabel("generation")
    ax.set_ylabel("normalized hypervolume")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_front_scatter(
    eval_points: Sequence[tuple[int, float, float]],
    front_points: Sequence[tuple[float, float]],
    path: Path,
) -> None:
    """All evaluated individuals shaded by birth generation, final front on top."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if eval_points:
        gens = [g for g, _, _ in eval_points]
        xs = [m / 1e6 for _, _, m in eval_points]
        ys = [f1 for _, f1, _ in eval_points]
        sc = ax.scatter(xs, ys, c=gens, cmap="viridis", s=12, alpha=0.5, linewidths=0)
        fig.colorbar(sc, ax=ax, label="generation")
    if front_points:
        pts = sorted(front_points, key=lambda p: p[1])
        ax.plot(
            [m / 1e6 for _, m in pts],
            [f1 for f1, _ in pts],
            "r-o",
            markersize=4,
            lw=1.2,
            label="final front",
        )
        ax.legend(loc="best")
    ax.set_xlabel("MAdds (millions)")
    ax.set_ylabel("error")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
