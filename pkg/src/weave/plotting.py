"""Figures for batch reports (Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_batch(reports, out_dir: str | Path, title: str = "") -> list[Path]:
    """Write outcome-by-seed, wall-time and residual-trace figures; return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 2.5))
    seeds = [r.seed for r in reports]
    ax.bar(seeds, [1 if r.success else 0 for r in reports],
           color=["tab:green" if r.success else "tab:red" for r in reports])
    ax.set_xlabel("seed")
    ax.set_yticks([0, 1], ["fail", "ok"])
    ax.set_title(title or "outcome per seed")
    fig.tight_layout()
    paths.append(out / "outcomes.png")
    fig.savefig(paths[-1], dpi=100)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3))
    ax.hist([r.wall_time for r in reports], bins=min(20, max(1, len(reports))))
    ax.set_xlabel("wall time (s)")
    ax.set_ylabel("runs")
    fig.tight_layout()
    paths.append(out / "wall_time.png")
    fig.savefig(paths[-1], dpi=100)
    plt.close(fig)

    traces = [r.residual_trace for r in reports if r.residual_trace]
    if traces:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for tr in traces:
            ax.plot([min(x) for x in tr], alpha=0.4, lw=1)
        ax.set_xlabel("block")
        ax.set_ylabel("smallest residual part")
        fig.tight_layout()
        paths.append(out / "residuals.png")
        fig.savefig(paths[-1], dpi=100)
        plt.close(fig)
    return paths
