"""Report figures, rendered off-screen to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def convergence_plot(trace: Sequence[Tuple[int, int, int, Optional[int]]], n_students: int,
                     path: str | Path, title: str = "") -> Path:
    """Best cost per generation, with increment boundaries as faint lines."""
    gens = [t[0] for t in trace if t[3] is not None]
    costs = [t[3] / n_students for t in trace if t[3] is not None]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(gens, costs, lw=1.2)
    last = None
    for g, inc, _, _ in trace:
        if inc != last and last is not None:
            ax.axvline(g, color="0.85", lw=0.6, zorder=0)
        last = inc
    ax.set_xlabel("generation")
    ax.set_ylabel("proximity cost")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def bench_plot(costs: Dict[Tuple[str, str], List[float]], path: str | Path) -> Path:
    """Box plot of final costs per (instance, mode)."""
    keys = [k for k in costs if costs[k]]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(keys) + 2), 4))
    if keys:
        ax.boxplot([costs[k] for k in keys])
        ax.set_xticks(range(1, len(keys) + 1))
        ax.set_xticklabels([f"{i}\n{m}" for i, m in keys])
    else:
        ax.text(0.5, 0.5, "no feasible trials", ha="center", va="center", transform=ax.transAxes)
    ax.set_ylabel("final cost")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
