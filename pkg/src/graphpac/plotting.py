"""Line charts for optimizer traces and parameter sweeps (PNG via matplotlib)."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

from .optimizer import OptimizerTrace  # noqa: E402


def plot_trace(trace: OptimizerTrace, path: str | Path) -> Path:
    """Objective and loss against the global step index, one line per restart."""
    path = Path(path)
    restarts = trace.column("restart")
    fig, (ax_obj, ax_loss) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    offset = 0
    for r in np.unique(restarts):
        sel = restarts == r
        x = offset + np.arange(int(sel.sum()))
        ax_obj.plot(x, trace.column("objective")[sel], lw=1)
        ax_loss.plot(x, trace.column("loss")[sel], lw=1, label=f"restart {r}")
        offset += int(sel.sum())
    ax_obj.set_ylabel("objective")
    ax_obj.set_yscale("symlog")
    ax_loss.set_ylabel("empirical loss")
    ax_loss.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(param_name: str, params: Sequence[float], curves: dict[str, Sequence[float]],
               best: int, path: str | Path, log_x: bool = False) -> Path:
    """Loss and bound curves over a sweep; the bound minimum is starred."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.asarray(params, dtype=float)
    for name, ys in curves.items():
        ys = np.asarray(ys, dtype=float)
        if np.all(np.isnan(ys)):
            continue
        ax.plot(x, ys, marker="o", ms=3, lw=1, label=name)
    if "bound" in curves:
        ax.plot(x[best], curves["bound"][best], marker="*", ms=14, color="black", ls="none")
    if log_x:
        ax.set_xscale("log")
    else:
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax.set_xlabel(param_name)
    ax.set_ylabel("squared loss")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
