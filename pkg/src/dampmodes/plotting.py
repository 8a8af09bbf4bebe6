"""Static figures written next to the CSV output.

Everything renders through the Agg backend into files; nothing is shown
on screen.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["trajectory_figure", "sweep_figure"]


def trajectory_figure(table: np.ndarray, path: str | Path, title: str | None = None,
                      oracle: np.ndarray | None = None) -> Path:
    """Means, second moments and the uncertainty product against time.

    Parameters
    ----------
    table : ndarray, shape (n, >=7)
        Rows of ``t, mean_x, mean_p, sigma_xx, sigma_pp, sigma_xp, delta``
        as written to the CSV; extra columns are ignored.
    path : path-like
        Output image file; the format follows the suffix.
    oracle : ndarray, optional
        Same layout, drawn as markers on top of the curves.
    """
    table = np.atleast_2d(np.asarray(table, dtype=float))
    t = table[:, 0]
    fig, axes = plt.subplots(3, 1, figsize=(6.0, 7.5), sharex=True)
    labels = ["<x>", "<p>", "sigma_xx", "sigma_pp", "sigma_xp"]
    for col, lab in zip((1, 2), labels[:2]):
        axes[0].plot(t, table[:, col], label=lab)
    for col, lab in zip((3, 4, 5), labels[2:]):
        axes[1].plot(t, table[:, col], label=lab)
    axes[2].plot(t, table[:, 6], color="k", label="delta")
    axes[2].axhline(0.25, color="r", lw=0.8, ls="--", label="1/4")
    if oracle is not None:
        oracle = np.atleast_2d(np.asarray(oracle, dtype=float))
        step = max(1, len(oracle) // 25)
        sl = slice(None, None, step)
        for col in (1, 2):
            axes[0].plot(oracle[sl, 0], oracle[sl, col], "o", ms=3, mfc="none", color="0.4")
        for col in (3, 4, 5):
            axes[1].plot(oracle[sl, 0], oracle[sl, col], "o", ms=3, mfc="none", color="0.4")
        axes[2].plot(oracle[sl, 0], oracle[sl, 6], "o", ms=3, mfc="none", color="0.4",
                     label="density matrix")
    axes[0].set_ylabel("means")
    axes[1].set_ylabel("second moments")
    axes[2].set_ylabel("uncertainty")
    axes[2].set_xlabel("t")
    for ax in axes:
        ax.legend(loc="best", fontsize="small", frameon=False)
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def sweep_figure(values: Sequence[float], columns: dict[str, Sequence[float]],
                 path: str | Path, xlabel: str = "parameter") -> Path:
    """One curve per summary column against the swept parameter."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, ys in columns.items():
        ax.plot(values, ys, "o-", ms=3, label=name)
    ax.axhline(0.25, color="r", lw=0.8, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("delta")
    ax.legend(loc="best", fontsize="small", frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
