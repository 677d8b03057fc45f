"""Figures for the experiment outputs, rendered off-screen to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_decay", "plot_accuracy", "plot_gain", "plot_cdf"]

_META = {"Software": None}


def _save(fig, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_decay(result, path, title: str = "") -> None:
    """Log2 of max-norm variance and mean against level, one line per width."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for ax, column, label in zip(axes, ("var", "mean"), ("variance", "mean")):
        for delta in result.deltas:
            lv, val = result.series(delta, column)
            keep = val > 0
            ax.plot(lv[keep], np.log2(val[keep]), marker="o",
                    label=f"delta={delta:g}" if delta > 0 else "indicator")
        ax.set_xlabel("level")
        ax.set_ylabel(f"log2 {label}")
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_accuracy(records: Sequence, path, title: str = "") -> None:
    """RMSE against the target, and mean final knot count and inverse width."""
    eps = np.array([r.eps for r in records])
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].loglog(eps, [r.rmse for r in records], "o-", base=2, label="empirical RMSE")
    axes[0].loglog(eps, eps, ":", base=2, label="target")
    axes[0].set_xlabel("eps")
    axes[0].legend()
    axes[1].loglog(eps, [r.kn_mean for r in records], "o-", base=2, label="mean k_n")
    axes[1].loglog(eps, [r.inv_delta_mean for r in records], "s-", base=2, label="mean 1/delta")
    axes[1].set_xlabel("eps")
    axes[1].legend()
    for ax in axes:
        ax.invert_xaxis()
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_gain(records: Sequence, path, title: str = "") -> None:
    eps = np.array([r.eps for r in records])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, [r.gain for r in records], "o-", base=2)
    ax.set_xlabel("eps")
    ax.set_ylabel("single-level cost / multilevel cost")
    ax.invert_xaxis()
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_cdf(s, exact, estimates: dict, path, title: str = "") -> None:
    """Exact distribution function with one estimate per accuracy."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(s, exact, "k--", label="exact")
    for eps, values in estimates.items():
        ax.plot(s, values, label=f"eps={eps:g}")
    ax.set_xlabel("s")
    ax.set_ylabel("F(s)")
    ax.grid(alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
