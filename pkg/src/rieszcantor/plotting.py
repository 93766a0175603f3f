"""Static figures for reports: point sets, ratio brackets and benchmark timings.

Figures are written with the Agg backend and with the date/hash metadata
pinned, so the same data produce byte-identical SVG files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_cantor", "plot_ratios", "plot_bench", "plot_martingale", "save_figure"]

_STYLE = {
    "figure.figsize": (6.0, 4.5),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "svg.hashsalt": "rieszcantor",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def save_figure(fig, path) -> Path:
    """Save to ``path`` (format from the suffix) with reproducible metadata."""
    path = Path(path)
    fmt = path.suffix.lstrip(".")
    meta = {"Date": None} if fmt == "svg" else {"Software": None} if fmt == "png" else None
    with plt.rc_context(_STYLE):
        fig.savefig(path, format=fmt, metadata=meta)
    plt.close(fig)
    return path


def _new(figsize=None):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=figsize or _STYLE["figure.figsize"])
    return fig, ax


def plot_cantor(tree, measure, path, decomposition=None, title: str = ""):
    """Leaf cubes of a planar (or first two coordinates of a) Cantor set.

    Leaves are coloured by log density, or by owning tree when a
    decomposition is given.
    """
    leaves = tree.leaves
    c = tree.center[leaves]
    fig, ax = _new((5.0, 5.0))
    xy = c[:, :2] if c.shape[1] >= 2 else np.column_stack([c[:, 0], np.zeros(len(c))])
    if decomposition is not None:
        owners = decomposition.tree_of[leaves]
        _, colour = np.unique(owners, return_inverse=True)
        sc = ax.scatter(xy[:, 0], xy[:, 1], c=colour % 20, cmap="tab20", s=4, marker="s", linewidths=0)
        label = f"{len(decomposition.top)} trees"
    else:
        dens = np.log10(np.maximum(measure.theta[leaves], 1e-300))
        sc = ax.scatter(xy[:, 0], xy[:, 1], c=dens, cmap="viridis", s=4, marker="s", linewidths=0)
        fig.colorbar(sc, ax=ax, label="log10 density of leaf")
        label = f"{len(leaves)} leaves"
    ax.set_aspect("equal")
    ax.set_title(title or label)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return save_figure(fig, path)


def plot_ratios(rows, path, keys=("energy_over_sigma", "sigma_over_wolff", "gamma_over_cap")):
    """One marker per battery entry and ratio, on a log axis."""
    fig, ax = _new((7.0, 4.5))
    names = [r["name"] for r in rows]
    x = np.arange(len(rows))
    for k, key in enumerate(keys):
        vals = np.array([r.get(key) if r.get(key) is not None else np.nan for r in rows], dtype=float)
        ax.plot(x, vals, marker="os^dv"[k % 5], linestyle="none", label=key)
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=70, ha="right", fontsize=7)
    ax.set_ylabel("ratio")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return save_figure(fig, path)


def plot_bench(rows, path):
    """Direct and treecode wall times against N."""
    fig, ax = _new()
    n = np.array([r["N"] for r in rows], dtype=float)
    ax.loglog(n, [r["direct_s"] for r in rows], "o-", label="direct")
    ax.loglog(n, [r["treecode_s"] for r in rows], "s-", label="treecode")
    ax.set_xlabel("number of points N")
    ax.set_ylabel("wall time [s]")
    ax.legend()
    return save_figure(fig, path)


def plot_martingale(block_by_generation, path):
    """Sum of squared martingale blocks per generation."""
    fig, ax = _new()
    g = np.arange(len(block_by_generation))
    ax.semilogy(g, np.maximum(block_by_generation, 1e-300), "o-")
    ax.set_xlabel("generation")
    ax.set_ylabel("sum of |D_Q f|^2")
    return save_figure(fig, path)
