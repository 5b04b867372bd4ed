"""Matplotlib renderings of coefficient curves, rejection frequencies and
volume slices.  Figures are written next to the CSV they were drawn from."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.5,
}


def save(fig, path) -> Path:
    path = Path(path)
    # no Software/date metadata, so reruns are byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def true_regions(t, support):
    """Maximal runs of ``support`` as ``(start, stop)`` pairs in ``t`` units."""
    t = np.asarray(t)
    support = np.asarray(support, dtype=bool)
    half = 0.5 / t.size
    out, start = [], None
    for i, s in enumerate(support):
        if s and start is None:
            start = t[i] - half
        if not s and start is not None:
            out.append((start, t[i] - half))
            start = None
    if start is not None:
        out.append((start, t[-1] + half))
    return out


def curve_figure(t, curves: dict, path, *, truth=None, regions=None, ylabel="beta(t)",
                 title=None, ylim=None) -> Path:
    """Line plot of one or more curves over ``t``; the truth is dashed.

    ``regions`` are drawn as thick horizontal segments along the bottom.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 3.2))
        for label, y in curves.items():
            ax.plot(t, y, label=label)
        if truth is not None:
            ax.plot(t, truth, "k--", lw=1.0, label="true")
        if regions:
            y0 = ax.get_ylim()[0] if ylim is None else ylim[0]
            for a, b in regions:
                ax.plot([a, b], [y0, y0], "k-", lw=4, solid_capstyle="butt")
        if ylim is not None:
            ax.set_ylim(*ylim)
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(curves) > 1 or truth is not None:
            ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        return save(fig, path)


def slice_figure(volumes: dict, path, *, axis: int = 2, indices=None, cmap="RdBu_r",
                 title=None) -> Path:
    """Rows of slices, one row per named volume, sharing a symmetric color scale."""
    vols = {k: np.asarray(v, dtype=float) for k, v in volumes.items()}
    first = next(iter(vols.values()))
    size = first.shape[axis]
    if indices is None:
        indices = np.unique(np.linspace(0, size - 1, 5).round().astype(int))
    vmax = max(float(np.abs(v).max()) for v in vols.values()) or 1.0
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(vols), len(indices), squeeze=False,
                                 figsize=(1.6 * len(indices) + 0.8, 1.7 * len(vols)))
        im = None
        for r, (name, vol) in enumerate(vols.items()):
            for c, k in enumerate(indices):
                sl = np.take(vol, k, axis=axis)
                ax = axes[r, c]
                im = ax.imshow(sl.T, origin="lower", cmap=cmap, vmin=-vmax, vmax=vmax)
                ax.set_xticks([])
                ax.set_yticks([])
                if r == 0:
                    ax.set_title(f"{'uvw'[axis]}={k}", fontsize=8)
                if c == 0:
                    ax.set_ylabel(name, fontsize=8)
        fig.colorbar(im, ax=axes, shrink=0.8)
        if title:
            fig.suptitle(title)
        return save(fig, path)


def bar_figure(labels, values, path, *, ylabel="", title=None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        ax.bar(range(len(values)), values, color="0.4")
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(labels)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return save(fig, path)
