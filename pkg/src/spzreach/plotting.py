"""Static figures for the CLI reports (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon, Rectangle  # noqa: E402


def _polys(ax, polygons, color, alpha, label=None, edge=None):
    for k, P in enumerate(polygons):
        if P.shape[0] < 3:
            ax.plot(P[:, 0], P[:, 1], ".", color=color)
            continue
        ax.add_patch(
            Polygon(P, closed=True, facecolor=color, edgecolor=edge or color, alpha=alpha, lw=0.5,
                    label=label if k == 0 else None)
        )


def _finish(ax, fig, path, xlabel, ylabel, title):
    ax.autoscale_view()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    handles, _ = ax.get_legend_handles_labels()
    if handles:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_reach(path, interval_polys, final_poly, initial_poly, samples=None, labels=("x1", "x2")):
    """Time-interval enclosures, initial and final sets, optional sample cloud."""
    fig, ax = plt.subplots(figsize=(6, 5))
    _polys(ax, interval_polys, "0.7", 0.5, "time-interval enclosures")
    _polys(ax, [initial_poly], "tab:green", 0.6, "initial set")
    _polys(ax, [final_poly], "tab:blue", 0.6, "final set (enclosure)")
    if samples is not None and len(samples):
        ax.plot(samples[:, 0], samples[:, 1], ".", ms=1.5, color="k", label="simulated final states")
    _finish(ax, fig, path, labels[0], labels[1], "Reachable set (zonotope enclosures)")


def plot_extract(path, full_final, extracted_polys, extracted_final, labels=("x1", "x2")):
    fig, ax = plt.subplots(figsize=(6, 5))
    _polys(ax, [full_final], "0.75", 0.6, "full final set")
    _polys(ax, extracted_polys, "tab:orange", 0.3, "extracted sets")
    _polys(ax, [extracted_final], "tab:red", 0.8, "extracted final set")
    _finish(ax, fig, path, labels[0], labels[1], "Extracted reachable subset")


def plot_falsify(path, final_poly, trajectory, a, b, labels=("x1", "x2")):
    fig, ax = plt.subplots(figsize=(6, 5))
    _polys(ax, [final_poly], "tab:blue", 0.4, "final set (enclosure)")
    ax.plot(trajectory[:, 0], trajectory[:, 1], "-", color="tab:red", lw=1.2, label="witness trajectory")
    ax.plot(trajectory[-1, 0], trajectory[-1, 1], "o", color="tab:red")
    ax.autoscale_view()
    xlim, ylim = ax.get_xlim(), ax.get_ylim()
    if abs(a[1]) > 1e-12:
        xs = np.linspace(*xlim, 2)
        ax.plot(xs, (b - a[0] * xs) / a[1], "k--", lw=1, label="a^T x = b")
    else:
        ax.axvline(b / a[0], color="k", ls="--", lw=1, label="a^T x = b")
    ax.set_xlim(xlim)
    ax.set_ylim(ylim)
    _finish(ax, fig, path, labels[0], labels[1], "Falsification")


def plot_boxes(path, safe, unknown, highlight=None, labels=("alpha1", "alpha2")):
    """Factor-space boxes (first two factors)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for boxes, color, label in ((safe, "tab:green", "safe"), (unknown, "tab:red", "unknown")):
        for k, (lo, hi) in enumerate(boxes):
            ax.add_patch(Rectangle((lo[0], lo[1]), hi[0] - lo[0], hi[1] - lo[1], facecolor=color,
                                   edgecolor="k", lw=0.3, alpha=0.6, label=label if k == 0 else None))
    if highlight is not None:
        lo, hi = highlight
        ax.add_patch(Rectangle((lo[0], lo[1]), hi[0] - lo[0], hi[1] - lo[1], fill=False,
                               edgecolor="tab:blue", lw=2, label="certified box"))
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_aspect("equal")
    _finish(ax, fig, path, labels[0], labels[1], "Initial factor domain")
