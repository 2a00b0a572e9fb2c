"""Static figures written with matplotlib's Agg backend."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import BUCKET_LABELS, MANEUVERS  # noqa: E402


def plot_learning_curves(binned, metrics, path, title: str = "") -> None:
    """Seed-averaged binned means per run, one panel per metric, std as a band."""
    fig, axes = plt.subplots(1, len(metrics), figsize=(4.5 * len(metrics), 3.5), squeeze=False)
    for ax, metric in zip(axes[0], metrics):
        curves = defaultdict(lambda: defaultdict(list))
        for run, seed, b, first, last, m, mean, std, n in binned:
            if m == metric:
                curves[run][last].append((mean, std))
        for run, pts in sorted(curves.items()):
            xs = sorted(pts)
            mu = np.array([np.mean([p[0] for p in pts[x]]) for x in xs])
            sd = np.array([np.mean([p[1] for p in pts[x]]) for x in xs])
            ax.plot(xs, mu, label=run)
            ax.fill_between(xs, mu - sd, mu + sd, alpha=0.2)
        ax.set_title(metric)
        ax.set_xlabel("step")
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_param_evolution(rows, path) -> None:
    keys = [k for k in rows[0] if k not in ("checkpoint", "n")] if rows else []
    fig, axes = plt.subplots(1, max(len(keys), 1), figsize=(3.2 * max(len(keys), 1), 3), squeeze=False)
    xs = list(range(len(rows)))
    for ax, k in zip(axes[0], keys):
        ys = [np.nan if r[k] is None else r[k] for r in rows]
        ax.plot(xs, ys, marker="o")
        ax.set_title(k, fontsize=8)
        ax.set_xticks(xs, [str(r["checkpoint"]) for r in rows], fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_regret_heatmaps(matrices, path) -> None:
    if not matrices:
        return
    n = max(len(matrices), 1)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 2.8), squeeze=False)
    vmax = max([np.nanmax(m.mean) for m in matrices if np.isfinite(m.mean).any()] or [1.0])
    for ax, m in zip(axes[0], matrices):
        im = ax.imshow(m.mean, vmin=0, vmax=vmax, cmap="viridis")
        ax.set_yticks(range(len(MANEUVERS)), MANEUVERS, fontsize=7)
        ax.set_xticks(range(len(BUCKET_LABELS)), BUCKET_LABELS, fontsize=7)
        ax.set_title(f"{m.label} (H={m.entropy:.2f})", fontsize=8)
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.8)
    fig.savefig(path, dpi=100)
    plt.close(fig)
