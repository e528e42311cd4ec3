"""Figure rendering for the CLI report paths.

Each function draws one PNG next to the delimited output it illustrates.
The Agg backend keeps rendering headless and reruns byte-stable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .mdpo_data import PairStats
from .toylab import MarginCurve

_DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_scorecard_figure(scorecard: dict, path) -> None:
    """Per-threshold captioning scores plus the headline numbers."""
    taus = list(scorecard["per_tau"])
    meteor = [scorecard["per_tau"][t]["meteor"] for t in taus]
    cider = [scorecard["per_tau"][t]["cider"] for t in taus]
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(taus))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], meteor, width, label="METEOR")
    ax.bar([x + width / 2 for x in xs], cider, width, label="CIDEr")
    ax.set_xticks(list(xs), [f"tIoU {t}" for t in taus])
    ax.set_ylabel("score (0-100)")
    ax.set_title(
        f"SODA_c {scorecard['soda_c']['f1']:.2f} | METEOR {scorecard['meteor']:.2f} "
        f"| CIDEr {scorecard['cider']:.2f}"
    )
    ax.legend()
    _save(fig, path)


def render_tvg_figure(scorecard: dict, path) -> None:
    labels = list(scorecard["recall_at"])
    values = [scorecard["recall_at"][k] for k in labels]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)), [f"R@{k}" for k in labels])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("recall")
    ax.set_title(f"mIoU {scorecard['miou']:.2f} over {scorecard['query_count']} queries")
    _save(fig, path)


def render_pair_stats_figure(stats: PairStats, path) -> None:
    """Gap histogram and the retention curve over the gamma grid."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    bins = sorted(stats.gap_histogram)
    left.bar(bins, [stats.gap_histogram[b] for b in bins], width=4.5, align="edge")
    left.set_xlabel("metric gap m_w - m_l")
    left.set_ylabel("pairs")
    left.set_title("gap distribution")
    gammas = sorted(stats.retained_by_gamma)
    right.plot(gammas, [stats.retained_by_gamma[g] for g in gammas], marker="o")
    right.set_xlabel("gamma")
    right.set_ylabel("retained pairs")
    right.set_title("gate retention")
    _save(fig, path)


def render_margin_figure(curves: list[MarginCurve], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        ax.plot(range(len(curve.mean_margins)), curve.mean_margins, label=curve.mode)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean margin")
    ax.set_title("preference margin by objective")
    ax.legend()
    _save(fig, path)
