"""CSV and figure rendering for the CLI report paths.

Each report writer emits a delimited file and a PNG figure side by
side.  PNG is used deliberately: the writer embeds no timestamps, so
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

PathLike = Union[str, Path]

EFFICIENCY_COLUMNS = [
    "config",
    "n_visual",
    "n_text",
    "n_tokens",
    "dtype",
    "flops_total",
    "weights_bytes",
    "kv_cache_bytes",
    "activation_bytes",
    "total_memory_bytes",
    "prefill_seconds",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_csv(path: PathLike, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_efficiency_csv(rows: List[Dict], path: PathLike) -> None:
    write_csv(path, EFFICIENCY_COLUMNS,
              [[row[c] for c in EFFICIENCY_COLUMNS] for row in rows])


def render_efficiency_figure(rows: List[Dict], path: PathLike) -> None:
    """2x2 bar panel: FLOPs, prefill time, KV cache, activation."""
    plt = _pyplot()
    labels = [row["config"] for row in rows]
    panels = [
        ("FLOPs (1e12)", [row["flops_total"] / 1e12 for row in rows]),
        ("Prefill time (ms)", [row["prefill_seconds"] * 1e3 for row in rows]),
        ("KV cache (MB)", [row["kv_cache_bytes"] / 1e6 for row in rows]),
        ("Activation (GB)", [row["activation_bytes"] / 1e9 for row in rows]),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for ax, (title, values) in zip(axes.ravel(), panels):
        ax.bar(range(len(values)), values, color="#4878a8")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
        ax.set_title(title, fontsize=10)
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle("Prefill cost vs. sequence configuration")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_overlap_csv(matrix: np.ndarray, labels: Sequence[str], path: PathLike) -> None:
    header = ["metric"] + list(labels)
    rows = [[labels[i]] + [f"{matrix[i, j]:.6f}" for j in range(len(labels))]
            for i in range(len(labels))]
    write_csv(path, header, rows)


def render_overlap_figure(matrix: np.ndarray, labels: Sequence[str],
                          path: PathLike) -> None:
    """Annotated heatmap of the pairwise kept-set Jaccard matrix."""
    plt = _pyplot()
    n = len(labels)
    fig, ax = plt.subplots(figsize=(1.2 * n + 2, 1.0 * n + 1.5))
    im = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_yticklabels(labels)
    for i in range(n):
        for j in range(n):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                    color="white" if matrix[i, j] < 0.6 else "black", fontsize=9)
    ax.set_title("Kept-set overlap between retrieval strategies")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_prune_csv(scores: np.ndarray, kept: np.ndarray, path: PathLike) -> None:
    kept_set = set(int(i) for i in kept)
    rows = [[i, repr(float(scores[i])), int(i in kept_set)]
            for i in range(len(scores))]
    write_csv(path, ["token_index", "score", "kept"], rows)


def render_prune_figure(scores: np.ndarray, kept: np.ndarray,
                        path: PathLike) -> None:
    """Score per token with the kept subset highlighted."""
    plt = _pyplot()
    n = len(scores)
    kept_mask = np.zeros(n, dtype=bool)
    kept_mask[kept] = True
    fig, ax = plt.subplots(figsize=(9, 4))
    idx = np.arange(n)
    ax.scatter(idx[~kept_mask], scores[~kept_mask], s=8, color="#b0b0b0",
               label="dropped")
    ax.scatter(idx[kept_mask], scores[kept_mask], s=10, color="#c23b22",
               label="kept")
    ax.set_xlabel("original token index")
    ax.set_ylabel("relevance score")
    ax.set_title(f"Token relevance ({kept_mask.sum()}/{n} kept)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
