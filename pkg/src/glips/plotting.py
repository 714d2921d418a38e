"""Figure rendering for evaluation reports.

Uses matplotlib's object-oriented API with an Agg canvas directly, so no
global backend state is touched and rendering works headless.
"""

from __future__ import annotations

import math

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .harness import EvaluationReport, plot_data

_HUMAN_COLOR = "#444444"


def render_report_figure(report: EvaluationReport, path: str) -> str:
    """Render grouped rescaled-vs-human bars per model and save the file.

    Output format follows the suffix (SVG recommended); SVG metadata is
    scrubbed of timestamps so repeated renders stay comparable.
    """
    data = plot_data(report)
    models = data["models"]
    series = data["series"]
    fig = Figure(figsize=(max(6.0, 1.8 * len(models) * max(1, len(series)) / 3), 4.0))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)

    positions = np.arange(len(models), dtype=float)
    width = 0.8 / max(1, len(series))
    for i, entry in enumerate(series):
        values = [v if v is not None else math.nan for v in entry["values"]]
        offset = (i - (len(series) - 1) / 2) * width
        color = _HUMAN_COLOR if entry["label"] == "human" else None
        ax.bar(positions + offset, values, width=width, label=entry["label"], color=color)

    ax.set_xticks(positions)
    ax.set_xticklabels(models, rotation=20, ha="right")
    ax.set_ylim(0.0, data["score_max"] * 1.08)
    ax.set_ylabel("Likert score")
    ax.set_title("Rescaled metric scores vs. human averages")
    ax.legend(fontsize=8, ncol=2)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    if path.endswith(".svg"):
        fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path, dpi=150)
    return path


def render_attention_heatmap(scores: np.ndarray, patches_per_side: int,
                             patch_size: int, path: str) -> str:
    """Write per-patch attention as a grayscale image, one block per patch."""
    from PIL import Image

    grid = np.asarray(scores, dtype=np.float64).reshape(patches_per_side, patches_per_side)
    peak = grid.max()
    if peak > 0:
        grid = grid / peak
    pixels = np.kron(grid, np.ones((patch_size, patch_size)))
    Image.fromarray(np.rint(pixels * 255.0).astype(np.uint8), mode="L").save(path)
    return path
