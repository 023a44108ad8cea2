"""Grayscale image rendering with the fixed display rule.

Reconstructions are displayed on the range [0.9*min(u*), 1.1*max(u*)] of the
ground truth (values outside truncated); without a ground truth the image's
own range substitutes and callers flag that in the manifest.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from PIL import Image


def display_range(u_star: np.ndarray) -> tuple[float, float]:
    lo = 0.9 * float(np.min(u_star))
    hi = 1.1 * float(np.max(u_star))
    if hi <= lo:
        hi = lo + max(abs(lo), 1.0) * 1e-12
    return lo, hi


def to_uint16(u: np.ndarray, lo: float, hi: float) -> np.ndarray:
    clipped = np.clip(u, lo, hi)
    scaled = (clipped - lo) / (hi - lo) * 65535.0
    return np.round(scaled).astype(np.uint16)


def write_grayscale_png(path, u: np.ndarray, lo: float, hi: float) -> None:
    """16-bit grayscale PNG of u truncated to [lo, hi]."""
    Image.fromarray(to_uint16(u, lo, hi), mode="I;16").save(path)


def sweep_panel(path, rows, col_titles=("ground truth", "TSD", "ACD")) -> None:
    """Panel figure, one row per sweep cell.

    rows: list of (row_title, images, (lo, hi)) with images ordered like
    col_titles. Written as a PNG next to the sweep's CSV output.
    """
    n_rows = len(rows)
    n_cols = len(col_titles)
    fig = Figure(figsize=(2.4 * n_cols, 2.4 * n_rows))
    FigureCanvasAgg(fig)
    axes = fig.subplots(n_rows, n_cols, squeeze=False)
    for i, (title, images, (lo, hi)) in enumerate(rows):
        for j, img in enumerate(images):
            ax = axes[i][j]
            ax.imshow(img, cmap="gray", vmin=lo, vmax=hi, interpolation="nearest")
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0:
                ax.set_title(col_titles[j], fontsize=10)
            if j == 0:
                ax.set_ylabel(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
