"""
Static PNG rendering of exported curves (``--plots``).
"""

import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

CURVE_PANELS = (
    ('final_apr_ma', 'Final APR'),
    ('path_length_ma', 'Attempts per episode'),
    ('cumulative_reward_ma', 'Cumulative reward'),
)


def plot_training_curves(curves: dict[str, pd.DataFrame], path: Union[str, Path]) -> Path:
    """One panel per curve family; one line per label (variant or variant/seed)."""
    fig, axes = plt.subplots(1, len(CURVE_PANELS), figsize=(15, 4))
    for ax, (column, title) in zip(axes, CURVE_PANELS):
        for label, frame in curves.items():
            ax.plot(frame['episode'], frame[column], label=label, linewidth=1)
        ax.set_title(title)
        ax.set_xlabel('Episode')
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("Wrote %s", path)
    return Path(path)


def plot_histogram(histogram: pd.DataFrame, path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    widths = histogram['bin_end'] - histogram['bin_start']
    ax.bar(histogram['bin_start'], histogram['count'], width=widths, align='edge', edgecolor='black')
    ax.set_xlabel('Initial APR')
    ax.set_ylabel('Students')
    ax.set_xlim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_area_matrix(matrix: np.ndarray, path: Union[str, Path], title: str = '') -> Path:
    fig, ax = plt.subplots(figsize=(10, 3))
    image = ax.imshow(np.ma.masked_invalid(matrix), aspect='auto', vmin=0.0, vmax=1.0, cmap='viridis')
    ax.set_xlabel('Step')
    ax.set_ylabel('Area')
    ax.set_yticks(range(matrix.shape[0]))
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
