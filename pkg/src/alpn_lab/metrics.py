"""
Evaluation quantities: path diversity, training curves, initial-state
histograms and per-area mastery matrices.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import ConfigurationError
from .knowledge import ExerciseCatalog, KnowledgeState

logger = logging.getLogger(__name__)

DEFAULT_CURVE_WINDOW = 50
DEFAULT_BIN_WIDTH = 0.1
_BIN_EPS = 1e-9


@dataclass(frozen=True)
class LearningPath:
    """Ordered exercise ids recommended within one episode."""
    exercises: tuple[int, ...]

    def __post_init__(self):
        if len(self.exercises) < 1:
            raise ConfigurationError("A learning path needs at least one exercise")

    def __len__(self) -> int:
        return len(self.exercises)

    def check(self, J: int) -> 'LearningPath':
        bad = [e for e in self.exercises if not 0 <= e < J]
        if bad:
            raise ConfigurationError(f"Path holds exercise ids outside [0, {J}): {sorted(set(bad))}")
        return self


def _as_counter(path) -> tuple[Counter, int]:
    exercises = path.exercises if isinstance(path, LearningPath) else tuple(path)
    if not exercises:
        raise ConfigurationError("A learning path needs at least one exercise")
    return Counter(exercises), len(exercises)


def overlap(path_a, path_b) -> int:
    """Multiset intersection size: sum of per-exercise minimum multiplicities."""
    a, _ = _as_counter(path_a)
    b, _ = _as_counter(path_b)
    return sum((a & b).values())


def div(paths: Sequence) -> float:
    """
    Mean pairwise dissimilarity over ordered pairs ``i != j``.

    Each term is ``1 - |P_i & P_j| / len(P_i)``, clamped to [0, 1]; the sum
    is divided by ``N (N - 1)`` so two disjoint paths score exactly 1.

    Raises:
        ConfigurationError: If fewer than two paths are given.
    """
    n = len(paths)
    if n < 2:
        raise ConfigurationError(f"DIV needs at least 2 paths, got {n}")
    counters = [_as_counter(p) for p in paths]
    total = 0.0
    for i, (ci, li) in enumerate(counters):
        for j, (cj, _) in enumerate(counters):
            if i == j:
                continue
            term = 1.0 - sum((ci & cj).values()) / li
            total += min(max(term, 0.0), 1.0)
    return total / (n * (n - 1))


def area_mastery_matrix(states: Sequence[KnowledgeState], catalog: ExerciseCatalog) -> np.ndarray:
    """
    Mean knowledge per area at every timestep (``area_count x T``).

    Areas without exercises are NaN.
    """
    if not states:
        return np.full((catalog.area_count, 0), np.nan)
    matrix = np.stack([s.as_array() if isinstance(s, KnowledgeState) else np.asarray(s, dtype=np.float64)
                       for s in states], axis=1)
    if matrix.shape[0] != catalog.J:
        raise ConfigurationError(f"States have {matrix.shape[0]} exercises, catalog has {catalog.J}")
    areas = np.array(catalog.area_ids)
    out = np.full((catalog.area_count, matrix.shape[1]), np.nan)
    for a in range(catalog.area_count):
        members = areas == a
        if members.any():
            out[a] = matrix[members].mean(axis=0)
    return out


def area_counts(catalog: ExerciseCatalog) -> np.ndarray:
    return np.bincount(np.array(catalog.area_ids), minlength=catalog.area_count)


def moving_average(values: Sequence[float], window: int = DEFAULT_CURVE_WINDOW) -> np.ndarray:
    """Trailing mean over the last ``window`` values (shorter at the start)."""
    if window < 1:
        raise ConfigurationError(f"Moving-average window must be >= 1, got {window}")
    series = pd.Series(np.asarray(values, dtype=np.float64))
    return series.rolling(window, min_periods=1).mean().to_numpy()


def training_curves(history, window: int = DEFAULT_CURVE_WINDOW) -> pd.DataFrame:
    """
    Per-episode outcome, attempts and cumulative reward with trailing means.

    ``history`` is either a history frame (``episode``, ``final_apr``,
    ``path_length``, ``cumulative_reward`` columns) or a sequence of rollout
    episodes.
    """
    if len(history) == 0:
        raise ConfigurationError("Training curves need a non-empty history")
    if isinstance(history, pd.DataFrame):
        frame = history[['episode', 'final_apr', 'path_length', 'cumulative_reward']].reset_index(drop=True)
    else:
        frame = pd.DataFrame({
            'episode': [e.index for e in history],
            'final_apr': [e.final_apr for e in history],
            'path_length': [e.length for e in history],
            'cumulative_reward': [e.cumulative_reward for e in history],
        })
    for column in ('final_apr', 'path_length', 'cumulative_reward'):
        frame[f'{column}_ma'] = moving_average(frame[column], window)
    return frame


def initial_state_histogram(samples: Sequence[float], bin_width: float = DEFAULT_BIN_WIDTH) -> pd.DataFrame:
    """
    Counts of ``apr(s_1)`` samples per left-closed bin over [0, 1).

    Returns a frame with ``bin_start``, ``bin_end`` and ``count`` columns.
    """
    if bin_width <= 0:
        raise ConfigurationError(f"bin_width must be > 0, got {bin_width}")
    n_bins = int(np.ceil(1.0 / bin_width - _BIN_EPS))
    counts = np.zeros(n_bins, dtype=np.int64)
    for x in samples:
        idx = int(np.floor(x / bin_width + _BIN_EPS))
        counts[min(max(idx, 0), n_bins - 1)] += 1
    starts = np.arange(n_bins) * bin_width
    return pd.DataFrame({
        'bin_start': starts,
        'bin_end': np.minimum(starts + bin_width, 1.0),
        'count': counts,
    })


def closest_initial_pair(initial_aprs: Sequence[float]) -> Optional[tuple[int, int]]:
    """Indices of the two students whose initial APRs are closest (first such pair)."""
    if len(initial_aprs) < 2:
        return None
    order = np.argsort(np.asarray(initial_aprs), kind='stable')
    gaps = np.diff(np.asarray(initial_aprs)[order])
    k = int(np.argmin(gaps))
    i, j = int(order[k]), int(order[k + 1])
    return (i, j) if i < j else (j, i)


def summarize(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation; NaN for an empty input."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float('nan'), float('nan')
    return float(arr.mean()), float(arr.std())
