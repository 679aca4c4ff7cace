"""
Delimited exports of training and evaluation results.

Every file has a header row. Floats are written with Python's shortest
round-trip representation, so identical runs produce identical bytes.
Column meanings are documented in PLOTTING.md.
"""

import json
import logging
import platform
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .agent import RolloutEpisode
from .knowledge import ExerciseCatalog
from .metrics import area_mastery_matrix

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = [
    'episode', 'seed', 'variant', 'initial_apr', 'final_apr',
    'path_length', 'cumulative_reward', 'goal_reached',
]
TRAJECTORY_COLUMNS = [
    'episode', 'seed', 'step', 'exercise_id', 'topic_id', 'area_id', 'correctness',
    'reward', 'apr', 'lg', 'd', 'lambda', 'n_action', 'branch', 'penalty_applied',
    'log_prob', 'entropy', 'value',
]
AREA_COLUMNS = ['student', 'area_id', 'step', 'mastery']


def write_frame(frame: pd.DataFrame, path: Union[str, Path], prefix: Optional[str] = None) -> Path:
    """
    Write ``frame`` as CSV. ``prefix`` is raw CSV text (header included) that
    precedes the rows of ``frame``; the frame's own header is then omitted.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(index=False, header=prefix is None, lineterminator='\n')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        if prefix is not None:
            f.write(prefix)
        f.write(body)
    return path


def read_prefix(path: Union[str, Path], episodes_done: int) -> Optional[str]:
    """Header plus the rows of ``path`` whose episode index is below ``episodes_done``."""
    path = Path(path)
    if not path.exists():
        return None
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = f.readlines()
    if not lines:
        return None
    kept = [lines[0]] + [ln for ln in lines[1:] if ln.strip() and int(ln.split(',', 1)[0]) < episodes_done]
    return ''.join(kept)


def history_frame(episodes: Iterable[RolloutEpisode], seed: int, variant: str) -> pd.DataFrame:
    rows = [{
        'episode': e.index,
        'seed': seed,
        'variant': variant,
        'initial_apr': e.initial_apr,
        'final_apr': e.final_apr,
        'path_length': e.length,
        'cumulative_reward': e.cumulative_reward,
        'goal_reached': int(e.goal_reached),
    } for e in episodes]
    return pd.DataFrame(rows, columns=HISTORY_COLUMNS)


def trajectory_frame(episodes: Iterable[RolloutEpisode], seed: int, catalog: ExerciseCatalog) -> pd.DataFrame:
    rows = []
    for e in episodes:
        for step, r in enumerate(e.records, start=1):
            exercise = catalog.exercises[r.action]
            rows.append({
                'episode': e.index,
                'seed': seed,
                'step': step,
                'exercise_id': exercise.exercise_id,
                'topic_id': exercise.topic_id,
                'area_id': exercise.area_id,
                'correctness': r.correctness,
                'reward': r.reward,
                'apr': r.info.apr_now,
                'lg': r.info.lg,
                'd': r.info.d,
                'lambda': r.info.lam,
                'n_action': r.info.n_action,
                'branch': r.info.branch,
                'penalty_applied': int(r.info.penalty_applied),
                'log_prob': r.log_prob,
                'entropy': r.entropy,
                'value': r.value,
            })
    return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def area_frame(episodes: Sequence[RolloutEpisode], catalog: ExerciseCatalog) -> pd.DataFrame:
    """Long-format per-area mastery for every evaluated student and timestep."""
    frames = []
    for e in episodes:
        matrix = area_mastery_matrix(e.states(), catalog)
        areas, steps = np.meshgrid(np.arange(matrix.shape[0]), np.arange(matrix.shape[1]), indexing='ij')
        frames.append(pd.DataFrame({
            'student': e.index,
            'area_id': areas.ravel(),
            'step': steps.ravel(),
            'mastery': matrix.ravel(),
        }))
    if not frames:
        return pd.DataFrame(columns=AREA_COLUMNS)
    return pd.concat(frames, ignore_index=True)[AREA_COLUMNS]


def write_json(data: dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
        f.write('\n')
    return path


def versions() -> dict:
    import django
    import rest_framework

    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'pandas': pd.__version__,
        'django': django.get_version(),
        'djangorestframework': rest_framework.VERSION,
    }
