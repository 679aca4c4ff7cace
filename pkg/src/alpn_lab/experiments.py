"""
Experiment orchestration behind the management commands.

Run directory layout (``run.output_dir``)::

    manifest.json                 config, config hash, catalog fingerprint, versions
    summary.csv                   one row per seed
    errors.log                    errors mirrored by the commands
    seed_<n>/history.csv          one row per episode
    seed_<n>/trajectories.csv     one row per step
    seed_<n>/curves.csv           per-episode curves with trailing means
    seed_<n>/initial_state_histogram.csv
    seed_<n>/checkpoint.alpn      parameters + Adam moments
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .agent import ActorCriticNet, RolloutEpisode, Trainer, evaluate_policy
from .config import ExperimentConfig
from .environment import StudentEnvironment
from .exceptions import CatalogMismatchError, ConfigurationError, TrainingDivergedError
from .exports import (
    area_frame,
    history_frame,
    read_prefix,
    trajectory_frame,
    versions,
    write_frame,
    write_json,
)
from .knowledge import ExerciseCatalog
from .metrics import (
    area_mastery_matrix,
    closest_initial_pair,
    div,
    initial_state_histogram,
    summarize,
    training_curves,
)
from .models import ExperimentRun
from .registry import start_run, update_run

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.alpn'
MANIFEST_NAME = 'manifest.json'
SUMMARY_COLUMNS = ['seed', 'episodes', 'final_apr', 'path_length', 'cumulative_reward', 'goal_rate', 'div']


def seed_dir(run_dir: Path, seed: int) -> Path:
    return Path(run_dir) / f'seed_{seed}'


def read_frame(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


def window_paths(trajectories: pd.DataFrame, episodes: Sequence[int]) -> list[list[int]]:
    """Exercise sequences of the given episodes, in episode order."""
    wanted = trajectories[trajectories['episode'].isin(list(episodes))]
    return [group.sort_values('step')['exercise_id'].tolist() for _, group in wanted.groupby('episode', sort=True)]


def summarize_seed(history: pd.DataFrame, trajectories: pd.DataFrame, window: int) -> dict:
    """Final-window means of one seed's history, plus DIV of the final-window paths."""
    tail = history.tail(window)
    paths = window_paths(trajectories, tail['episode'])
    return {
        'episodes': len(history),
        'final_apr': float(tail['final_apr'].mean()) if len(tail) else float('nan'),
        'path_length': float(tail['path_length'].mean()) if len(tail) else float('nan'),
        'cumulative_reward': float(tail['cumulative_reward'].mean()) if len(tail) else float('nan'),
        'goal_rate': float(tail['goal_reached'].mean()) if len(tail) else float('nan'),
        'div': div(paths) if len(paths) >= 2 else float('nan'),
    }


@dataclass
class SeedResult:
    seed: int
    run_dir: Path
    history: pd.DataFrame
    summary: dict
    checkpoint: Path


@dataclass
class TrainingReport:
    run_dir: Path
    variant: str
    config_hash: str
    seeds: list[SeedResult] = field(default_factory=list)


class SeedRun:
    """Trains one seed and keeps its on-disk artifacts in step with the trainer."""

    def __init__(self, config: ExperimentConfig, env: StudentEnvironment, seed: int,
                 progress: bool = False, resume: bool = False):
        self.config = config
        self.env = env
        self.seed = seed
        self.dir = seed_dir(config.output_dir, seed)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.checkpoint_path = self.dir / CHECKPOINT_NAME
        self.history_prefix: Optional[str] = None
        self.trajectory_prefix: Optional[str] = None
        self.trainer = Trainer(
            env, config.variant, config.agent, seed,
            workers=config.run.workers,
            progress=progress,
            checkpoint_every=config.run.checkpoint_every,
            checkpoint_hook=self._checkpoint,
        )
        if resume:
            self._resume()
        self.record = start_run(str(config.output_dir), config.config_hash, config.variant, seed,
                                episodes_completed=self.trainer.episodes_done)

    def _resume(self) -> None:
        if not self.checkpoint_path.exists():
            logger.warning("No checkpoint in %s; starting seed %d from scratch", self.dir, self.seed)
            return
        meta = self.trainer.restore(self.checkpoint_path)
        if meta.get('config_hash') != self.config.config_hash:
            raise ConfigurationError(
                f"{self.checkpoint_path} was written under a different configuration", field='config')
        done = self.trainer.episodes_done
        self.history_prefix = read_prefix(self.dir / 'history.csv', done)
        self.trajectory_prefix = read_prefix(self.dir / 'trajectories.csv', done)
        logger.info("Resuming seed %d from episode %d", self.seed, done)

    def write_history(self) -> None:
        episodes = self.trainer.history.episodes
        write_frame(history_frame(episodes, self.seed, self.config.variant),
                    self.dir / 'history.csv', prefix=self.history_prefix)
        write_frame(trajectory_frame(episodes, self.seed, self.env.catalog),
                    self.dir / 'trajectories.csv', prefix=self.trajectory_prefix)

    def _checkpoint(self, trainer: Trainer) -> str:
        self.write_history()
        trainer.save(self.checkpoint_path, {'config_hash': self.config.config_hash})
        update_run(self.record, episodes_completed=trainer.episodes_done,
                   last_checkpoint=str(self.checkpoint_path))
        return str(self.checkpoint_path)

    def run(self) -> SeedResult:
        try:
            self.trainer.run(self.config.run.episodes)
        except TrainingDivergedError:
            update_run(self.record, status=ExperimentRun.STATUS_FAILED,
                       episodes_completed=self.trainer.episodes_done)
            raise
        self.write_history()
        self.trainer.save(self.checkpoint_path, {'config_hash': self.config.config_hash})

        history = read_frame(self.dir / 'history.csv')
        trajectories = read_frame(self.dir / 'trajectories.csv')
        if len(history):
            write_frame(training_curves(history, self.config.run.curve_window), self.dir / 'curves.csv')
        write_frame(initial_state_histogram(history['initial_apr'], self.config.run.bin_width),
                    self.dir / 'initial_state_histogram.csv')
        summary = summarize_seed(history, trajectories, self.config.run.curve_window)
        update_run(self.record, status=ExperimentRun.STATUS_COMPLETED,
                   episodes_completed=self.trainer.episodes_done, last_checkpoint=str(self.checkpoint_path))
        return SeedResult(self.seed, self.dir, history, summary, self.checkpoint_path)


def write_manifest(config: ExperimentConfig, catalog: ExerciseCatalog, extra: Optional[dict] = None) -> Path:
    manifest = {
        'variant': config.variant,
        'seeds': list(config.run.seeds),
        'episodes': config.run.episodes,
        'config_hash': config.config_hash,
        'config': config.data,
        'catalog': catalog.fingerprint(),
        'versions': versions(),
    }
    manifest.update(extra or {})
    return write_json(manifest, config.output_dir / MANIFEST_NAME)


def run_training(config: ExperimentConfig, progress: bool = False, resume: bool = False) -> TrainingReport:
    """Train every configured seed; write per-seed artifacts, summary and manifest."""
    catalog = config.build_catalog()
    env = config.build_environment(catalog)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(config, catalog)

    report = TrainingReport(config.output_dir, config.variant, config.config_hash)
    for seed in config.run.seeds:
        report.seeds.append(SeedRun(config, env, seed, progress=progress, resume=resume).run())

    summary = pd.DataFrame([{'seed': r.seed, **r.summary} for r in report.seeds], columns=SUMMARY_COLUMNS)
    write_frame(summary, config.output_dir / 'summary.csv')
    return report


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

@dataclass
class RunArtifacts:
    label: str
    run_dir: Path
    manifest: dict
    histories: dict[int, pd.DataFrame]
    trajectories: dict[int, pd.DataFrame]


def load_run(run_dir: Path, label: Optional[str] = None) -> RunArtifacts:
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ConfigurationError(f"{run_dir} has no {MANIFEST_NAME}; train it first", field='run')
    with open(manifest_path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)
    histories, trajectories = {}, {}
    for seed in manifest['seeds']:
        d = seed_dir(run_dir, seed)
        if not (d / 'history.csv').exists():
            raise ConfigurationError(f"{d} has no history.csv", field='run')
        histories[seed] = read_frame(d / 'history.csv')
        trajectories[seed] = read_frame(d / 'trajectories.csv')
    return RunArtifacts(label or manifest['variant'], run_dir, manifest, histories, trajectories)


def compare_runs(runs: Sequence[RunArtifacts], window: int) -> dict[str, pd.DataFrame]:
    """
    Aligned curves, per-seed summaries and mean/std summaries across runs.

    Raises:
        ConfigurationError: For fewer than two runs.
        CatalogMismatchError: If the runs used different exercise catalogs.
    """
    if len(runs) < 2:
        raise ConfigurationError("compare needs at least two runs")
    fingerprints = {r.manifest['catalog'] for r in runs}
    if len(fingerprints) > 1:
        raise CatalogMismatchError(
            "Runs were trained on different catalogs: "
            + ', '.join(f"{r.label}={r.manifest['catalog']}" for r in runs))

    labels: dict[str, int] = {}
    curves, per_seed = [], []
    for r in runs:
        labels[r.label] = labels.get(r.label, 0) + 1
        label = r.label if labels[r.label] == 1 else f"{r.label}#{labels[r.label]}"
        for seed, history in r.histories.items():
            if len(history):
                frame = training_curves(history, window)
                frame.insert(0, 'seed', seed)
                frame.insert(0, 'run', label)
                curves.append(frame)
            per_seed.append({'run': label, 'seed': seed, **summarize_seed(history, r.trajectories[seed], window)})

    seeds = pd.DataFrame(per_seed)
    rows = []
    metrics = ['final_apr', 'path_length', 'cumulative_reward', 'goal_rate', 'div']
    baseline = None
    for label, group in seeds.groupby('run', sort=False):
        row = {'run': label, 'seeds': len(group)}
        for m in metrics:
            row[f'{m}_mean'], row[f'{m}_std'] = summarize(group[m].dropna())
        if baseline is None:
            baseline = row
        for m in metrics:
            row[f'{m}_delta'] = row[f'{m}_mean'] - baseline[f'{m}_mean']
        rows.append(row)

    return {
        'curves': pd.concat(curves, ignore_index=True) if curves else pd.DataFrame(),
        'seeds': seeds,
        'summary': pd.DataFrame(rows),
    }


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvaluationReport:
    episodes: list[RolloutEpisode]
    div: Optional[float]
    closest_pair: Optional[tuple[int, int]]
    closest_pair_div: Optional[float]
    mean_final_apr: float
    mean_path_length: float
    goal_rate: float

    def as_dict(self) -> dict:
        return {
            'students': len(self.episodes),
            'div': self.div,
            'closest_pair': list(self.closest_pair) if self.closest_pair else None,
            'closest_pair_div': self.closest_pair_div,
            'mean_final_apr': self.mean_final_apr,
            'mean_path_length': self.mean_path_length,
            'goal_rate': self.goal_rate,
        }


def load_policy(checkpoint: Path, catalog: ExerciseCatalog) -> tuple[ActorCriticNet, dict]:
    net, _, meta = ActorCriticNet.from_checkpoint(checkpoint)
    if meta.get('catalog') != catalog.fingerprint() or net.J != catalog.J:
        raise CatalogMismatchError(
            f"{checkpoint} was trained on catalog {meta.get('catalog')}, config builds {catalog.fingerprint()}",
            field='catalog')
    return net, meta


def goal_step(episode: RolloutEpisode) -> Optional[int]:
    return episode.length if episode.goal_reached else None


def evaluate(config: ExperimentConfig, checkpoint: Path, students: int, seed: int,
             greedy: bool = False) -> EvaluationReport:
    catalog = config.build_catalog()
    net, _ = load_policy(checkpoint, catalog)
    env = config.build_environment(catalog)
    episodes = evaluate_policy(env, net, students, seed, greedy=greedy, workers=config.run.workers)

    paths = [e.path for e in episodes if e.length]
    pair = closest_initial_pair([e.initial_apr for e in episodes])
    pair_div = None
    if pair is not None and episodes[pair[0]].length and episodes[pair[1]].length:
        pair_div = div([episodes[pair[0]].path, episodes[pair[1]].path])
    return EvaluationReport(
        episodes=episodes,
        div=div(paths) if len(paths) >= 2 else None,
        closest_pair=pair,
        closest_pair_div=pair_div,
        mean_final_apr=float(np.mean([e.final_apr for e in episodes])),
        mean_path_length=float(np.mean([e.length for e in episodes])),
        goal_rate=float(np.mean([e.goal_reached for e in episodes])),
    )


def write_evaluation(report: EvaluationReport, catalog: ExerciseCatalog, out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    students = pd.DataFrame([{
        'student': e.index,
        'initial_apr': e.initial_apr,
        'final_apr': e.final_apr,
        'path_length': e.length,
        'goal_step': goal_step(e) if goal_step(e) is not None else '',
        'cumulative_reward': e.cumulative_reward,
    } for e in report.episodes], columns=['student', 'initial_apr', 'final_apr', 'path_length',
                                          'goal_step', 'cumulative_reward'])
    apr_rows = [{'student': e.index, 'step': t, 'apr': value}
                for e in report.episodes for t, value in enumerate(e.apr_curve())]
    paths = trajectory_frame(report.episodes, 0, catalog).drop(columns=['seed']).rename(columns={'episode': 'student'})
    return {
        'students': write_frame(students, out_dir / 'eval_students.csv'),
        'paths': write_frame(paths, out_dir / 'eval_paths.csv'),
        'apr': write_frame(pd.DataFrame(apr_rows, columns=['student', 'step', 'apr']), out_dir / 'eval_apr.csv'),
        'areas': write_frame(area_frame(report.episodes, catalog), out_dir / 'eval_area_mastery.csv'),
        'report': write_json(report.as_dict(), out_dir / 'eval_report.json'),
    }


def area_matrices(report: EvaluationReport, catalog: ExerciseCatalog) -> dict[int, np.ndarray]:
    return {e.index: area_mastery_matrix(e.states(), catalog) for e in report.episodes}
