"""
Knowledge-state representation and the scalar quantities derived from it.

A knowledge state holds, for every exercise of the catalog, the probability
that the student answers it correctly. Everything the reward and the
termination test need (APR, learning gain, distance to goal) is computed
here as pure functions on immutable values.
"""

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .exceptions import CatalogError, ConfigurationError, InvalidActionError

# Raw model outputs are clamped into [STATE_EPS, 1 - STATE_EPS].
STATE_EPS = 1e-6

CATALOG_COLUMNS = ('exercise_id', 'topic_id', 'area_id')


@dataclass(frozen=True)
class Exercise:
    exercise_id: int
    topic_id: int
    area_id: int


@dataclass(frozen=True)
class ExerciseCatalog:
    """
    The J exercises with their topic and area labels.

    Defines the agent's action space. Exercise ids are exactly 0..J-1 and
    every topic belongs to exactly one area.
    """
    exercises: tuple[Exercise, ...]
    topic_count: int
    area_count: int

    def __post_init__(self):
        if len(self.exercises) < 1:
            raise CatalogError("Catalog must contain at least one exercise")
        ids = [e.exercise_id for e in self.exercises]
        if sorted(ids) != list(range(len(ids))):
            raise CatalogError("Exercise ids must be exactly 0..J-1 without duplicates")
        if ids != sorted(ids):
            object.__setattr__(
                self, 'exercises', tuple(sorted(self.exercises, key=lambda e: e.exercise_id))
            )

        topic_area: dict[int, int] = {}
        for e in self.exercises:
            if not 0 <= e.topic_id < self.topic_count:
                raise CatalogError(f"Exercise {e.exercise_id}: topic_id {e.topic_id} out of range")
            if not 0 <= e.area_id < self.area_count:
                raise CatalogError(f"Exercise {e.exercise_id}: area_id {e.area_id} out of range")
            known = topic_area.setdefault(e.topic_id, e.area_id)
            if known != e.area_id:
                raise CatalogError(
                    f"Topic {e.topic_id} maps to areas {known} and {e.area_id}"
                )

    @property
    def J(self) -> int:
        return len(self.exercises)

    @property
    def topic_ids(self) -> np.ndarray:
        return np.array([e.topic_id for e in self.exercises], dtype=np.int64)

    @property
    def area_ids(self) -> np.ndarray:
        return np.array([e.area_id for e in self.exercises], dtype=np.int64)

    def same_topic_mask(self, exercise_id: int) -> np.ndarray:
        """Boolean mask of the other exercises sharing ``exercise_id``'s topic."""
        topics = self.topic_ids
        mask = topics == topics[exercise_id]
        mask[exercise_id] = False
        return mask

    def check_exercise(self, exercise_id: int) -> int:
        if not 0 <= int(exercise_id) < self.J:
            raise InvalidActionError(f"Exercise id {exercise_id} outside catalog of size {self.J}")
        return int(exercise_id)

    def fingerprint(self) -> str:
        """Stable identifier used to detect catalog mismatches between artifacts."""
        digest = hashlib.sha256()
        digest.update(f"{self.J}:{self.topic_count}:{self.area_count}".encode())
        for e in self.exercises:
            digest.update(f"|{e.exercise_id},{e.topic_id},{e.area_id}".encode())
        return digest.hexdigest()[:16]

    @classmethod
    def synthetic(cls, J: int, topic_count: int, area_count: int) -> 'ExerciseCatalog':
        """
        Build a catalog with exercises dealt round-robin over topics and topics
        dealt round-robin over areas.
        """
        if J < 1 or topic_count < 1 or area_count < 1:
            raise CatalogError("J, topic_count and area_count must all be >= 1")
        if topic_count > J:
            raise CatalogError(f"topic_count {topic_count} exceeds J {J}")
        if area_count > topic_count:
            raise CatalogError(f"area_count {area_count} exceeds topic_count {topic_count}")
        exercises = tuple(
            Exercise(j, j % topic_count, (j % topic_count) % area_count) for j in range(J)
        )
        return cls(exercises, topic_count, area_count)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'ExerciseCatalog':
        """
        Read a catalog file: header ``exercise_id,topic_id,area_id`` then one
        row per exercise. Topic and area counts are inferred as max id + 1.
        """
        path = Path(path)
        if not path.exists():
            raise CatalogError(f"Catalog file not found: {path}")

        rows: list[Exercise] = []
        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or not set(CATALOG_COLUMNS).issubset(reader.fieldnames):
                raise CatalogError(
                    f"Catalog must have headers {list(CATALOG_COLUMNS)}. Found: {reader.fieldnames}"
                )
            for idx, row in enumerate(reader, start=2):
                try:
                    rows.append(Exercise(*(int(row[c]) for c in CATALOG_COLUMNS)))
                except (TypeError, ValueError) as e:
                    raise CatalogError(f"Line {idx}: {e}", line=idx)

        if not rows:
            raise CatalogError(f"Catalog file {path} has no exercises")
        topic_count = max(e.topic_id for e in rows) + 1
        area_count = max(e.area_id for e in rows) + 1
        return cls(tuple(rows), topic_count, area_count)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(CATALOG_COLUMNS)
            for e in self.exercises:
                writer.writerow((e.exercise_id, e.topic_id, e.area_id))


@dataclass(frozen=True)
class KnowledgeState:
    """
    Per-exercise correct-answer probabilities.

    Construction clamps into the open interval (0, 1) so saturated model
    outputs never produce a degenerate APR.
    """
    s: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.s, dtype=np.float64).reshape(-1)
        if values.size < 1:
            raise ConfigurationError("Knowledge state must have at least one element")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("Knowledge state contains non-finite values")
        values = np.clip(values, STATE_EPS, 1.0 - STATE_EPS)
        values.flags.writeable = False
        object.__setattr__(self, 's', values)

    def __len__(self) -> int:
        return self.s.shape[0]

    def __getitem__(self, j: int) -> float:
        return float(self.s[j])

    def as_array(self) -> np.ndarray:
        return self.s.copy()


@dataclass(frozen=True)
class Interaction:
    exercise_id: int
    correctness: int


@dataclass
class InteractionLog:
    """Time-ordered (exercise, correctness) pairs; append-only within an episode."""
    entries: list[Interaction] = field(default_factory=list)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]], J: int | None = None) -> 'InteractionLog':
        log = cls()
        for exercise_id, correctness in pairs:
            log.append(exercise_id, correctness, J=J)
        return log

    def append(self, exercise_id: int, correctness: int, J: int | None = None) -> None:
        exercise_id = int(exercise_id)
        correctness = int(correctness)
        if exercise_id < 0 or (J is not None and exercise_id >= J):
            raise InvalidActionError(f"Exercise id {exercise_id} outside catalog")
        if correctness not in (0, 1):
            raise ConfigurationError(f"Correctness must be 0 or 1, got {correctness}")
        self.entries.append(Interaction(exercise_id, correctness))

    def __len__(self) -> int:
        return len(self.entries)

    def exercises(self) -> np.ndarray:
        return np.array([e.exercise_id for e in self.entries], dtype=np.int64)

    def responses(self) -> np.ndarray:
        return np.array([e.correctness for e in self.entries], dtype=np.int64)

    def copy(self) -> 'InteractionLog':
        return InteractionLog(list(self.entries))


@dataclass(frozen=True)
class GoalConfig:
    """Learning goal: APR threshold ``beta`` and maximum path length ``t_max``."""
    beta: float = 0.8
    t_max: int = 100

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}", field='goal.beta')
        if self.t_max < 1:
            raise ConfigurationError(f"t_max must be >= 1, got {self.t_max}", field='goal.t_max')


def apr(state: KnowledgeState) -> float:
    """Average pass rate: arithmetic mean of the knowledge state."""
    return float(np.mean(state.s))


def learning_gain(apr_now: float, apr_prev: float) -> float:
    """
    Change in APR over one step.

    Args:
        apr_now: APR after the update.
        apr_prev: APR before the update.

    Returns:
        float: ``apr_now - apr_prev``; negative when the student regressed.

    Examples:
        >>> learning_gain(0.75, 0.5)
        0.25
        >>> learning_gain(0.5, 0.75)
        -0.25
    """
    return apr_now - apr_prev


def distance_to_goal(beta: float, apr_now: float) -> float:
    """
    Remaining distance to the goal threshold.

    Args:
        beta: Goal APR.
        apr_now: Current APR.

    Returns:
        float: ``beta - apr_now``. Zero at the goal, negative past it; callers
        that divide by it apply their own floor.

    Examples:
        >>> distance_to_goal(0.75, 0.5)
        0.25
        >>> distance_to_goal(0.75, 1.0)
        -0.25
    """
    return beta - apr_now


def goal_reached(apr_now: float, beta: float) -> bool:
    """True once ``apr_now >= beta``; equivalent to ``distance_to_goal(beta, apr_now) <= 0``."""
    return apr_now >= beta
