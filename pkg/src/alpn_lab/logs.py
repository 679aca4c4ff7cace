"""
Interaction-log files: synthetic generation and strict ingestion.

Schema (header required)::

    student_id,step,exercise_id,correctness

Rows of one student are grouped and ordered by ``step``; values are plain
integers and nothing is coerced.
"""

import csv
import logging
from pathlib import Path
from typing import Optional, Union

from tqdm import tqdm

from .environment import AnalyticStudent, ProfileConfig, StudentParams
from .exceptions import ConfigurationError, LogFormatError
from .knowledge import ExerciseCatalog, InteractionLog
from .nn import RngStream

logger = logging.getLogger(__name__)

LOG_COLUMNS = ('student_id', 'step', 'exercise_id', 'correctness')

# Stream id for log generation under a seed.
STREAM_LOGS = 10


def generate_logs(catalog: ExerciseCatalog, student: StudentParams, profile: ProfileConfig,
                  students: int, steps: int, seed: int, progress: bool = False) -> dict[int, InteractionLog]:
    """
    Simulate analytic students answering uniformly random exercises.

    Student ``i`` draws from its own stream, so the output does not depend on
    how many students are generated.
    """
    if students < 0 or steps < 0:
        raise ConfigurationError("Student and step counts must be >= 0")
    logs: dict[int, InteractionLog] = {}
    for sid in tqdm(range(students), desc="Generating logs", ncols=80, disable=not progress):
        rng = RngStream(seed, STREAM_LOGS, sid)
        learner = AnalyticStudent(profile.sample_mastery(rng, catalog.J), student)
        log = InteractionLog()
        for _ in range(steps):
            action = int(rng.integers(0, catalog.J))
            correctness = rng.bernoulli(learner.state()[action])
            log.append(action, correctness, J=catalog.J)
            learner.learn(action, correctness, catalog)
        logs[sid] = log
    return logs


def write_logs(logs: dict[int, InteractionLog], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(LOG_COLUMNS)
        for sid in sorted(logs):
            for step, entry in enumerate(logs[sid].entries):
                writer.writerow((sid, step, entry.exercise_id, entry.correctness))
    return path


def _parse_int(value: Optional[str], column: str, line: int) -> int:
    if value is None or value.strip() == '':
        raise LogFormatError(f"Missing {column}", field=column, line=line)
    text = value.strip()
    if not (text.isdigit() or (text.startswith('-') and text[1:].isdigit())):
        raise LogFormatError(f"{column} must be an integer, got '{value}'", field=column, line=line)
    return int(text)


def read_logs(path: Union[str, Path], catalog: Optional[ExerciseCatalog] = None) -> dict[int, InteractionLog]:
    """
    Parse a log file into one ``InteractionLog`` per student.

    Raises:
        LogFormatError: On a missing header, a malformed row (with its line
            number), correctness outside {0, 1}, a duplicate step, or an
            exercise id unknown to ``catalog``.
    """
    path = Path(path)
    if not path.exists():
        raise LogFormatError(f"Log file not found: {path}")

    rows: dict[int, dict[int, tuple[int, int, int]]] = {}
    unknown: dict[int, int] = {}
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != LOG_COLUMNS:
            raise LogFormatError(f"Log must have header {','.join(LOG_COLUMNS)}. Found: {header}", line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LOG_COLUMNS):
                raise LogFormatError(f"Expected {len(LOG_COLUMNS)} fields, got {len(row)}", line=line)
            sid, step, exercise, correctness = (_parse_int(v, c, line) for v, c in zip(row, LOG_COLUMNS))
            if sid < 0 or step < 0:
                raise LogFormatError("student_id and step must be >= 0", line=line)
            if correctness not in (0, 1):
                raise LogFormatError(f"correctness must be 0 or 1, got {correctness}", field='correctness', line=line)
            if exercise < 0 or (catalog is not None and exercise >= catalog.J):
                unknown.setdefault(exercise, line)
            student_rows = rows.setdefault(sid, {})
            if step in student_rows:
                raise LogFormatError(f"Duplicate step {step} for student {sid} "
                                     f"(first seen on line {student_rows[step][0]})", field='step', line=line)
            student_rows[step] = (line, exercise, correctness)

    if unknown:
        ids = sorted(unknown)
        raise LogFormatError(f"Unknown exercise_id(s): {ids}", field='exercise_id', line=unknown[ids[0]])

    logs = {}
    for sid in sorted(rows):
        ordered = [rows[sid][step] for step in sorted(rows[sid])]
        logs[sid] = InteractionLog.from_pairs((exercise, c) for _, exercise, c in ordered)
    logger.info("Read %d interactions for %d students from %s",
                sum(len(log) for log in logs.values()), len(logs), path)
    return logs
