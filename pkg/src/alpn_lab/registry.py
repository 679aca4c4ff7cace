"""
Best-effort bookkeeping of training runs in the ``ExperimentRun`` table.

Training never depends on the database: when it is missing or not migrated
the helpers log a warning and return ``None``.
"""

import logging
from typing import Optional

from django.db import DatabaseError

from .models import ExperimentRun

logger = logging.getLogger(__name__)


def start_run(run_dir: str, config_hash: str, variant: str, seed: int,
              episodes_completed: int = 0) -> Optional[ExperimentRun]:
    try:
        run, _ = ExperimentRun.objects.update_or_create(
            run_dir=run_dir,
            variant=variant,
            seed=seed,
            defaults={
                'config_hash': config_hash,
                'status': ExperimentRun.STATUS_RUNNING,
                'episodes_completed': episodes_completed,
            },
        )
        return run
    except DatabaseError as e:
        logger.warning("Run registry unavailable (%s); run 'manage.py migrate' to enable it", e)
        return None


def update_run(run: Optional[ExperimentRun], *, status: Optional[str] = None,
               episodes_completed: Optional[int] = None, last_checkpoint: Optional[str] = None) -> None:
    if run is None:
        return
    if status is not None:
        run.status = status
    if episodes_completed is not None:
        run.episodes_completed = episodes_completed
    if last_checkpoint is not None:
        run.last_checkpoint = last_checkpoint
    try:
        run.save()
    except DatabaseError as e:
        logger.warning("Could not update run registry: %s", e)
