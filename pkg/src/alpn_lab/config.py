"""
Experiment configuration: TOML document -> validated, frozen ``ExperimentConfig``.
"""

import hashlib
import json
import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .agent import AgentHyper
from .akt import AktLiteModel, AktTrainHyper
from .environment import EnvConfig, ProfileConfig, StudentEnvironment, StudentParams
from .exceptions import CatalogMismatchError, ConfigurationError
from .knowledge import ExerciseCatalog, GoalConfig
from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

HASH_EXCLUDED_RUN_KEYS = ('output_dir', 'episodes', 'workers', 'checkpoint_every')


def _first_error(detail: Any, prefix: str = '') -> tuple[str, str]:
    """Flatten a DRF error tree to its first ``(dotted.path, message)``."""
    if isinstance(detail, dict):
        key = sorted(detail)[0]
        path = f"{prefix}.{key}" if prefix else str(key)
        return _first_error(detail[key], path)
    if isinstance(detail, list) and detail:
        if isinstance(detail[0], (dict, list)):
            return _first_error(detail[0], prefix)
        return prefix, str(detail[0])
    return prefix, str(detail)


@dataclass(frozen=True)
class CatalogSpec:
    J: int
    topic_count: int
    area_count: int
    file: Optional[str] = None

    def build(self) -> ExerciseCatalog:
        if self.file:
            return ExerciseCatalog.from_csv(self.file)
        return ExerciseCatalog.synthetic(self.J, self.topic_count, self.area_count)


@dataclass(frozen=True)
class AktSpec:
    d: int = 32
    window: int = 128
    lr: float = 1e-2
    epochs: int = 200
    batch: int = 32
    holdout: float = 0.2

    def train_hyper(self) -> AktTrainHyper:
        return AktTrainHyper(lr=self.lr, epochs=self.epochs, batch=self.batch)


@dataclass(frozen=True)
class RunSpec:
    episodes: int = 3000
    seeds: tuple[int, ...] = (0,)
    output_dir: str = 'runs/default'
    workers: int = 1
    checkpoint_every: int = 10
    eval_students: int = 50
    curve_window: int = 50
    bin_width: float = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    catalog: CatalogSpec
    environment: EnvConfig
    goal: GoalConfig
    variant: str
    agent: AgentHyper
    akt: AktSpec
    run: RunSpec
    akt_checkpoint: Optional[str] = None
    data: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        """
        SHA-256 of the canonical JSON of the validated document.

        Run keys that cannot change an episode's outcome (where it is written,
        how many episodes, threads, checkpoint cadence) are left out, so a run
        can be resumed with a larger episode count.
        """
        run = {k: v for k, v in self.data.get('run', {}).items() if k not in HASH_EXCLUDED_RUN_KEYS}
        data = {**self.data, 'run': run}
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    def build_catalog(self) -> ExerciseCatalog:
        return self.catalog.build()

    def build_environment(self, catalog: Optional[ExerciseCatalog] = None) -> StudentEnvironment:
        catalog = catalog or self.build_catalog()
        model = None
        if self.environment.backing == 'akt':
            model, meta = AktLiteModel.load(self.akt_checkpoint)
            if meta.get('catalog') and meta['catalog'] != catalog.fingerprint():
                raise CatalogMismatchError(
                    f"AKT-lite checkpoint {self.akt_checkpoint} was trained on a different catalog",
                    field='environment.akt_checkpoint',
                )
        return StudentEnvironment(catalog, self.environment, self.goal, akt_model=model)


def apply_overrides(data: dict, *, seed: Optional[int] = None, variant: Optional[str] = None,
                    out: Optional[str] = None) -> dict:
    """Return a copy of the raw document with command-line overrides applied."""
    data = json.loads(json.dumps(data, default=str))
    if seed is not None:
        data.setdefault('run', {})['seeds'] = [seed]
    if variant is not None:
        data.setdefault('agent', {})['variant'] = variant
    if out is not None:
        data.setdefault('run', {})['output_dir'] = str(out)
    return data


def parse_config(data: dict) -> ExperimentConfig:
    """
    Validate a raw configuration mapping.

    Raises:
        ConfigurationError: Naming the first offending field as a dotted path.
    """
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        path, message = _first_error(serializer.errors)
        raise ConfigurationError(message, field=path or None)
    v = json.loads(json.dumps(serializer.validated_data))

    for dotted, value in (('catalog.file', v['catalog']['file']),
                          ('environment.akt_checkpoint', v['environment']['akt_checkpoint'])):
        if value and not Path(value).exists():
            raise ConfigurationError(f"Path does not exist: {value}", field=dotted)

    env = v['environment']
    agent = dict(v['agent'])
    variant = agent.pop('variant')
    return ExperimentConfig(
        catalog=CatalogSpec(**v['catalog']),
        environment=EnvConfig(
            backing=env['backing'],
            student=StudentParams(**env['student']),
            profile=ProfileConfig(**env['profile']),
            seed_history=env['seed_history'],
            d_floor=v['reward']['d_floor'],
        ),
        goal=GoalConfig(**v['goal']),
        variant=variant,
        agent=AgentHyper(**agent),
        akt=AktSpec(**v['akt']),
        run=RunSpec(**{**v['run'], 'seeds': tuple(v['run']['seeds'])}),
        akt_checkpoint=env['akt_checkpoint'],
        data=v,
    )


def read_toml(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}", field='config')
    try:
        with open(path, 'rb') as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"{path}: {e}", field='config')


def load_config(path: Optional[Union[str, Path]] = None, **overrides) -> ExperimentConfig:
    """Read, override and validate a TOML config; no path means all defaults."""
    data = read_toml(path) if path else {}
    config = parse_config(apply_overrides(data, **overrides))
    logger.debug("Loaded config %s (hash %s)", path or '<defaults>', config.config_hash[:12])
    return config
