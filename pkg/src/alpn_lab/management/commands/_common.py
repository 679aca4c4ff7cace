"""
Shared plumbing for the laboratory's management commands.
"""

import logging
from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from alpn_lab.agent import VARIANTS
from alpn_lab.config import ExperimentConfig, load_config
from alpn_lab.exceptions import AlpnError


class AlpnCommand(BaseCommand):
    """
    Base command: shared flags, config loading, per-run error log and the
    translation of library errors into one-line ``CommandError`` messages.

    Subclasses implement ``run(**options)`` instead of ``handle``.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.error_logger: Optional[logging.Logger] = None
        self._error_handler: Optional[logging.Handler] = None

    def add_common_arguments(self, parser, variant: bool = True):
        parser.add_argument(
            '--config',
            type=str,
            default=None,
            help='Path to the experiment TOML (default: built-in defaults)'
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Override run.seeds with this single seed'
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Override run.output_dir'
        )
        if variant:
            parser.add_argument(
                '--variant',
                choices=VARIANTS,
                default=None,
                help='Override agent.variant'
            )
        parser.add_argument(
            '--no-progress',
            action='store_true',
            help='Disable progress bars'
        )

    def load_config(self, options) -> ExperimentConfig:
        return load_config(
            options.get('config'),
            seed=options.get('seed'),
            variant=options.get('variant'),
            out=options.get('out'),
        )

    def progress(self, options) -> bool:
        return settings.ALPN_DEFAULTS['PROGRESS'] and not options.get('no_progress')

    def setup_error_logging(self, run_dir: Path) -> Path:
        """Mirror errors to ``<run_dir>/errors.log``."""
        run_dir.mkdir(parents=True, exist_ok=True)
        log_file = run_dir / 'errors.log'

        self.error_logger = logging.getLogger('alpn_lab')
        file_handler = logging.FileHandler(log_file, mode='a', delay=True)
        file_handler.setLevel(logging.ERROR)
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(name)s - %(message)s'))
        self.error_logger.addHandler(file_handler)
        self._error_handler = file_handler
        return log_file

    def banner(self, title: str, rows: dict):
        self.stdout.write(self.style.SUCCESS(f"\n{title}"))
        width = max((len(k) for k in rows), default=0) + 1
        for key, value in rows.items():
            self.stdout.write(f"  {key + ':':<{width}} {value}")
        self.stdout.write("")

    def run(self, *args, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except AlpnError as e:
            if self.error_logger is not None:
                self.error_logger.error(e.one_line())
            raise CommandError(e.one_line(), returncode=e.exit_code)
        except KeyboardInterrupt:
            self.stdout.write(self.style.ERROR("\n\nOperation cancelled by user."))
            raise
        finally:
            if self._error_handler is not None:
                self.error_logger.removeHandler(self._error_handler)
                self._error_handler.close()
                self._error_handler = None
