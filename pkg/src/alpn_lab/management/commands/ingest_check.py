"""
Django management command to validate an interaction-log file against the catalog.
"""
import numpy as np

from alpn_lab.logs import read_logs

from ._common import AlpnCommand


class Command(AlpnCommand):
    """
    Usage:
        python manage.py ingest_check data/logs/logs.csv --config configs/default.toml
    """
    help = 'Parse and validate an interaction-log file; report per-student statistics'

    def add_arguments(self, parser):
        parser.add_argument('file', type=str, help='Log CSV (student_id,step,exercise_id,correctness)')
        self.add_common_arguments(parser, variant=False)

    def run(self, *args, **options):
        config = self.load_config(options)
        catalog = config.build_catalog()
        logs = read_logs(options['file'], catalog)

        lengths = np.array([len(log) for log in logs.values()], dtype=np.int64)
        correct = sum(int(log.responses().sum()) for log in logs.values())
        total = int(lengths.sum())
        self.stdout.write(self.style.SUCCESS(f"\n{options['file']} is valid"))
        self.stdout.write(f"  Students:      {len(logs)}")
        self.stdout.write(f"  Interactions:  {total}")
        if total:
            self.stdout.write(f"  Log length:    min={lengths.min()} mean={lengths.mean():.1f} max={lengths.max()}")
            self.stdout.write(f"  Correct rate:  {correct / total:.4f}")
