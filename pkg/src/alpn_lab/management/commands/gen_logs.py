"""
Django management command to simulate interaction logs for AKT-lite training.
"""
from pathlib import Path

from alpn_lab.logs import generate_logs, write_logs

from ._common import AlpnCommand


class Command(AlpnCommand):
    """
    Usage:
        python manage.py gen_logs --config configs/default.toml --students 500 --steps 50
        python manage.py gen_logs --students 0 --file data/logs/empty.csv
    """
    help = 'Simulate analytic students answering random exercises and write a log file'

    def add_arguments(self, parser):
        self.add_common_arguments(parser, variant=False)
        parser.add_argument(
            '--students',
            type=int,
            default=500,
            help='Number of simulated students (default: 500)'
        )
        parser.add_argument(
            '--steps',
            type=int,
            default=50,
            help='Attempts per student (default: 50)'
        )
        parser.add_argument(
            '--file',
            type=str,
            default=None,
            help='Output CSV (default: <out>/logs.csv)'
        )

    def run(self, *args, **options):
        config = self.load_config(options)
        path = Path(options['file']) if options['file'] else config.output_dir / 'logs.csv'
        seed = config.run.seeds[0]

        self.banner("Generate Logs", {
            'Students': options['students'],
            'Steps': options['steps'],
            'Seed': seed,
            'File': path,
        })

        catalog = config.build_catalog()
        logs = generate_logs(catalog, config.environment.student, config.environment.profile,
                             options['students'], options['steps'], seed, progress=self.progress(options))
        write_logs(logs, path)
        rows = sum(len(log) for log in logs.values())
        self.stdout.write(self.style.SUCCESS(f"Wrote {rows} rows for {len(logs)} students to {path}"))
