"""
Django management command to train an agent on the simulated student environment.

Writes per-seed history, trajectories, curves and checkpoints under
``run.output_dir`` (see ``alpn_lab.experiments``).
"""
from alpn_lab.experiments import run_training
from alpn_lab.plotting import plot_histogram, plot_training_curves
from alpn_lab.metrics import training_curves, initial_state_histogram

from ._common import AlpnCommand


class Command(AlpnCommand):
    """
    Usage:
        python manage.py train --config configs/default.toml
        python manage.py train --config configs/default.toml --variant ppo --seed 3
        python manage.py train --config configs/default.toml --resume
    """
    help = 'Train an A2C, PPO or EPPO agent for each configured seed'

    def add_arguments(self, parser):
        self.add_common_arguments(parser)
        parser.add_argument(
            '--resume',
            action='store_true',
            help='Continue from the last checkpoint in the run directory'
        )
        parser.add_argument(
            '--plots',
            action='store_true',
            help='Render PNG curves next to the CSV files'
        )

    def run(self, *args, **options):
        config = self.load_config(options)
        log_file = self.setup_error_logging(config.output_dir)

        self.banner("Train", {
            'Variant': config.variant,
            'Seeds': ', '.join(str(s) for s in config.run.seeds),
            'Episodes': config.run.episodes,
            'Backing': config.environment.backing,
            'Output': config.output_dir,
            'Config hash': config.config_hash[:12],
            'Error log': log_file,
        })

        report = run_training(config, progress=self.progress(options), resume=options['resume'])

        self.stdout.write(self.style.SUCCESS("=" * 60))
        self.stdout.write(self.style.SUCCESS("Training Complete!"))
        self.stdout.write(self.style.SUCCESS("=" * 60))
        for result in report.seeds:
            s = result.summary
            self.stdout.write(
                f"  seed={result.seed:<4} episodes={s['episodes']:<6} "
                f"final_apr={s['final_apr']:.4f} attempts={s['path_length']:.2f} "
                f"reward={s['cumulative_reward']:.3f}"
            )
            if options['plots'] and len(result.history):
                plot_training_curves({f"{config.variant} seed={result.seed}":
                                      training_curves(result.history, config.run.curve_window)},
                                     result.run_dir / 'curves.png')
                plot_histogram(initial_state_histogram(result.history['initial_apr'], config.run.bin_width),
                               result.run_dir / 'initial_state_histogram.png')
        self.stdout.write(f"\nArtifacts in {report.run_dir}")
