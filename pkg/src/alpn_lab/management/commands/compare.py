"""
Django management command to compare trained runs (or train and then compare).
"""
from pathlib import Path

from alpn_lab.config import load_config
from alpn_lab.experiments import compare_runs, load_run, run_training
from alpn_lab.exports import write_frame
from alpn_lab.plotting import plot_training_curves

from ._common import AlpnCommand


class Command(AlpnCommand):
    """
    Usage:
        python manage.py compare --run runs/eppo --run runs/ppo
        python manage.py compare --configs configs/default.toml configs/ppo.toml --out runs/cmp
        python manage.py compare --config configs/default.toml --variants eppo ppo a2c --out runs/cmp
    """
    help = 'Compare training curves and final-window summaries across runs'

    def add_arguments(self, parser):
        self.add_common_arguments(parser, variant=False)
        parser.add_argument(
            '--run',
            action='append',
            default=[],
            help='Completed run directory (repeatable)'
        )
        parser.add_argument(
            '--variants',
            nargs='+',
            default=None,
            help='Train each variant from a single --config into <out>/<variant>'
        )
        parser.add_argument(
            '--configs',
            nargs='+',
            default=[],
            help='Configs to train into <out>/<n>_<config name> before comparing'
        )
        parser.add_argument(
            '--resume',
            action='store_true',
            help='Resume runs that already have checkpoints'
        )
        parser.add_argument(
            '--plots',
            action='store_true',
            help='Render PNG curves of the comparison'
        )

    def _train(self, config, options):
        self.stdout.write(f"Training {config.variant} into {config.output_dir}")
        run_training(config, progress=self.progress(options), resume=options['resume'])
        return load_run(config.output_dir)

    def run(self, *args, **options):
        out = Path(options['out'] or 'runs/compare')
        self.setup_error_logging(out)

        runs = [load_run(Path(d)) for d in options['run']]
        if options['variants']:
            for variant in options['variants']:
                config = load_config(options['config'], seed=options['seed'], variant=variant,
                                     out=str(out / variant))
                runs.append(self._train(config, options))
        elif options['config']:
            options['configs'] = [options['config'], *options['configs']]
        for n, path in enumerate(options['configs']):
            config = load_config(path, seed=options["seed"], out=str(out / f"{n}_{Path(path).stem}"))
            runs.append(self._train(config, options))

        window = max((int(r.manifest['config']['run']['curve_window']) for r in runs), default=50)
        tables = compare_runs(runs, window)
        write_frame(tables['curves'], out / 'comparison_curves.csv')
        write_frame(tables['seeds'], out / 'comparison_seeds.csv')
        write_frame(tables['summary'], out / 'comparison_summary.csv')

        self.stdout.write(self.style.SUCCESS("\nComparison (final-window means)"))
        for _, row in tables['summary'].iterrows():
            self.stdout.write(
                f"  {row['run']:<10} final_apr={row['final_apr_mean']:.4f}±{row['final_apr_std']:.4f} "
                f"attempts={row['path_length_mean']:.2f}±{row['path_length_std']:.2f} "
                f"reward={row['cumulative_reward_mean']:.3f}±{row['cumulative_reward_std']:.3f} "
                f"div={row['div_mean']:.3f}"
            )

        if options['plots'] and len(tables['curves']):
            curves = {f"{label}": frame.groupby('episode', as_index=False).mean(numeric_only=True)
                      for label, frame in tables['curves'].groupby('run', sort=False)}
            plot_training_curves(curves, out / 'comparison_curves.png')
        self.stdout.write(f"\nReport in {out}")
