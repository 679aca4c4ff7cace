"""
Django management command to evaluate a trained policy without learning.
"""
from pathlib import Path

from alpn_lab.experiments import area_matrices, evaluate, write_evaluation
from alpn_lab.metrics import initial_state_histogram
from alpn_lab.plotting import plot_area_matrix, plot_histogram

from ._common import AlpnCommand


class Command(AlpnCommand):
    """
    Usage:
        python manage.py eval --checkpoint runs/default/seed_0/checkpoint.alpn --config configs/default.toml
        python manage.py eval --checkpoint ... --students 3 --greedy --plots
    """
    help = 'Roll out a trained policy on fresh students and report paths, APR curves and DIV'

    def add_arguments(self, parser):
        self.add_common_arguments(parser, variant=False)
        parser.add_argument(
            '--checkpoint',
            type=str,
            required=True,
            help='Actor-critic checkpoint written by train'
        )
        parser.add_argument(
            '--students',
            type=int,
            default=None,
            help='Number of evaluated students (default: run.eval_students)'
        )
        parser.add_argument(
            '--greedy',
            action='store_true',
            help='Pick the most probable exercise instead of sampling'
        )
        parser.add_argument(
            '--plots',
            action='store_true',
            help='Render area-mastery heatmaps and the initial-state histogram'
        )

    def run(self, *args, **options):
        config = self.load_config(options)
        out = Path(options['out']) if options['out'] else Path(options['checkpoint']).parent / 'eval'
        self.setup_error_logging(out)
        students = options['students'] if options['students'] is not None else config.run.eval_students
        seed = config.run.seeds[0]

        self.banner("Evaluate", {
            'Checkpoint': options['checkpoint'],
            'Students': students,
            'Seed': seed,
            'Mode': 'greedy' if options['greedy'] else 'sampled',
            'Output': out,
        })

        catalog = config.build_catalog()
        report = evaluate(config, Path(options['checkpoint']), students, seed, greedy=options['greedy'])
        write_evaluation(report, catalog, out)

        self.stdout.write(self.style.SUCCESS("Evaluation Complete!"))
        self.stdout.write(f"  Mean final APR:   {report.mean_final_apr:.4f}")
        self.stdout.write(f"  Mean path length: {report.mean_path_length:.2f}")
        self.stdout.write(f"  Goal rate:        {report.goal_rate:.3f}")
        self.stdout.write(f"  DIV:              {report.div if report.div is None else f'{report.div:.4f}'}")
        if report.closest_pair is not None:
            i, j = report.closest_pair
            self.stdout.write(
                f"  Closest initial APR: students {i} and {j} "
                f"({report.episodes[i].initial_apr:.4f} / {report.episodes[j].initial_apr:.4f}), "
                f"path DIV {report.closest_pair_div:.4f}"
            )

        if options['plots']:
            for student, matrix in area_matrices(report, catalog).items():
                plot_area_matrix(matrix, out / f'area_mastery_{student}.png', title=f'Student {student}')
            plot_histogram(initial_state_histogram([e.initial_apr for e in report.episodes], config.run.bin_width),
                           out / 'initial_state_histogram.png')
        self.stdout.write(f"\nReport in {out}")
