"""
End-to-end tests of the management commands on a tiny configuration.
"""

import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from alpn_lab.models import ExperimentRun

TINY_CONFIG = """
[catalog]
J = 6
topic_count = 3
area_count = 2

[goal]
beta = 0.8
t_max = 10

[agent]
variant = "{variant}"
hidden = 8
episodes_per_update = 4
buffer_capacity = 8
minibatch_size = 16
update_epochs = 2
lr = 1e-3

[akt]
d = 4
window = 16
epochs = 2
batch = 8
holdout = 0.25

[run]
episodes = {episodes}
seeds = {seeds}
workers = {workers}
checkpoint_every = 1
eval_students = 3
curve_window = 4
{extra}
"""


class CommandTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.dir = Path(self.tmp)

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def config(self, name='config', variant='eppo', episodes=8, seeds=(0,), workers=1, extra='') -> str:
        path = self.dir / f'{name}.toml'
        path.write_text(TINY_CONFIG.format(variant=variant, episodes=episodes, seeds=list(seeds),
                                           workers=workers, extra=extra))
        return str(path)

    def call(self, name, *args, **options):
        out = StringIO()
        call_command(name, *args, no_progress=True, stdout=out, **options)
        return out.getvalue()

    def train(self, out, **config_kwargs) -> Path:
        self.call('train', config=self.config(**config_kwargs), out=str(self.dir / out))
        return self.dir / out


class TrainCommandTestCase(CommandTestCase):

    def test_writes_run_directory(self):
        run = self.train('run')
        seed = run / 'seed_0'
        for name in ('history.csv', 'trajectories.csv', 'curves.csv', 'initial_state_histogram.csv',
                     'checkpoint.alpn'):
            self.assertTrue((seed / name).exists(), name)
        history = pd.read_csv(seed / 'history.csv')
        self.assertEqual(history['episode'].tolist(), list(range(8)))
        manifest = json.loads((run / 'manifest.json').read_text())
        self.assertEqual(manifest['variant'], 'eppo')
        self.assertEqual(len(manifest['config_hash']), 64)
        self.assertIn('numpy', manifest['versions'])
        summary = pd.read_csv(run / 'summary.csv')
        self.assertEqual(summary['seed'].tolist(), [0])

    def test_identical_runs_identical_bytes(self):
        """Same config and seed give byte-identical files, whatever the thread count."""
        a = self.train('a')
        b = self.train('b')
        c = self.train('c', name='threads', workers=3)
        for name in ('history.csv', 'trajectories.csv', 'curves.csv'):
            expected = (a / 'seed_0' / name).read_bytes()
            self.assertEqual((b / 'seed_0' / name).read_bytes(), expected, name)
            self.assertEqual((c / 'seed_0' / name).read_bytes(), expected, name)

    def test_zero_episodes(self):
        run = self.train('empty', episodes=0)
        history = pd.read_csv(run / 'seed_0' / 'history.csv')
        self.assertEqual(len(history), 0)
        self.assertIn('final_apr', history.columns)

    def test_resume_matches_uninterrupted_run(self):
        """4 episodes, then --resume to 8, equals 8 episodes in one go."""
        straight = self.train('straight', episodes=8)
        resumed = self.dir / 'resumed'
        self.call('train', config=self.config(name='short', episodes=4), out=str(resumed))
        self.call('train', config=self.config(name='long', episodes=8), out=str(resumed), resume=True)
        for name in ('history.csv', 'trajectories.csv', 'curves.csv', 'checkpoint.alpn'):
            self.assertEqual((resumed / 'seed_0' / name).read_bytes(),
                             (straight / 'seed_0' / name).read_bytes(), name)

    def test_resume_inside_an_update_window(self):
        """6 episodes leave a half-filled window; resuming to 10 still matches one run of 10."""
        straight = self.train('straight', name='ten', episodes=10)
        resumed = self.dir / 'resumed'
        self.call('train', config=self.config(name='six', episodes=6), out=str(resumed))
        self.call('train', config=self.config(name='ten_again', episodes=10), out=str(resumed), resume=True)
        for name in ('history.csv', 'trajectories.csv', 'curves.csv', 'checkpoint.alpn'):
            self.assertEqual((resumed / 'seed_0' / name).read_bytes(),
                             (straight / 'seed_0' / name).read_bytes(), name)

    def test_resume_rejects_changed_config(self):
        run = self.dir / 'run'
        self.call('train', config=self.config(episodes=4), out=str(run))
        changed = self.config(name='changed', episodes=8)
        Path(changed).write_text(Path(changed).read_text().replace('lr = 1e-3', 'lr = 2e-3'))
        with self.assertRaises(CommandError) as ctx:
            self.call('train', config=changed, out=str(run), resume=True)
        self.assertIn('error=ConfigurationError', str(ctx.exception))

    def test_registry_records_run(self):
        self.train('registered', seeds=(0, 1), episodes=4)
        runs = ExperimentRun.objects.filter(run_dir=str(self.dir / 'registered')).order_by('seed')
        self.assertEqual([r.seed for r in runs], [0, 1])
        for r in runs:
            self.assertEqual(r.status, ExperimentRun.STATUS_COMPLETED)
            self.assertEqual(r.episodes_completed, 4)
            self.assertTrue(r.last_checkpoint.endswith('checkpoint.alpn'))

    def test_config_error_is_one_line(self):
        path = self.dir / 'bad.toml'
        path.write_text('[agent]\nclip_epsilon = 0.1\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('train', config=str(path), out=str(self.dir / 'bad'))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertTrue(str(ctx.exception).startswith('error=ConfigurationError field=agent.clip_epsilon'))

    def test_variant_override(self):
        run = self.dir / 'override'
        self.call('train', config=self.config(episodes=4), out=str(run), variant='a2c', seed=5)
        history = pd.read_csv(run / 'seed_5' / 'history.csv')
        self.assertEqual(set(history['variant']), {'a2c'})


class CompareCommandTestCase(CommandTestCase):

    def test_run_against_itself(self):
        """Comparing a run with itself gives zero differences."""
        run = self.train('run')
        out = self.dir / 'cmp'
        self.call('compare', run=[str(run), str(run)], out=str(out))
        summary = pd.read_csv(out / 'comparison_summary.csv')
        self.assertEqual(len(summary), 2)
        for column in [c for c in summary.columns if c.endswith('_delta')]:
            self.assertEqual(summary[column].fillna(0.0).abs().max(), 0.0, column)
        self.assertTrue((out / 'comparison_curves.csv').exists())

    def test_disjoint_seeds(self):
        """Two variants on different seeds each keep their per-seed rows."""
        eppo = self.train('eppo', variant='eppo', seeds=(0,))
        a2c = self.train('a2c', name='a2c', variant='a2c', seeds=(1,))
        out = self.dir / 'cmp'
        self.call('compare', run=[str(eppo), str(a2c)], out=str(out))
        seeds = pd.read_csv(out / 'comparison_seeds.csv')
        self.assertEqual(list(zip(seeds['run'], seeds['seed'])), [('eppo', 0), ('a2c', 1)])

    def test_train_variants_then_compare(self):
        out = self.dir / 'cmp'
        self.call('compare', config=self.config(episodes=4), variants=['eppo', 'ppo'], out=str(out))
        summary = pd.read_csv(out / 'comparison_summary.csv')
        self.assertEqual(summary['run'].tolist(), ['eppo', 'ppo'])
        self.assertTrue((out / 'ppo' / 'seed_0' / 'history.csv').exists())

    def test_catalog_mismatch(self):
        a = self.train('a')
        b = self.train('b', name='other')
        manifest = json.loads((b / 'manifest.json').read_text())
        manifest['catalog'] = 'different'
        (b / 'manifest.json').write_text(json.dumps(manifest))
        with self.assertRaises(CommandError) as ctx:
            self.call('compare', run=[str(a), str(b)], out=str(self.dir / 'cmp'))
        self.assertIn('error=CatalogMismatchError', str(ctx.exception))

    def test_needs_two_runs(self):
        run = self.train('single')
        with self.assertRaises(CommandError):
            self.call('compare', run=[str(run)], out=str(self.dir / 'cmp'))


class EvalCommandTestCase(CommandTestCase):

    def test_single_student(self):
        """One student yields one path with a monotone step index."""
        run = self.train('run')
        out = self.dir / 'eval'
        self.call('eval', config=self.config(), checkpoint=str(run / 'seed_0' / 'checkpoint.alpn'),
                  students=1, out=str(out))
        paths = pd.read_csv(out / 'eval_paths.csv')
        self.assertEqual(set(paths['student']), {0})
        self.assertEqual(paths['step'].tolist(), list(range(1, len(paths) + 1)))
        report = json.loads((out / 'eval_report.json').read_text())
        self.assertEqual(report['students'], 1)
        self.assertIsNone(report['div'])
        apr = pd.read_csv(out / 'eval_apr.csv')
        self.assertEqual(len(apr), len(paths) + 1)
        areas = pd.read_csv(out / 'eval_area_mastery.csv')
        self.assertEqual(len(areas), 2 * (len(paths) + 1))

    def test_same_checkpoint_same_report(self):
        run = self.train('run')
        checkpoint = str(run / 'seed_0' / 'checkpoint.alpn')
        for name in ('e1', 'e2'):
            self.call('eval', config=self.config(), checkpoint=checkpoint, out=str(self.dir / name))
        for name in ('eval_paths.csv', 'eval_students.csv', 'eval_report.json'):
            self.assertEqual((self.dir / 'e1' / name).read_bytes(), (self.dir / 'e2' / name).read_bytes(), name)
        report = json.loads((self.dir / 'e1' / 'eval_report.json').read_text())
        self.assertEqual(report['students'], 3)
        self.assertGreaterEqual(report['div'], 0.0)
        self.assertLessEqual(report['div'], 1.0)

    def test_catalog_mismatch(self):
        run = self.train('run')
        other = self.config(name='other')
        Path(other).write_text(Path(other).read_text().replace('topic_count = 3', 'topic_count = 2'))
        with self.assertRaises(CommandError) as ctx:
            self.call('eval', config=other, checkpoint=str(run / 'seed_0' / 'checkpoint.alpn'),
                      out=str(self.dir / 'eval'))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('error=CatalogMismatchError', str(ctx.exception))

    def test_missing_checkpoint(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('eval', config=self.config(), checkpoint=str(self.dir / 'none.alpn'),
                      out=str(self.dir / 'eval'))
        self.assertIn('error=CheckpointError', str(ctx.exception))


class LogCommandTestCase(CommandTestCase):

    def test_gen_logs_zero_students(self):
        path = self.dir / 'empty.csv'
        self.call('gen_logs', config=self.config(), students=0, file=str(path))
        self.assertEqual(path.read_text(), 'student_id,step,exercise_id,correctness\n')

    def test_gen_logs_then_ingest(self):
        path = self.dir / 'logs.csv'
        self.call('gen_logs', config=self.config(), students=5, steps=4, file=str(path))
        output = self.call('ingest_check', str(path), config=self.config())
        self.assertIn('Students:      5', output)
        self.assertIn('Interactions:  20', output)

    def test_ingest_rejects_bad_row(self):
        path = self.dir / 'bad.csv'
        path.write_text('student_id,step,exercise_id,correctness\n0,0,1,2\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('ingest_check', str(path), config=self.config())
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertTrue(str(ctx.exception).startswith('error=LogFormatError field=correctness line=2'))

    def test_train_akt_then_akt_backed_training(self):
        """AKT-lite trained from generated logs can back the environment."""
        logs = self.dir / 'logs.csv'
        self.call('gen_logs', config=self.config(), students=8, steps=6, file=str(logs))
        akt_dir = self.dir / 'akt'
        self.call('train_akt', str(logs), config=self.config(), out=str(akt_dir))
        self.assertTrue((akt_dir / 'akt.alpn').exists())
        losses = pd.read_csv(akt_dir / 'akt_loss.csv')
        self.assertEqual(losses['epoch'].tolist(), [0, 1, 2])
        report = json.loads((akt_dir / 'akt_report.json').read_text())
        self.assertEqual(report['students_holdout'], 2)
        self.assertIn('accuracy', report)

        extra = f'\n[environment]\nbacking = "akt"\nseed_history = 3\nakt_checkpoint = "{akt_dir / "akt.alpn"}"\n'
        run = self.train('akt_run', name='akt_backed', episodes=4, extra=extra)
        history = pd.read_csv(run / 'seed_0' / 'history.csv')
        self.assertEqual(len(history), 4)


class PlotsTestCase(CommandTestCase):

    def test_train_and_eval_plots(self):
        run = self.dir / 'run'
        self.call('train', config=self.config(episodes=4), out=str(run), plots=True)
        self.assertTrue((run / 'seed_0' / 'curves.png').exists())
        self.assertTrue((run / 'seed_0' / 'initial_state_histogram.png').exists())

        out = self.dir / 'eval'
        self.call('eval', config=self.config(), checkpoint=str(run / 'seed_0' / 'checkpoint.alpn'),
                  students=2, out=str(out), plots=True)
        self.assertTrue((out / 'area_mastery_0.png').exists())
        self.assertTrue((out / 'initial_state_histogram.png').exists())
