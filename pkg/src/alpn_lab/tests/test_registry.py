"""
Tests for the run registry model, its helpers and the admin registration.
"""

from unittest import mock

from django.contrib import admin
from django.db import DatabaseError
from django.test import TestCase

from alpn_lab.models import ExperimentRun
from alpn_lab.registry import start_run, update_run


class ExperimentRunTestCase(TestCase):
    """Test cases for the ExperimentRun model."""

    def setUp(self):
        self.run = start_run('runs/x', 'a' * 64, 'eppo', 3)

    def test_start_run_creates_row(self):
        self.assertEqual(ExperimentRun.objects.count(), 1)
        self.assertEqual(self.run.status, ExperimentRun.STATUS_RUNNING)
        self.assertEqual(self.run.episodes_completed, 0)
        self.assertEqual(str(self.run), 'eppo seed=3 (running)')

    def test_start_run_twice_reuses_row(self):
        """Restarting the same run directory, variant and seed updates in place."""
        again = start_run('runs/x', 'b' * 64, 'eppo', 3, episodes_completed=16)
        self.assertEqual(again.pk, self.run.pk)
        self.assertEqual(ExperimentRun.objects.count(), 1)
        self.assertEqual(ExperimentRun.objects.get().config_hash, 'b' * 64)

    def test_update_run(self):
        update_run(self.run, status=ExperimentRun.STATUS_COMPLETED, episodes_completed=40,
                   last_checkpoint='runs/x/seed_3/checkpoint.alpn')
        row = ExperimentRun.objects.get(pk=self.run.pk)
        self.assertEqual(row.status, ExperimentRun.STATUS_COMPLETED)
        self.assertEqual(row.episodes_completed, 40)
        self.assertEqual(row.last_checkpoint, 'runs/x/seed_3/checkpoint.alpn')

    def test_update_none_is_noop(self):
        update_run(None, status=ExperimentRun.STATUS_FAILED)
        self.assertEqual(ExperimentRun.objects.get().status, ExperimentRun.STATUS_RUNNING)

    def test_database_unavailable(self):
        """A broken registry is logged, never raised."""
        with mock.patch.object(ExperimentRun.objects, 'update_or_create', side_effect=DatabaseError('no table')):
            with self.assertLogs('alpn_lab.registry', level='WARNING'):
                self.assertIsNone(start_run('runs/y', 'c' * 64, 'ppo', 0))
        with mock.patch.object(ExperimentRun, 'save', side_effect=DatabaseError('locked')):
            with self.assertLogs('alpn_lab.registry', level='WARNING'):
                update_run(self.run, episodes_completed=1)

    def test_admin_registered(self):
        self.assertTrue(admin.site.is_registered(ExperimentRun))
