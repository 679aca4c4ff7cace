"""
Tests for knowledge states, goal arithmetic and the exercise catalog.
"""

import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from alpn_lab.exceptions import CatalogError, ConfigurationError, InvalidActionError
from alpn_lab.knowledge import (
    STATE_EPS,
    Exercise,
    ExerciseCatalog,
    GoalConfig,
    InteractionLog,
    KnowledgeState,
    apr,
    distance_to_goal,
    goal_reached,
    learning_gain,
)


class GoalArithmeticTestCase(SimpleTestCase):
    """APR, learning gain, distance and the goal test."""

    def test_apr_is_mean(self):
        """APR is the arithmetic mean of the state."""
        self.assertAlmostEqual(apr(KnowledgeState([0.5, 0.5, 0.5, 0.5])), 0.5, places=12)
        self.assertAlmostEqual(apr(KnowledgeState([0.2, 0.4, 0.6, 0.8])), 0.5, places=12)
        self.assertAlmostEqual(apr(KnowledgeState([0.9])), 0.9, places=12)

    def test_learning_gain(self):
        """Gain is the plain difference, including regressions."""
        self.assertAlmostEqual(learning_gain(0.60, 0.55), 0.05, places=12)
        self.assertEqual(learning_gain(0.50, 0.50), 0.0)
        self.assertAlmostEqual(learning_gain(0.40, 0.50), -0.10, places=12)

    def test_distance_to_goal(self):
        """Distance goes negative once the goal is passed."""
        self.assertAlmostEqual(distance_to_goal(0.8, 0.3), 0.5, places=12)
        self.assertEqual(distance_to_goal(0.8, 0.8), 0.0)
        self.assertAlmostEqual(distance_to_goal(0.8, 0.9), -0.1, places=12)

    def test_goal_reached_inclusive(self):
        """Reaching beta exactly counts as success."""
        self.assertTrue(goal_reached(0.80, 0.80))
        self.assertFalse(goal_reached(0.79, 0.80))
        self.assertTrue(goal_reached(0.99, 0.80))

    def test_apr_ignores_order(self):
        """Permuting the exercises leaves the APR unchanged."""
        rng = np.random.default_rng(11)
        for _ in range(50):
            values = rng.uniform(0.01, 0.99, size=int(rng.integers(1, 40)))
            shuffled = rng.permutation(values)
            self.assertAlmostEqual(apr(KnowledgeState(values)), apr(KnowledgeState(shuffled)), places=12)

    def test_gain_is_antisymmetric(self):
        rng = np.random.default_rng(12)
        for a, b in rng.uniform(0.0, 1.0, size=(100, 2)):
            self.assertEqual(learning_gain(a, b), -learning_gain(b, a))

    def test_goal_reached_iff_no_distance_left(self):
        """The goal test agrees with ``distance_to_goal <= 0``, boundary included."""
        rng = np.random.default_rng(13)
        cases = [(b, a) for b, a in rng.uniform(0.05, 0.95, size=(200, 2))]
        cases += [(b, b) for b in (0.5, 0.8, 0.95)]
        for beta, value in cases:
            self.assertEqual(goal_reached(value, beta), distance_to_goal(beta, value) <= 0, (beta, value))

    def test_goal_config_validation(self):
        """Beta outside (0, 1) and t_max < 1 are rejected."""
        with self.assertRaises(ConfigurationError) as ctx:
            GoalConfig(beta=1.0)
        self.assertEqual(ctx.exception.field, 'goal.beta')
        with self.assertRaises(ConfigurationError):
            GoalConfig(beta=0.5, t_max=0)


class KnowledgeStateTestCase(SimpleTestCase):

    def test_clamps_saturated_values(self):
        """Values at 0 and 1 are pulled into the open interval."""
        state = KnowledgeState([0.0, 1.0])
        self.assertEqual(state[0], STATE_EPS)
        self.assertEqual(state[1], 1.0 - STATE_EPS)

    def test_rejects_non_finite_and_empty(self):
        """NaN entries and empty vectors are configuration errors."""
        with self.assertRaises(ConfigurationError):
            KnowledgeState([0.5, np.nan])
        with self.assertRaises(ConfigurationError):
            KnowledgeState([])

    def test_immutable(self):
        """The stored array is read-only; as_array returns a writable copy."""
        state = KnowledgeState([0.3, 0.4])
        with self.assertRaises(ValueError):
            state.s[0] = 0.9
        copy = state.as_array()
        copy[0] = 0.9
        self.assertEqual(state[0], 0.3)


class InteractionLogTestCase(SimpleTestCase):

    def test_from_pairs(self):
        """Pairs keep their order."""
        log = InteractionLog.from_pairs([(2, 1), (0, 0), (2, 0)], J=3)
        self.assertEqual(len(log), 3)
        np.testing.assert_array_equal(log.exercises(), [2, 0, 2])
        np.testing.assert_array_equal(log.responses(), [1, 0, 0])

    def test_rejects_bad_entries(self):
        """Out-of-range exercises and non-binary responses are rejected."""
        log = InteractionLog()
        with self.assertRaises(InvalidActionError):
            log.append(5, 1, J=3)
        with self.assertRaises(ConfigurationError):
            log.append(0, 2, J=3)
        self.assertEqual(len(log), 0)


class ExerciseCatalogTestCase(SimpleTestCase):

    def test_synthetic_layout(self):
        """Exercises deal round-robin over topics, topics over areas."""
        catalog = ExerciseCatalog.synthetic(6, 3, 2)
        self.assertEqual(catalog.J, 6)
        np.testing.assert_array_equal(catalog.topic_ids, [0, 1, 2, 0, 1, 2])
        np.testing.assert_array_equal(catalog.area_ids, [0, 1, 0, 0, 1, 0])

    def test_same_topic_mask_excludes_self(self):
        """The mask lists topic siblings only."""
        catalog = ExerciseCatalog.synthetic(6, 3, 2)
        np.testing.assert_array_equal(
            catalog.same_topic_mask(0), [False, False, False, True, False, False]
        )

    def test_topic_in_two_areas_rejected(self):
        """A topic mapped to two areas is a catalog error."""
        exercises = (Exercise(0, 0, 0), Exercise(1, 0, 1))
        with self.assertRaises(CatalogError):
            ExerciseCatalog(exercises, 1, 2)

    def test_ids_must_be_contiguous(self):
        """Ids must be exactly 0..J-1."""
        with self.assertRaises(CatalogError):
            ExerciseCatalog((Exercise(0, 0, 0), Exercise(2, 0, 0)), 1, 1)

    def test_check_exercise(self):
        catalog = ExerciseCatalog.synthetic(4, 2, 1)
        self.assertEqual(catalog.check_exercise(3), 3)
        with self.assertRaises(InvalidActionError):
            catalog.check_exercise(4)

    def test_csv_round_trip_keeps_fingerprint(self):
        """Writing and reading a catalog file preserves its fingerprint."""
        catalog = ExerciseCatalog.synthetic(20, 14, 7)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'catalog.csv'
            catalog.to_csv(path)
            loaded = ExerciseCatalog.from_csv(path)
        self.assertEqual(loaded, catalog)
        self.assertEqual(loaded.fingerprint(), catalog.fingerprint())

    def test_fingerprint_differs(self):
        """Different catalogs have different fingerprints."""
        a = ExerciseCatalog.synthetic(6, 3, 2)
        b = ExerciseCatalog.synthetic(6, 3, 1)
        self.assertNotEqual(a.fingerprint(), b.fingerprint())

    def test_missing_file(self):
        with self.assertRaises(CatalogError):
            ExerciseCatalog.from_csv('/nonexistent/catalog.csv')
