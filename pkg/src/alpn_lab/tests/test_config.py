"""
Tests for TOML configuration loading and validation.
"""

import tempfile
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase

from alpn_lab.config import apply_overrides, load_config, parse_config
from alpn_lab.exceptions import ConfigurationError

REPO_ROOT = Path(settings.BASE_DIR)


class ParseConfigTestCase(SimpleTestCase):

    def test_defaults(self):
        """An empty document yields the documented defaults."""
        config = parse_config({})
        self.assertEqual(config.variant, 'eppo')
        self.assertEqual((config.catalog.J, config.catalog.topic_count, config.catalog.area_count), (20, 14, 7))
        self.assertEqual(config.goal.beta, 0.8)
        self.assertEqual(config.goal.t_max, 100)
        self.assertEqual(config.agent.clip_eps, 0.2)
        self.assertEqual(config.agent.hidden, 64)
        self.assertEqual(config.environment.backing, 'analytic')
        self.assertEqual(config.environment.student.eta_correct, 0.25)
        self.assertEqual(config.run.episodes, 3000)
        self.assertEqual(config.run.seeds, (0,))
        self.assertEqual(config.run.checkpoint_every, settings.ALPN_DEFAULTS['CHECKPOINT_EVERY'])

    def test_nested_sections(self):
        config = parse_config({
            'environment': {'profile': {'mu_g': -1.0}, 'student': {'slip': 0.0}},
            'agent': {'variant': 'a2c', 'lr': 1e-3},
            'reward': {'d_floor': 0.01},
        })
        self.assertEqual(config.environment.profile.mu_g, -1.0)
        self.assertEqual(config.environment.profile.sigma_g, 0.5)
        self.assertEqual(config.environment.student.slip, 0.0)
        self.assertEqual(config.environment.d_floor, 0.01)
        self.assertEqual(config.variant, 'a2c')
        self.assertEqual(config.agent.lr, 1e-3)

    def test_unknown_key_names_field(self):
        """A misspelled key is rejected with its dotted path."""
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config({'agent': {'clip_epsilon': 0.1}})
        self.assertEqual(ctx.exception.field, 'agent.clip_epsilon')
        self.assertIn('field=agent.clip_epsilon', ctx.exception.one_line())

    def test_unknown_section(self):
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config({'trainer': {}})
        self.assertEqual(ctx.exception.field, 'trainer')

    def test_deeply_nested_error(self):
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config({'environment': {'student': {'slip': 1.5}}})
        self.assertEqual(ctx.exception.field, 'environment.student.slip')

    def test_range_checks(self):
        for data, field in (
            ({'goal': {'beta': 1.0}}, 'goal.beta'),
            ({'agent': {'clip_eps': 0.0}}, 'agent.clip_eps'),
            ({'agent': {'variant': 'dqn'}}, 'agent.variant'),
            ({'run': {'episodes': -1}}, 'run.episodes'),
            ({'catalog': {'J': 4, 'topic_count': 5}}, 'catalog.topic_count'),
            ({'agent': {'episodes_per_update': 8, 'buffer_capacity': 4}}, 'agent.buffer_capacity'),
        ):
            with self.assertRaises(ConfigurationError, msg=field) as ctx:
                parse_config(data)
            self.assertEqual(ctx.exception.field, field)

    def test_akt_backing_needs_checkpoint(self):
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config({'environment': {'backing': 'akt'}})
        self.assertEqual(ctx.exception.field, 'environment.akt_checkpoint')

    def test_missing_paths(self):
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config({'catalog': {'file': '/nonexistent/catalog.csv'}})
        self.assertEqual(ctx.exception.field, 'catalog.file')


class OverridesTestCase(SimpleTestCase):

    def test_overrides_replace_values(self):
        data = {'run': {'seeds': [1, 2, 3]}, 'agent': {'variant': 'ppo'}}
        out = apply_overrides(data, seed=9, variant='a2c', out='runs/x')
        self.assertEqual(out['run']['seeds'], [9])
        self.assertEqual(out['agent']['variant'], 'a2c')
        self.assertEqual(out['run']['output_dir'], 'runs/x')
        self.assertEqual(data['run']['seeds'], [1, 2, 3])

    def test_no_overrides(self):
        data = {'goal': {'beta': 0.7}}
        self.assertEqual(apply_overrides(data), data)


class ConfigHashTestCase(SimpleTestCase):

    def test_output_dir_does_not_change_hash(self):
        a = parse_config({'run': {'output_dir': 'runs/a'}})
        b = parse_config({'run': {'output_dir': 'runs/b'}})
        self.assertEqual(a.config_hash, b.config_hash)

    def test_episode_count_does_not_change_hash(self):
        """Extending a run keeps its identity."""
        self.assertEqual(parse_config({'run': {'episodes': 10}}).config_hash,
                         parse_config({'run': {'episodes': 20}}).config_hash)

    def test_hyperparameters_change_hash(self):
        self.assertNotEqual(parse_config({}).config_hash, parse_config({'agent': {'alpha': 0.02}}).config_hash)

    def test_defaults_spelled_out_hash_alike(self):
        """Writing a default explicitly does not change the hash."""
        self.assertEqual(parse_config({}).config_hash, parse_config({'goal': {'beta': 0.8}}).config_hash)


class LoadConfigTestCase(SimpleTestCase):

    def test_shipped_configs_validate(self):
        for name in ('default', 'ppo', 'a2c', 'smoke'):
            config = load_config(REPO_ROOT / 'configs' / f'{name}.toml')
            self.assertIn(config.variant, ('a2c', 'ppo', 'eppo'), name)

    def test_shipped_catalog_matches_synthetic_default(self):
        config = parse_config({'catalog': {'file': str(REPO_ROOT / 'data' / 'catalogs' / 'default_j20.csv')}})
        self.assertEqual(config.build_catalog().fingerprint(), parse_config({}).build_catalog().fingerprint())

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError) as ctx:
            load_config('/nonexistent/config.toml')
        self.assertEqual(ctx.exception.field, 'config')

    def test_invalid_toml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bad.toml'
            path.write_text('[agent\nlr = 1')
            with self.assertRaises(ConfigurationError):
                load_config(path)

    def test_cli_overrides(self):
        config = load_config(REPO_ROOT / 'configs' / 'smoke.toml', seed=4, variant='ppo', out='runs/other')
        self.assertEqual(config.run.seeds, (4,))
        self.assertEqual(config.variant, 'ppo')
        self.assertEqual(str(config.output_dir), 'runs/other')
