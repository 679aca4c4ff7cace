from django.test import SimpleTestCase

from alpn_lab.exceptions import (
    CatalogMismatchError,
    ConfigurationError,
    LogFormatError,
    NonFiniteGradientError,
    TrainingDivergedError,
)


class OneLineTestCase(SimpleTestCase):

    def test_field_and_line(self):
        e = LogFormatError("bad value", field='correctness', line=4)
        self.assertEqual(e.one_line(), 'error=LogFormatError field=correctness line=4 message=bad value')
        self.assertEqual(e.exit_code, 2)

    def test_newlines_flattened(self):
        self.assertEqual(ConfigurationError("a\nb").one_line(), 'error=ConfigurationError message=a b')

    def test_exit_codes(self):
        self.assertEqual(CatalogMismatchError("x").exit_code, 2)
        self.assertEqual(NonFiniteGradientError("x", ['w']).exit_code, 3)
        self.assertEqual(TrainingDivergedError("x").exit_code, 3)

    def test_diverged_names_checkpoint(self):
        e = TrainingDivergedError("Non-finite objective nan", last_checkpoint='runs/a/seed_0/checkpoint.alpn')
        self.assertTrue(e.one_line().endswith('last_checkpoint=runs/a/seed_0/checkpoint.alpn'))
        self.assertNotIn('last_checkpoint', TrainingDivergedError("x").one_line())
