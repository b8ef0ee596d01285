# -*- coding: utf-8 -*-

"""
Unit tests for configuration loading and file output.
"""

import json
import os
import tempfile
import unittest

from source.config import DEFAULT_SEED, Config, RunConfig, create_example_config
from source.errors import ConfigError
from source.grid import Field, Grid
from source.geometry import Domain
from source.utils import config_hash, meta_block, write_csv, write_field_csv, write_json


class TestConfig(unittest.TestCase):
    """Test the configuration layer."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_defaults(self):
        """Test default values and dot-notation access."""
        config = Config()
        self.assertEqual(config.get('problem.p'), 2.0)
        self.assertEqual(config.get('seed'), DEFAULT_SEED)
        self.assertIsNone(config.get('problem.missing'))
        self.assertEqual(config.get('problem.missing', 7), 7)

    def test_set(self):
        """Test setting nested values."""
        config = Config()
        config.set('solver.tol', 1e-6)
        config.set('extra.key', 'value')
        self.assertEqual(config.get('solver.tol'), 1e-6)
        self.assertEqual(config.get('extra.key'), 'value')

    def test_load_yaml_merges_over_defaults(self):
        """Test YAML loading, including exponent floats without a dot."""
        path = self._path('run.yaml')
        with open(path, 'w', encoding='utf-8') as f:
            f.write("problem:\n  p: 3.0\nsolver:\n  tol: 1e-9\n")
        config = Config(path)
        self.assertEqual(config.get('problem.p'), 3.0)
        self.assertEqual(config.get('problem.s'), 0.5)
        run = RunConfig.from_config(config, 'solve')
        self.assertEqual(run.solver.tol, 1e-9)
        self.assertEqual(run.solver.p, 3.0)

    def test_load_json(self):
        """Test JSON loading."""
        path = self._path('run.json')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump({'domain': {'kind': 'ball', 'params': [1.0]}}, f)
        run = RunConfig.from_config(Config(path), 'torsion')
        self.assertEqual(run.domain.kind, 'ball')
        self.assertEqual(run.domain.dim, 2)

    def test_bad_files(self):
        """Test missing, malformed and non-mapping files."""
        with self.assertRaises(ConfigError):
            Config(self._path('missing.yaml'))
        bad = self._path('bad.json')
        with open(bad, 'w', encoding='utf-8') as f:
            f.write('{not json')
        with self.assertRaises(ConfigError):
            Config(bad)
        listing = self._path('list.yaml')
        with open(listing, 'w', encoding='utf-8') as f:
            f.write('- 1\n- 2\n')
        with self.assertRaises(ConfigError):
            Config(listing)
        other = self._path('run.toml')
        with open(other, 'w', encoding='utf-8') as f:
            f.write('p = 2\n')
        with self.assertRaises(ConfigError):
            Config(other)

    def test_save_and_reload(self):
        """Test that saved configurations load back unchanged."""
        config = Config()
        config.set('problem.s', 0.25)
        path = self._path('saved.yaml')
        config.save(path)
        self.assertEqual(Config(path).as_dict(), config.as_dict())
        with self.assertRaises(ConfigError):
            Config().save()

    def test_create_example_config(self):
        """Test the example file holds the defaults."""
        path = create_example_config(self._path('example.yaml'))
        self.assertTrue(os.path.exists(path))
        self.assertEqual(Config(path).as_dict(), Config().as_dict())


class TestRunConfig(unittest.TestCase):
    """Test validation into a RunConfig."""

    def test_refine_halves_spacing(self):
        """Test grid refinement and overrides."""
        run = RunConfig.from_config(Config(), 'solve', out='elsewhere', seed=7, refine=2)
        self.assertEqual(run.h, Config().get('grid.h') / 4.0)
        self.assertEqual(run.out, 'elsewhere')
        self.assertEqual(run.seed, 7)

    def test_invalid_values(self):
        """Test that out-of-range values raise ConfigError."""
        cases = [('problem.p', 1.5), ('problem.s', 1.2), ('problem.p', 'two'), ('grid.h', -1.0),
                 ('grid.refine', -1), ('seed', -3), ('seed', 2 ** 64), ('solver.method', 'newton'),
                 ('domain.kind', 'square'), ('diagnostics.n_levels', 2),
                 ('barrier.lambda_cap', 1.0), ('verify.criteria', [0, 12])]
        for key, value in cases:
            config = Config()
            config.set(key, value)
            with self.assertRaises(ConfigError, msg=key):
                RunConfig.from_config(config, 'solve')

    def test_invalid_quadrature(self):
        """Test that bad quadrature settings raise ConfigError."""
        cases = [('quadrature.order', 1), ('quadrature.order', 8.5), ('quadrature.grading', 1.5),
                 ('quadrature.angular_rtol', 0.0), ('quadrature.ball_order', 0),
                 ('quadrature.floor', 'tiny'), ('quadrature.panels', 4)]
        for key, value in cases:
            config = Config()
            config.set(key, value)
            with self.assertRaises(ConfigError, msg=key):
                RunConfig.from_config(config, 'solve')
        config = Config()
        config.set('quadrature.order', 8)
        self.assertEqual(RunConfig.from_config(config, 'solve').quadrature['order'], 8)

    def test_unknown_command(self):
        """Test that unknown commands are refused."""
        with self.assertRaises(ConfigError):
            RunConfig.from_config(Config(), 'plot')


class TestOutput(unittest.TestCase):
    """Test CSV and JSON output."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_config_hash(self):
        """Test that the hash ignores key order and sees value changes."""
        a = {'x': 1.0, 'y': [1, 2]}
        b = {'y': [1, 2], 'x': 1.0}
        self.assertEqual(config_hash(a), config_hash(b))
        self.assertNotEqual(config_hash(a), config_hash({'x': 2.0, 'y': [1, 2]}))
        self.assertEqual(len(config_hash(a)), 64)

    def test_csv_format(self):
        """Test meta lines, the header and full-precision numerics."""
        path = os.path.join(self.tmp.name, 'sub', 'table.csv')
        write_csv(path, ['a', 'b'], [(0.1, True), (3, None)], meta={'seed': 5})
        with open(path, encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertEqual(lines, ['# seed=5', 'a,b', '0.10000000000000001,true', '3,'])

    def test_field_csv(self):
        """Test one row per grid node."""
        grid = Grid.covering(Domain.interval(1.0), 0.25)
        path = write_field_csv(os.path.join(self.tmp.name, 'u.csv'), Field.zeros(grid))
        with open(path, encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], 'x,u')
        self.assertEqual(len(lines), grid.size + 1)

    def test_json_meta_last(self):
        """Test that the meta block closes the document."""
        path = os.path.join(self.tmp.name, 'doc.json')
        meta = meta_block('1.0.0', {'seed': 1}, 1)
        write_json(path, {'value': float('nan'), 'rows': [1, 2]}, meta)
        with open(path, encoding='utf-8') as f:
            document = json.load(f)
        self.assertIsNone(document['value'])
        self.assertEqual(list(document)[-1], 'meta')
        self.assertEqual(document['meta']['version'], '1.0.0')


if __name__ == '__main__':
    unittest.main()
