# -*- coding: utf-8 -*-

"""
Tests for the command-line entry point.
"""

import contextlib
import io
import json
import os
import tempfile
import unittest

from source import cli


class TestCli(unittest.TestCase):
    """Run the CLI end to end on small grids."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = os.path.join(self.tmp.name, 'out')

    def _config(self, **sections):
        data = {
            'grid': {'h': 0.03125},
            'solver': {'tol': 1e-10},
            'output': {'use_colors': False, 'plots': False},
        }
        for name, values in sections.items():
            data.setdefault(name, {}).update(values)
        path = os.path.join(self.tmp.name, 'run.json')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f)
        return path

    def _main(self, *argv):
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            return cli.main(list(argv) + ['--no-color'])

    def _read(self, name):
        with open(os.path.join(self.out, name), encoding='utf-8') as f:
            return f.read()

    def test_solve_writes_outputs(self):
        """Test that solve writes the field, the residuals and the summary."""
        code = self._main('solve', '--config', self._config(), '--out', self.out)
        self.assertEqual(code, cli.EXIT_OK)
        for name in ('solution.csv', 'solution_residuals.csv', 'solution_summary.json'):
            self.assertTrue(os.path.exists(os.path.join(self.out, name)), name)
        summary = json.loads(self._read('solution_summary.json'))
        self.assertGreater(summary['sup_u'], 0.0)
        self.assertTrue(summary['solve']['converged'])
        self.assertEqual(summary['meta']['version'], '1.0.0')

    def test_zero_load(self):
        """Test that a zero load gives a zero solution."""
        config = self._config(problem={'load': 0.0})
        self.assertEqual(self._main('solve', '--config', config, '--out', self.out), 0)
        self.assertEqual(json.loads(self._read('solution_summary.json'))['sup_u'], 0.0)

    def test_deterministic_output(self):
        """Test that reruns give identical files."""
        config = self._config()
        self._main('torsion', '--config', config, '--out', self.out)
        first = self._read('torsion.csv')
        summary = self._read('torsion_summary.json')
        self._main('torsion', '--config', config, '--out', self.out)
        self.assertEqual(self._read('torsion.csv'), first)
        self.assertEqual(self._read('torsion_summary.json'), summary)

    def test_obstacle(self):
        """Test the obstacle command with both obstacles."""
        config = self._config(obstacle={'lower_scale': 0.5, 'upper': 1.0})
        self.assertEqual(self._main('obstacle', '--config', config, '--out', self.out), 0)
        checks = json.loads(self._read('obstacle_summary.json'))['checks']
        self.assertEqual([c['name'] for c in checks], ['kkt', 'lewy_stampacchia'])

    def test_diagnose(self):
        """Test the diagnostics report with both interval anchors."""
        config = self._config(grid={'h': 0.015625})
        self.assertEqual(self._main('diagnose', '--config', config, '--out', self.out), 0)
        report = json.loads(self._read('diagnostics.json'))
        self.assertEqual(len(report['anchors']), 2)
        checks = {c['name']: c for c in report['checks']}
        self.assertTrue(checks['holder_fit']['pass'])
        self.assertTrue(checks['scaling_alpha']['pass'])
        for row in report['anchors']:
            self.assertEqual(row['harnack']['name'], 'harnack_lower')
        self.assertIn('config_hash', report['meta'])

    def test_barrier_sweep(self):
        """Test the bump barrier sweep without the upper barrier."""
        config = self._config(grid={'h': 0.0078125},
                              barrier={'n_lambda': 1, 'max_points': 3, 'upper': False})
        self.assertEqual(self._main('barrier', '--config', config, '--out', self.out), 0)
        document = json.loads(self._read('barrier.json'))
        self.assertEqual([c['name'] for c in document['checks']], ['barrier_bound'])
        sweep = self._read('barrier_sweep.csv').splitlines()
        self.assertIn('level,lambda,K,ratio', sweep)

    def test_configuration_errors(self):
        """Test exit code 3 for bad values, missing files and no command."""
        bad = self._config(problem={'p': 1.5})
        self.assertEqual(self._main('solve', '--config', bad), cli.EXIT_CONFIG)
        bad_rule = self._config(quadrature={'order': 0})
        self.assertEqual(self._main('solve', '--config', bad_rule), cli.EXIT_CONFIG)
        missing = os.path.join(self.tmp.name, 'missing.yaml')
        self.assertEqual(self._main('solve', '--config', missing), cli.EXIT_CONFIG)
        self.assertEqual(self._main(), cli.EXIT_CONFIG)

    def test_non_convergence(self):
        """Test exit code 2 when the iteration cap is hit."""
        config = self._config(problem={'p': 3.0}, solver={'tol': 1e-12, 'max_iter': 1})
        self.assertEqual(self._main('solve', '--config', config, '--out', self.out),
                         cli.EXIT_NONCONVERGENCE)

    def test_create_config(self):
        """Test writing the example configuration."""
        path = os.path.join(self.tmp.name, 'example.yaml')
        self.assertEqual(self._main('--create-config', path), 0)
        self.assertTrue(os.path.exists(path))

    def test_verify_selected_criteria(self):
        """Test verify on the cheap criteria and a forced failure."""
        config = self._config(verify={'criteria': [10, 11]})
        self.assertEqual(self._main('verify', '--config', config, '--out', self.out), 0)
        result = json.loads(self._read('verify.json'))
        self.assertTrue(result['pass'])
        self.assertEqual([c['criterion'] for c in result['criteria']], [10, 11])

        failing = self._config(verify={'criteria': [11], 'tolerance_scale': -1.0})
        self.assertEqual(self._main('verify', '--config', failing, '--out', self.out),
                         cli.EXIT_FAILURE)
        self.assertFalse(json.loads(self._read('verify.json'))['pass'])


if __name__ == '__main__':
    unittest.main()
