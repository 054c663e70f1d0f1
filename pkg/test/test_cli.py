#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Script for testing experiment configs, drivers and the homtool command line
"""

# This code is a part of ddhom library
# :license: MIT, see LICENSE for more details.

import io
import os
import sys
import glob
import logging
import tempfile
import unittest
from contextlib import redirect_stdout

from ddhom import chio
from ddhom.cli import CLIApp, exit_code
from ddhom.config import AppConfig, ExperimentConfig, Option, ell_for, describe_schema
from ddhom.errors import AdmissibilityError, CertificationError, EllipticityError, SolverError
from ddhom.experiments import (hom_error_failures, lod_failures, run_and_write, run_experiment, plot_result,
                               validate_config)

TEST_DIR = os.path.dirname(os.path.realpath(__file__))
ROOT_DIR = os.path.dirname(TEST_DIR)
CONFIG_DIR = os.path.join(ROOT_DIR, 'configs')
if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)

import homtool  # noqa: E402


# ------------------------------------------------------------------------------
# Configuration
# ------------------------------------------------------------------------------

def getLogger():
    return logging.getLogger(__name__)


PROP1_CONSTANT = '''
[experiment]
name = prop1

[mesh]
n_coarse = 2
n_eps = 4
n_fine = 8

[coefficient]
kind = constant
c = 2.0
'''

NEGATIVE_CONTROL = '''
[experiment]
name = prop1

[mesh]
n_coarse = 4
n_eps = 6
n_fine = 24
allow_inadmissible = yes

[coefficient]
kind = laminate
'''


def parse(text):
    return ExperimentConfig.from_ini(text)


def with_sections(**sections):
    """ An INI text with the given sections, each a dict of entries """
    lines = []
    for section, entries in sections.items():
        lines.append('[{}]'.format(section))
        lines.extend('{} = {}'.format(k, v) for k, v in entries.items())
    return '\n'.join(lines)


# ------------------------------------------------------------------------------
# Tests
# ------------------------------------------------------------------------------

class TestConfig(unittest.TestCase):

    def test_defaults(self):
        config = ExperimentConfig()
        self.assertEqual(config.name, 'prop1')
        self.assertEqual(config.prefix, 'prop1')
        self.assertEqual(config['mesh']['n_coarse'], [4])
        self.assertEqual(config.coefficient.kind, 'constant')
        self.assertEqual(config.mesh_triples(), [(4, 16, 128)])
        self.assertTrue(config.strict())

    def test_round_trip(self):
        config = parse(NEGATIVE_CONTROL)
        self.assertFalse(config.strict())
        again = parse(config.to_ini())
        self.assertEqual(again, config)
        self.assertEqual(again.to_ini(), config.to_ini())
        self.assertEqual(ExperimentConfig.from_dict(config.to_dict()), config)
        self.assertEqual(again.sha256(), config.sha256())
        self.assertNotEqual(parse(PROP1_CONSTANT).sha256(), config.sha256())

    def test_json(self):
        config = parse(NEGATIVE_CONTROL)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            chio.write_json(path, config.to_dict())
            self.assertEqual(ExperimentConfig.from_file(path), config)
            chio.write_file(path, '{not json')
            self.assertRaises(AdmissibilityError, lambda: ExperimentConfig.from_file(path))

    def test_shipped_configs(self):
        paths = sorted(glob.glob(os.path.join(CONFIG_DIR, '*.ini')))
        self.assertGreaterEqual(len(paths), 6)
        for path in paths:
            config = validate_config(path)
            self.assertEqual(parse(config.to_ini()), config)

    def test_mesh_triples(self):
        config = parse(with_sections(experiment={'name': 'hom-error'}, mesh={'n_coarse': 2, 'n_eps': '4, 8', 'fine_per_eps': 4},
                                     coefficient={'kind': 'constant'}))
        self.assertEqual(config.mesh_triples(), [(2, 4, 16), (2, 8, 32)])
        config.validate()
        broken = parse(with_sections(mesh={'n_coarse': '2, 4', 'n_eps': '4, 8, 16'}))
        self.assertRaises(AdmissibilityError, broken.mesh_triples)

    def test_invalid(self):
        invalid = [with_sections(experiment={'name': 'everything'}),
                   with_sections(nonsense={'a': 1}),
                   with_sections(mesh={'n_cells': 4}),
                   with_sections(mesh={'n_coarse': 'four'}),
                   with_sections(mesh={'n_coarse': 2.5}),
                   with_sections(mesh={'n_coarse': 3, 'n_eps': 16, 'n_fine': 48}),
                   with_sections(coefficient={'a': 1}),
                   with_sections(coefficient={'kind': 'laminate', 'axis': 'x'}),
                   with_sections(coefficient={'kind': 'laminate', 'n_eps': 8}),
                   with_sections(coefficient={'kind': 'laminate'}, mesh={'n_coarse': 2, 'n_eps': 2, 'n_fine': 6}),
                   with_sections(experiment={'name': 'prop1'}, coefficient={'kind': 'random_field'}),
                   with_sections(experiment={'name': 'lod'}, mesh={'allow_inadmissible': 'true'}),
                   with_sections(experiment={'name': 'hom-error'}),
                   with_sections(experiment={'name': 'decay'}, mesh={'n_coarse': 4, 'n_eps': '8, 16', 'n_fine': 32}),
                   with_sections(localization={'ell_rule': 'sometimes'}),
                   with_sections(localization={'ell': -1}),
                   with_sections(solver={'tol_corrector': 2.0}),
                   with_sections(solver={'lanczos_iters': 1}),
                   with_sections(rhs={'name': 'delta'}),
                   with_sections(output={'format': 'xml'}),
                   with_sections(output={'plot': 'maybe'}),
                   'no section header']
        for text in invalid:
            with self.assertRaises(AdmissibilityError, msg=text):
                parse(text).validate()
        # ellipticity problems keep their own exit code
        with self.assertRaises(EllipticityError):
            parse(with_sections(coefficient={'kind': 'constant', 'c': -1}))

    def test_options(self):
        ints = Option('n', 'ints', [1])
        self.assertEqual(ints.parse('4, 8 16'), [4, 8, 16])
        self.assertEqual(ints.parse(4), [4])
        self.assertEqual(ints.format([4, 8]), '4, 8')
        flag = Option('plot', 'bool', False)
        self.assertTrue(flag.parse('yes'))
        self.assertFalse(flag.parse('off'))
        self.assertEqual(flag.format(True), 'true')
        self.assertEqual(Option('tol', 'float', 0.1).format(1e-10), '1e-10')

    def test_ell_rule(self):
        config = ExperimentConfig()
        self.assertEqual(ell_for(config, 8), 3)
        self.assertEqual(ell_for(config, 8, c_ell=3), 9)
        config['localization']['c_ell'] = 2
        self.assertEqual(ell_for(config, 5), 6)
        config['localization']['ell_rule'] = 'fixed'
        config['localization']['ell'] = 4
        self.assertEqual(ell_for(config, 16), 4)

    def test_schema(self):
        lines = []
        describe_schema(print_out=lines.append)
        self.assertIn('[mesh]', lines)
        self.assertIn('[coefficient]', lines)
        self.assertTrue(any(line.strip().startswith('n_coarse (ints) = 4') for line in lines))

    def test_locator(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'ddhom.ini')
            chio.write_file(path, PROP1_CONSTANT)
            locator = AppConfig('ddhom', working_dir=tmp)
            self.assertEqual(locator.config_path, None)
            self.assertEqual(locator.config.coefficient.params['c'], 2.0)
            self.assertTrue(locator.config_path.endswith('ddhom.ini'))
            self.assertEqual(locator.load(path).name, 'prop1')


class TestChecks(unittest.TestCase):

    def test_hom_error(self):
        eps = [1 / 8, 1 / 16, 1 / 32]
        self.assertEqual(hom_error_failures([1e-3, 5e-4, 2.5e-4], eps), [])
        # u_eps = u_0 for a constant coefficient
        self.assertEqual(hom_error_failures([1e-12, 3e-13, 1e-12], eps), [])
        slow = hom_error_failures([1e-3, 1e-3 / 2 ** 0.5, 5e-4], eps)
        self.assertEqual(len(slow), 1)
        self.assertIn('outside [0.75, 1.1]', slow[0])
        failures = hom_error_failures([1e-3, 2e-3, 2.5e-4], eps)
        self.assertTrue(any('does not decrease' in failure for failure in failures))

    def test_lod(self):
        H = [1 / 4, 1 / 8, 1 / 16]

        def table(lod, p1):
            return [{'H': h, 'energy_error': e, 'p1_baseline_error': b} for h, e, b in zip(H, lod, p1)]
        levels = [{'H': 0.25, 'energy_errors': [0.5, 0.1, 0.05]}]
        good = table([h for h in H], [0.5 * h ** 0.1 for h in H])
        self.assertEqual(lod_failures(good, levels), [])
        stagnant = lod_failures(table(H, [h ** 0.461 for h in H]), levels)
        self.assertEqual(len(stagnant), 1)
        self.assertIn('P1 rate 0.4610', stagnant[0])
        slow = lod_failures(table([h ** 0.5 for h in H], [0.5] * 3), levels)
        self.assertEqual(len(slow), 1)
        self.assertIn('LOD rate 0.5000', slow[0])
        bumpy = lod_failures(good, [{'H': 0.125, 'energy_errors': [0.5, 0.6, 0.05]}])
        self.assertEqual(len(bumpy), 1)
        self.assertIn('does not decrease in ell', bumpy[0])
        # a single H has no rate
        self.assertEqual(lod_failures(good[:1], levels), [])


class TestCLIApp(unittest.TestCase):

    def test_exit_codes(self):
        def certify(cli, args):
            ''' Fail a certification '''
            raise CertificationError("gamma_est >= 1")

        def solve(cli, args):
            raise SolverError("CG did not converge")

        def answer(cli, args):
            return 5

        app = CLIApp(desc='test app')
        app.add_task('certify', func=certify)
        app.add_task('solve', func=solve)
        app.add_task('answer', func=answer)
        app.add_task('nothing', func=lambda cli, args: None)
        self.assertEqual(app.run(argv=['certify', '-q']), 4)
        self.assertEqual(app.run(argv=['solve', '-q']), 3)
        self.assertEqual(app.run(argv=['answer']), 5)
        self.assertEqual(app.run(argv=['nothing']), 0)
        self.assertEqual(exit_code(AdmissibilityError("bad")), 2)
        self.assertEqual(exit_code(EllipticityError("bad")), 2)
        self.assertEqual(exit_code(RuntimeError("bad")), 1)


class TestHomtool(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        logging.getLogger().setLevel(logging.WARNING)

    def tearDown(self):
        self.tmp.cleanup()
        logging.getLogger().setLevel(logging.WARNING)

    def write_config(self, name, text):
        path = os.path.join(self.tmp.name, name)
        chio.write_file(path, text)
        return path

    def test_validate_config(self):
        good = self.write_config('good.ini', PROP1_CONSTANT)
        bad = self.write_config('bad.ini', with_sections(experiment={'name': 'everything'}))
        out = io.StringIO()
        with redirect_stdout(out):
            self.assertEqual(homtool.main(['validate-config', good]), 0)
            self.assertEqual(homtool.main(['validate-config', '--schema']), 0)
            self.assertEqual(homtool.main(['validate-config']), 2)
        self.assertIn('[coefficient]', out.getvalue())
        self.assertEqual(homtool.main(['validate-config', '-q', bad]), 2)

    def test_prop1(self):
        config = self.write_config('prop1.ini', PROP1_CONSTANT)
        output = os.path.join(self.tmp.name, 'out')
        report = os.path.join(self.tmp.name, 'report.txt')
        code = homtool.main(['prop1', '--config', config, '--output', output, '--threads', '1', '--report', report])
        self.assertEqual(code, 0)
        rows = chio.read_csv(os.path.join(output, 'prop1.csv'))
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['certified'], 'True')
        data = chio.read_json(os.path.join(output, 'prop1.json'))
        self.assertEqual(data['metadata']['config_sha256'], ExperimentConfig.from_file(config).sha256())
        self.assertIn('total', data['metadata']['wall_times'])
        self.assertIn('Wrote', chio.read_file(report))
        self.assertEqual(homtool.main(['prop1', '-q', '--config', config, '--output', output, '--threads', '0']), 2)

    def test_negative_control(self):
        config = self.write_config('negative.ini', NEGATIVE_CONTROL)
        output = os.path.join(self.tmp.name, 'out')
        report = os.path.join(self.tmp.name, 'report.txt')
        code = homtool.main(['prop1', '-q', '--config', config, '--output', output, '--report', report])
        self.assertEqual(code, 0)
        rows = chio.read_csv(os.path.join(output, 'prop1.csv'))
        self.assertEqual(rows[0]['precondition_met'], 'False')
        self.assertEqual(rows[0]['certified'], 'False')

    def test_threads_reproducible(self):
        config = parse(with_sections(experiment={'name': 'prop1'}, mesh={'n_coarse': 2, 'n_eps': 4, 'n_fine': 16},
                                     coefficient={'kind': 'checkerboard'}, output={'format': 'csv'}))
        contents = []
        for threads in (1, 2):
            out = os.path.join(self.tmp.name, 'threads{}'.format(threads))
            result = run_and_write(config, output_dir=out, threads=threads)
            self.assertTrue(result.certified)
            with open(os.path.join(out, 'prop1.csv'), 'rb') as infile:
                contents.append(infile.read())
        self.assertEqual(contents[0], contents[1])

    def test_hom_error_constant(self):
        config = parse(with_sections(experiment={'name': 'hom-error'},
                                     mesh={'n_coarse': 2, 'n_eps': '4, 8', 'fine_per_eps': 4},
                                     coefficient={'kind': 'constant', 'c': 3.0},
                                     output={'format': 'json', 'prefix': 'constant'}))
        result = run_and_write(config, output_dir=self.tmp.name)
        self.assertEqual([row['eps'] for row in result.rows], [0.25, 0.125])
        for row in result.rows:
            self.assertLessEqual(row['l2_error'], 1e-9)
        self.assertIsNone(result.rows[0]['rate'])
        self.assertTrue(result.summary['exact'])
        self.assertTrue(result.certified)
        self.assertEqual(result.paths, [os.path.join(self.tmp.name, 'constant.json')])
        data = chio.read_json(result.paths[0])
        self.assertEqual(data['experiment'], 'hom-error')
        self.assertEqual(data['config']['mesh']['n_eps'], [4, 8])

    def test_decay(self):
        config = parse(with_sections(experiment={'name': 'decay'},
                                     mesh={'n_coarse': 4, 'n_eps': 8, 'n_fine': 16},
                                     coefficient={'kind': 'laminate'},
                                     solver={'lanczos_iters': 40},
                                     localization={'ell_rule': 'fixed', 'ell': 1, 'extra_levels': 1}))
        result = run_experiment(config)
        self.assertEqual([row['ell'] for row in result.rows], [0, 1, 2])
        self.assertEqual(len(result.summary['per_H']), 1)
        self.assertEqual(result.summary['per_H'][0]['ell'], 1)
        self.assertTrue(0 < result.summary['per_H'][0]['gamma_est'] < 1)
        # the square averages miss the harmonic mean across the layers
        self.assertGreater(result.rows[0]['error'], 0.5)

    def test_lod(self):
        config = parse(with_sections(experiment={'name': 'lod'},
                                     mesh={'n_coarse': '4, 8', 'n_eps': 32, 'n_fine': 32},
                                     coefficient={'kind': 'random_field', 'seed': 7, 'contrast': 10},
                                     solver={'lanczos_iters': 30},
                                     localization={'c_ell': 1}))
        result = run_experiment(config)
        self.assertEqual([row['ell'] for row in result.rows], [2, 3])
        for row in result.rows:
            self.assertGreater(row['energy_error'], 0)
            self.assertGreater(row['p1_baseline_error'], 0)
        self.assertTrue(all(value > 0 for value in result.summary['smallest_eigenvalues']))
        self.assertGreater(result.summary['reference_energy'], 0)
        for row, entry in zip(result.rows, result.summary['errors_by_level']):
            # level 0 is the uncorrected P1 basis
            self.assertEqual(len(entry['energy_errors']), row['ell'] + 1)
            self.assertAlmostEqual(entry['energy_errors'][0], row['p1_baseline_error'], delta=1e-8 * row['p1_baseline_error'])
            self.assertEqual(entry['energy_errors'][-1], row['energy_error'])
        try:
            import matplotlib  # noqa: F401
        except ImportError:
            return
        path = plot_result(result, os.path.join(self.tmp.name, 'lod.png'))
        self.assertTrue(os.path.isfile(path))


# ------------------------------------------------------------------------------
# Main
# ------------------------------------------------------------------------------

if __name__ == "__main__":
    unittest.main()
