#!/usr/bin/env python3

import json
import os
import tempfile
import unittest
from types import SimpleNamespace
from unittest import mock
import coloredlogs

import numpy as np

from rfsense.config import ExperimentConfig
from rfsense.csv import flat_to_nested, nested_update, write_csv, read_csv
from rfsense.bench import BenchEntry, BenchReport, time_calls, bench_generation
from rfsense.geometry import LinkGeometry, TargetState
from rfsense.diffraction import QuadratureConfig
from rfsense.localization import OracleGenerator
from rfsense.cli import main
from rfsense.storage import load_model
from rfsense.errors import *

SLOW = os.environ.get('RFSENSE_SLOW') == '1'

SMALL = [
    'geometry.F=2',
    'quadrature.abs_tol=0.01',
    'experiment.grid.nx=3',
    'experiment.grid.ny=1',
    'experiment.samples_per_condition=4',
    'experiment.generate_samples=3',
    'experiment.rss_samples=100',
    'experiment.trials=3',
    'experiment.m_samples=4',
    'cvae.epochs=2',
    'cvae.batch_size=4',
    'cvae.Z=2',
]


class ConfigTestCase(unittest.TestCase):

    """
    Test cases for configuration handling and hashed CSV output
    """

    def setUp(self):
        coloredlogs.install(level='DEBUG')
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_flat_to_nested(self):
        for test in self.Tests['flat_to_nested']['good']:
            self.assertEqual(flat_to_nested(test[0]), test[1])
        for test in self.Tests['flat_to_nested']['bad']:
            self.assertRaises(ConfigError, flat_to_nested, test)
        self.assertEqual(nested_update({'a': {'b': 1, 'c': 2}}, {'a': {'c': 3}}), {'a': {'b': 1, 'c': 3}})

    def test_defaults(self):
        config = ExperimentConfig().validate()
        self.assertEqual(config.geometry().F, 16)
        self.assertEqual(config.grid().K, 75)
        self.assertEqual(config.body().x, 2.0)
        self.assertEqual(config.noise().sigma_T, 2.0)
        self.assertEqual(config.train_config().Z, 16)
        self.assertEqual(config.quadrature().init_tiles, (4, 4))
        self.assertEqual(config['experiment']['d_T'], [0.75, 1.0, 1.25])

    def test_overrides(self):
        config = ExperimentConfig()
        changed = config.with_overrides(['geometry.F=4', 'experiment.d_T=[0.5]', 'experiment.seed=7',
                                         'geometry.antenna=directional'])
        self.assertEqual(changed.geometry().F, 4)
        self.assertTrue(changed.geometry().directional)
        self.assertEqual(changed['experiment']['d_T'], [0.5])
        self.assertEqual(changed.train_config().seed, 7)
        self.assertEqual(config.geometry().F, 16)
        self.assertNotEqual(changed.hash, config.hash)
        self.assertEqual(ExperimentConfig().hash, config.hash)
        self.assertEqual(len(config.hash), 32)
        for test in self.Tests['bad_overrides']:
            self.assertRaises(ConfigError, config.with_overrides, [test])

    def test_validation(self):
        for test in self.Tests['invalid']:
            config = ExperimentConfig().with_overrides([test[0]])
            self.assertRaisesRegex(ConfigError, test[1], config.validate)

    def test_condition_sets(self):
        config = ExperimentConfig().with_overrides(['experiment.orientation.phi_count=5',
                                                    'experiment.orientation.phi_range=[-0.1, 0.1]'])
        sweep = config.orientation()
        self.assertEqual([c.theta_k.phi for c in sweep], list(np.linspace(-np.pi / 2, np.pi / 2, 5)))
        self.assertEqual({c.theta_k.position for c in sweep}, {(0.5, 0.0)})
        self.assertEqual(config.conditions('orientation'), sweep)
        self.assertEqual(len(config.conditions()), 75)
        self.assertEqual(config.uncertainty('orientation').phi_range, (-0.1, 0.1))
        self.assertEqual(config.uncertainty().phi_range, (-np.pi / 2, np.pi / 2))
        self.assertRaises(ConfigError, config.conditions, 'ring')
        self.assertEqual(config['experiment']['rss_beta'], 1.0)

    def test_files(self):
        path = os.path.join(self.tmp.name, 'config.json')
        with open(path, 'w') as outfile:
            json.dump({'geometry': {'F': 8}, 'noise': {'sigma_T': 3.0}}, outfile)
        config = ExperimentConfig.from_file(path)
        self.assertEqual((config.geometry().F, config.noise().sigma_T), (8, 3.0))
        for name, content in (('broken.json', '{"geometry": '), ('list.json', '[1, 2]'), ('unknown.json', '{"foo": {}}')):
            with open(os.path.join(self.tmp.name, name), 'w') as outfile:
                outfile.write(content)
            self.assertRaises(ConfigError, ExperimentConfig.from_file, os.path.join(self.tmp.name, name))
        self.assertRaises(ConfigError, ExperimentConfig.from_file, os.path.join(self.tmp.name, 'missing.json'))

    def test_hashed_csv(self):
        path = os.path.join(self.tmp.name, 'table.csv')
        write_csv(path, ('x_m', 'label'), [(0.25, 'L0'), (1.0, None)], 'abc123')
        with open(path) as infile:
            self.assertEqual(infile.readline(), "# config-hash: abc123\n")
        config_hash, rows = read_csv(path)
        self.assertEqual(config_hash, 'abc123')
        self.assertEqual(rows, [{'x_m': '0.25', 'label': 'L0'}, {'x_m': '1.0', 'label': ''}])
        self.assertRaises(ValueError, write_csv, path, ('x_m',), [(1, 2)], 'abc123')

    """
    The following dict defines test sets for the configuration tests.
    """
    Tests = dict(
        flat_to_nested=dict(
            good=[
                (
                    {'a.b': '1', 'a.c[1]': '2', 'a.c[0]': '"x"'},
                    {'a': {'b': 1, 'c': ['x', 2]}},
                ),
                (
                    {'experiment.grid.nx': '9', 'experiment.d_T': '[0.5, 1.0]', 'output.dir': 'results'},
                    {'experiment': {'grid': {'nx': 9}, 'd_T': [0.5, 1.0]}, 'output': {'dir': 'results'}},
                ),
                (
                    {'quadrature.init_tiles[1]': '8', 'quadrature.init_tiles[0]': '2', 'noise.mu_T': ''},
                    {'quadrature': {'init_tiles': [2, 8]}},
                ),
                (
                    {'uncertainty.phi_range': 'null'},
                    {'uncertainty': {'phi_range': None}},
                ),
            ],
            bad=[
                {'a': '1', 'a.b': '2'},
                {'a.b': '2', 'a': '1'},
                {'a[0]': '1', 'a.b': '2'},
            ],
        ),
        bad_overrides=[
            'geometry.bogus=1',
            'sensors.count=3',
            'geometry.F',
            '=3',
        ],
        invalid=[
            ('geometry.d=-1',                   r'\[geometry\]'),
            ('geometry.antenna="yagi"',         r'\[geometry\]'),
            ('geometry.f_high=2.3e9',           r'\[geometry\]'),
            ('noise.sigma_T=0.5',               r'\[noise\]'),
            ('quadrature.abs_tol=0',            r'\[quadrature\]'),
            ('uncertainty.dx=-0.1',             r'\[uncertainty\]'),
            ('cvae.activation=gelu',            r'\[cvae\]'),
            ('cvae.Z=0',                        r'\[cvae\]'),
            ('experiment.grid.nx=40',           r'\[experiment\]'),
            ('experiment.d_T=[5.0]',            r'd_T'),
            ('experiment.sweep.kind="spiral"',  r'sweep'),
            ('experiment.trials=0',             r'trials'),
            ('experiment.conditions="ring"',    r'conditions'),
            ('experiment.orientation.x=5.0',     r'orientation'),
            ('experiment.orientation.phi_count=0', r'phi_count'),
            ('experiment.orientation.phi_range=[0.0, 2.0]', r'\[uncertainty\]'),
            ('experiment.rss_beta=-1',           r'rss_beta'),
        ],
    )


class BenchTestCase(unittest.TestCase):

    """
    Test cases for the generation-time benchmark
    """

    def setUp(self):
        coloredlogs.install(level='DEBUG')

    def test_report_ratios(self):
        report = BenchReport({
            'cvae Z=16': BenchEntry('cvae Z=16', 1e-4, 1e-4, 1000),
            'em omnidirectional tol=1e-03': BenchEntry('em omnidirectional tol=1e-03', 1e-2, 1e-2, 10),
            'em directional tol=1e-03': BenchEntry('em directional tol=1e-03', 1.0, 1.0, 10),
        })
        self.assertAlmostEqual(report.ratio_vs_em('cvae Z=16'), 100.0)
        self.assertAlmostEqual(report.ratio_vs_em('em directional tol=1e-03'), 1e4)
        self.assertEqual([row[0] for row in report.csv_rows()], list(report.entries))
        self.assertEqual(report.to_dict()['cvae Z=16']['reference'], 3.5e-5)

    def test_time_calls(self):
        calls = []
        mean, median = time_calls(lambda: calls.append(sum(range(200))), 25, warmup=3)
        self.assertEqual(len(calls), 28)
        self.assertGreater(mean, 0.0)
        self.assertGreater(median, 0.0)
        self.assertRaises(DomainError, time_calls, lambda: None, 0)
        with mock.patch('rfsense.bench.time.get_clock_info', return_value=SimpleNamespace(resolution=1.0)):
            self.assertRaises(BenchError, time_calls, lambda: None, 5)

    def test_bench_generation(self):
        geom = LinkGeometry(freq_grid=(2.45e9,))
        quad = QuadratureConfig(abs_tol=1e-2)
        conditions = [TargetState(1.0), TargetState(2.0)]
        report = bench_generation({'cvae Z=16': OracleGenerator(geom, quad)}, conditions,
                                  {'em omnidirectional tol=1e-02': (geom, quad)}, n_cvae=100, n_em=10, warmup=2)
        self.assertEqual(list(report.entries), ['cvae Z=16', 'em omnidirectional tol=1e-02'])
        self.assertEqual(report.entries['cvae Z=16'].samples, 100)
        self.assertIsNone(report.entries['em omnidirectional tol=1e-02'].reference)
        self.assertGreater(report.ratio_vs_em('cvae Z=16'), 0.0)


class CliTestCase(unittest.TestCase):

    """
    Test cases for the command line
    """

    def setUp(self):
        coloredlogs.install(level='DEBUG')
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def cli(self, command, *extra):
        """ run a subcommand on the small setup; later --set options win """
        args = [command, '--out', self.out]
        for assignment in SMALL:
            args += ['--set', assignment]
        return main(args + list(extra))

    def path(self, name):
        return os.path.join(self.out, name)

    def test_usage(self):
        self.assertEqual(main([]), 2)
        self.assertEqual(main(['teleport']), 2)
        self.assertEqual(main(['fresnel-map', '--out', self.out, '--set', 'geometry.d=-1']), 2)
        self.assertEqual(main(['fresnel-map', '-c', self.path('missing.json')]), 2)
        self.assertEqual(main(['generate', '--out', self.out, '--model', self.path('missing.rfs')]), 1)

    def test_fresnel_map(self):
        self.assertEqual(main(['fresnel-map', '--out', self.out]), 0)
        config_hash, rows = read_csv(self.path('fresnel_map.csv'))
        self.assertEqual(config_hash, ExperimentConfig().with_overrides(['output.dir=' + json.dumps(self.out)]).hash)
        self.assertEqual(len(rows), 75 * 3)
        self.assertEqual(rows[0]['label'], 'L0')
        self.assertIn('L1(0.75)', {row['label'] for row in rows})

        other = os.path.join(self.out, 'again')
        self.assertEqual(main(['fresnel-map', '--out', other]), 0)
        with open(self.path('fresnel_map.csv')) as a, open(os.path.join(other, 'fresnel_map.csv')) as b:
            self.assertEqual(a.read().splitlines()[1:], b.read().splitlines()[1:])

    def test_simulate(self):
        self.assertEqual(self.cli('simulate', '--set', 'experiment.sweep.step=1.0'), 0)
        _, rows = read_csv(self.path('simulate.csv'))
        self.assertEqual([float(row['x_m']) for row in rows[::2]], [1.0, 2.0, 3.0])
        self.assertEqual(self.cli('simulate', '--sweep', 'orientation', '--set', 'experiment.orientation.phi_count=3'), 0)
        _, rows = read_csv(self.path('simulate.csv'))
        self.assertEqual(len(rows), 3 * 2)

    def test_pipeline(self):
        self.assertEqual(self.cli('dataset'), 0)
        self.assertTrue(os.path.exists(self.path('dataset.rfs')))
        self.assertEqual(self.cli('train'), 0)
        _, rows = read_csv(self.path('loss.csv'))
        self.assertEqual([row['epoch'] for row in rows], ['1', '2'])
        self.assertEqual(self.cli('generate'), 0)
        _, rows = read_csv(self.path('generate.csv'))
        self.assertEqual(len(rows), 3 * 2)
        self.assertEqual(self.cli('train', '--rss'), 0)
        self.assertEqual(load_model(self.path('model_rss.rfs')).beta, 1.0)
        self.assertEqual(load_model(self.path('model.rfs')).beta, 0.05)
        self.assertEqual(self.cli('rss'), 0)
        for k in range(3):
            _, rows = read_csv(self.path('rss_{}.csv'.format(k)))
            self.assertAlmostEqual(sum(float(row['mass']) for row in rows), 1.0, places=9)
        self.assertEqual(self.cli('localize'), 0)
        _, rows = read_csv(self.path('localize.csv'))
        self.assertEqual(len(rows), 3)
        # the three-cell grid lies on the LoS, no cell is outside the Fresnel ellipsoid
        self.assertEqual(self.cli('detect', '--set', 'experiment.trials=100'), 2)
        # fewer than 100 trials per class is refused
        self.assertEqual(self.cli('detect', '--oracle', '--set', 'experiment.grid.nx=15',
                                  '--set', 'experiment.grid.ny=3'), 2)
        # a model for another frequency grid is rejected
        self.assertEqual(self.cli('generate', '--set', 'geometry.F=3'), 1)

    def test_oracle_detection(self):
        self.assertEqual(self.cli('detect', '--oracle', '--set', 'geometry.F=1', '--set', 'experiment.grid.nx=15',
                                  '--set', 'experiment.grid.ny=3', '--set', 'experiment.d_T=[0.75]',
                                  '--set', 'experiment.m_samples=1', '--set', 'experiment.trials=100'), 0)
        _, rows = read_csv(self.path('detect.csv'))
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['d_T_m'], '0.75')
        with open(self.path('detect.json')) as infile:
            data = json.load(infile)
        self.assertEqual(data['reports'][0]['trials_L0'], 100)

    def test_orientation_pipeline(self):
        orientation = ['--set', 'experiment.orientation.phi_count=3', '--conditions', 'orientation']
        self.assertEqual(self.cli('dataset', *orientation), 0)
        self.assertEqual(self.cli('train'), 0)
        self.assertEqual(self.cli('generate', *orientation), 0)
        _, generated = read_csv(self.path('generate.csv'))
        self.assertEqual(len(generated), 3 * 2)
        self.assertEqual(sorted({float(row['phi_rad']) for row in generated}), [-np.pi / 2, 0.0, np.pi / 2])
        self.assertEqual({float(row['x_m']) for row in generated}, {0.5})

        # the diffraction curve over the same orientations
        self.assertEqual(self.cli('simulate', '--sweep', 'orientation', '--set', 'experiment.orientation.phi_count=3'), 0)
        _, simulated = read_csv(self.path('simulate.csv'))
        self.assertEqual([(r['phi_rad'], r['freq_hz']) for r in simulated],
                         [(r['phi_rad'], r['freq_hz']) for r in generated])

    def test_reproducible_outputs(self):
        """ same configuration and seed, other output directory: same data rows and model bytes """
        other = os.path.join(self.out, 'again')
        steps = self.Tests['reproducible']
        for command, extra, files in steps:
            for out in (self.out, other):
                args = [command, '--out', out]
                for assignment in SMALL:
                    args += ['--set', assignment]
                self.assertEqual(main(args + list(extra)), 0, command)
            for name in files:
                with open(self.path(name), 'rb') as a, open(os.path.join(other, name), 'rb') as b:
                    first, second = a.read(), b.read()
                # the config hash covers output.dir
                if name.endswith('.csv'):
                    first, second = first.split(b'\n', 1)[1], second.split(b'\n', 1)[1]
                elif name.endswith('.json'):
                    first, second = ({k: v for k, v in json.loads(blob).items() if k != 'config_hash'}
                                     for blob in (first, second))
                self.assertEqual(first, second, "{}: {}".format(command, name))

    @unittest.skipUnless(SLOW, "set RFSENSE_SLOW=1 for the generation-time benchmark")
    def test_bench_speedup(self):
        bench = ['--set', 'geometry.F=16', '--set', 'quadrature.abs_tol=1e-3',
                 '--set', 'experiment.grid.nx=15', '--set', 'experiment.grid.ny=5',
                 '--set', 'experiment.samples_per_condition=4', '--set', 'cvae.Z=16', '--set', 'cvae.epochs=5',
                 '--set', 'experiment.bench.n_em=2', '--set', 'experiment.bench.warmup=1']
        self.assertEqual(self.cli('dataset', *bench), 0)
        self.assertEqual(self.cli('train', *bench), 0)
        self.assertEqual(self.cli('bench', *bench), 0)
        with open(self.path('bench.json')) as infile:
            entries = json.load(infile)['entries']
        self.assertEqual(sorted(entries), sorted(['cvae Z=16'] + ['em {} tol={}'.format(a, t)
                                                                 for a in ('omnidirectional', 'directional')
                                                                 for t in ('1e-03', '1e-06')]))
        self.assertGreaterEqual(entries['cvae Z=16']['ratio_vs_em'], 10.0)
        self.assertGreaterEqual(entries['em directional tol=1e-06']['ratio_vs_em'], 100.0)

    """
    The following dict defines test sets for the command line tests.
    Each reproducible step is (subcommand, extra arguments, files to compare)
    and may use the files written by the steps before it.
    """
    Tests = dict(
        reproducible=[
            ('fresnel-map', [], ['fresnel_map.csv']),
            ('simulate', ['--sweep', 'grid'], ['simulate.csv']),
            ('dataset', [], ['dataset.rfs', 'dataset.rfs.json']),
            ('train', [], ['model.rfs', 'model.rfs.json', 'loss.csv']),
            ('train', ['--rss'], ['model_rss.rfs']),
            ('generate', [], ['generate.csv']),
            ('rss', [], ['rss_0.csv', 'rss_1.csv', 'rss_2.csv']),
            ('localize', [], ['localize.csv']),
            ('detect', ['--oracle', '--set', 'geometry.F=1', '--set', 'experiment.grid.nx=15',
                        '--set', 'experiment.grid.ny=3', '--set', 'experiment.d_T=[0.75]',
                        '--set', 'experiment.m_samples=1', '--set', 'experiment.trials=100'],
             ['detect.csv', 'detect.json']),
        ],
    )


if __name__ == "__main__":
    unittest.main()
