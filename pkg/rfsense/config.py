# -*- coding: utf-8 -*-

"""
Experiment configuration: one JSON document with the blocks geometry,
uncertainty, quadrature, noise, cvae, experiment and output. Missing keys
take the defaults of the reference measurement setup at desk scale (F=16).
"""

import copy
import hashlib
import json
import logging
import math

import numpy as np

from .errors import *
from .csv import flat_to_nested, nested_update
from .geometry import AntennaPattern, LinkGeometry, TargetState, frequency_band
from .diffraction import QuadratureConfig
from .prior import UncertaintyConfig, orientation_sweep
from .channel import NoiseModel
from .cvae import TrainConfig
from .localization import CandidateGrid

logger = logging.getLogger(__name__)

DEFAULTS = {
    'geometry': {
        'd': 4.0,
        'h': 0.99,
        'f_low': 2.4e9,
        'f_high': 2.5e9,
        'F': 16,
        'antenna': 'omnidirectional',
        'gain_exponent': 2.0,
        'max_gain_dBi': 0.0,
        'tx_power_dBm': 0.0,
    },
    'uncertainty': {
        'dx': 0.1,
        'dy': 0.1,
        'phi_range': [-math.pi / 2, math.pi / 2],
        'size_jitter': 0.0,
    },
    'quadrature': {
        'abs_tol': 1e-3,
        'max_depth': 12,
        'init_tiles': [4, 4],
        'rule_order': 3,
    },
    'noise': {
        'sigma0': 1.0,
        'mu_T': 2.0,
        'sigma_T': 2.0,
    },
    'cvae': {
        'Z': 16,
        'beta': 0.05,
        'epochs': 200,
        'batch_size': 64,
        'learning_rate': 1e-3,
        'patience': 20,
        'recon_sigma': 0.1,
        'activation': 'relu',
    },
    'experiment': {
        'seed': 0,
        'body': {'h_S': 1.80, 'w_S1': 0.55, 'w_S2': 0.25},
        'grid': {'nx': 15, 'ny': 5, 'spacing': 0.25},
        'samples_per_condition': 200,
        'workers': 1,
        'sweep': {'kind': 'los', 'step': 0.25},
        'conditions': 'grid',
        'orientation': {'x': 0.5, 'y': 0.0, 'phi_count': 13, 'phi_range': [0.0, 0.0]},
        'generate_samples': 100,
        'rss_positions': [[0.25, 0.0], [1.0, 0.0], [2.0, 0.0]],
        'rss_samples': 10000,
        'rss_bin_width': 0.5,
        'rss_beta': 1.0,
        'd_T': [0.75, 1.0, 1.25],
        'trials': 200,
        'm_samples': 256,
        'region_freq': 2.45e9,
        'bench': {'n_cvae': 1000, 'n_em': 10, 'warmup': 10},
    },
    'output': {
        'dir': 'out',
        'dataset': 'dataset.rfs',
        'model': 'model.rfs',
        'rss_model': 'model_rss.rfs',
    },
}


def _unknown_keys(defaults, data, prefix=''):
    for key, value in data.items():
        path = prefix + key
        if key not in defaults:
            yield path
        elif isinstance(defaults[key], dict) and isinstance(value, dict):
            yield from _unknown_keys(defaults[key], value, path + '.')


class ExperimentConfig:

    """ resolved configuration; block objects are built on demand from the merged document """

    def __init__(self, data=None):
        self.data = nested_update(copy.deepcopy(DEFAULTS), data or {})
        unknown = list(_unknown_keys(DEFAULTS, self.data))
        if unknown:
            raise ConfigError("unknown configuration key(s): {}".format(", ".join(unknown)))

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, encoding='utf-8') as infile:
                data = json.load(infile)
        except OSError as e:
            raise ConfigError("cannot read config {}: {}".format(path, e.strerror))
        except ValueError as e:
            raise ConfigError("config {} is not valid JSON: {}".format(path, e))
        if not isinstance(data, dict):
            raise ConfigError("config {} must hold a JSON object".format(path))
        return cls(data)

    def with_overrides(self, assignments):
        """ apply ["block.key=value", ...] given on the command line """
        flat = {}
        for assignment in assignments or []:
            key, sep, value = assignment.partition('=')
            if not sep or not key.strip():
                raise ConfigError("override [{}] is not of the form block.key=value".format(assignment))
            flat[key.strip()] = value
        return ExperimentConfig(nested_update(self.data, flat_to_nested(flat)))

    def __getitem__(self, block):
        return self.data[block]

    @property
    def seed(self):
        return int(self.data['experiment']['seed'])

    @property
    def hash(self):
        canonical = json.dumps(self.data, sort_keys=True, separators=(',', ':'))
        return hashlib.md5(canonical.encode('utf-8')).hexdigest()

    def dumps(self):
        return json.dumps(self.data, sort_keys=True, indent=2)

    def _build(self, block, factory):
        try:
            return factory(self.data[block])
        except ConfigError:
            raise
        except (DomainError, TypeError, ValueError, KeyError) as e:
            raise ConfigError("[{}] {}".format(block, e))

    def geometry(self):
        def build(g):
            if g['antenna'] == 'directional':
                pattern = AntennaPattern.directional(g['gain_exponent'], g['max_gain_dBi'])
            elif g['antenna'] == 'omnidirectional':
                pattern = AntennaPattern.omnidirectional(g['max_gain_dBi'])
            else:
                raise ConfigError("[geometry] antenna must be omnidirectional or directional, got [{}]".format(g['antenna']))
            if g['f_high'] < g['f_low']:
                raise ConfigError("[geometry] f_high below f_low")
            return LinkGeometry(g['d'], g['h'], frequency_band(g['f_low'], g['f_high'], int(g['F'])), pattern, pattern)
        return self._build('geometry', build)

    def body(self, x=None):
        """ nominal body with the configured sheet sizes, at the link midpoint unless x is given """
        geom = self.geometry()
        b = self.data['experiment']['body']
        return self._build('experiment', lambda e: TargetState(geom.d / 2 if x is None else x, 0.0, 0.0,
                                                               b['h_S'], b['w_S1'], b['w_S2']))

    def uncertainty(self, conditions='grid'):
        """ p(theta | theta_k); the orientation condition set brings its own phi offsets """
        def build(u):
            phi_range = u['phi_range']
            if conditions == 'orientation':
                phi_range = self.data['experiment']['orientation']['phi_range']
            return UncertaintyConfig(u['dx'], u['dy'], tuple(phi_range) if phi_range is not None else None,
                                     u['size_jitter'])
        return self._build('uncertainty', build)

    def quadrature(self):
        return self._build('quadrature', lambda q: QuadratureConfig(
            q['abs_tol'], int(q['max_depth']), tuple(q['init_tiles']), int(q['rule_order'])))

    def noise(self):
        return self._build('noise', lambda n: NoiseModel(n['sigma0'], n['mu_T'], n['sigma_T']))

    def train_config(self):
        def build(c):
            if c['activation'] not in ('relu', 'tanh'):
                raise ConfigError("[cvae] activation must be relu or tanh")
            return TrainConfig(int(c['epochs']), int(c['batch_size']), c['learning_rate'], self.seed, c['beta'],
                               int(c['Z']), int(c['patience']), c['recon_sigma'], c['activation'])
        return self._build('cvae', build)

    def grid(self):
        geom = self.geometry()
        body = self.body()
        return self._build('experiment', lambda e: CandidateGrid.regular(
            geom, int(e['grid']['nx']), int(e['grid']['ny']), e['grid']['spacing'], body))

    def orientation(self):
        """ nominal body held at experiment.orientation.(x, y) while phi sweeps [-pi/2, pi/2] """
        body = self.body()

        def build(e):
            o = e['orientation']
            phis = np.linspace(-math.pi / 2, math.pi / 2, int(o['phi_count']))
            return orientation_sweep(body.moved(float(o['x']), float(o['y'])), phis)
        return self._build('experiment', build)

    def conditions(self, kind=None):
        """ nominal conditions walked by dataset and generate: the grid or the orientation sweep """
        kind = kind or self.data['experiment']['conditions']
        if kind == 'grid':
            return list(self.grid().conditions)
        if kind == 'orientation':
            return self.orientation()
        raise ConfigError("[experiment] conditions must be grid or orientation, got [{}]".format(kind))

    def validate(self):
        """ build every block once; raises ConfigError naming the block """
        self.geometry()
        self.body()
        self.uncertainty()
        self.uncertainty('orientation')
        self.quadrature()
        self.noise()
        self.train_config()
        self.grid()
        self.orientation()
        e = self.data['experiment']
        geom = self.geometry()
        checks = [
            (int(e['samples_per_condition']) >= 1, "samples_per_condition must be >= 1"),
            (int(e['workers']) >= 1, "workers must be >= 1"),
            (int(e['trials']) >= 1, "trials must be >= 1"),
            (int(e['m_samples']) >= 1, "m_samples must be >= 1"),
            (int(e['rss_samples']) >= 1, "rss_samples must be >= 1"),
            (e['rss_bin_width'] > 0, "rss_bin_width must be positive"),
            (e['rss_beta'] >= 0, "rss_beta must be >= 0"),
            (e['region_freq'] > 0, "region_freq must be positive"),
            (len(e['d_T']) >= 1 and all(0 < d < geom.d for d in e['d_T']), "d_T values must lie in (0, d)"),
            (e['sweep']['kind'] in ('los', 'orientation', 'grid'), "sweep.kind must be los, orientation or grid"),
            (e['sweep']['step'] > 0, "sweep.step must be positive"),
            (e['conditions'] in ('grid', 'orientation'), "conditions must be grid or orientation"),
            (int(e['orientation']['phi_count']) >= 1, "orientation.phi_count must be >= 1"),
            (0 < e['orientation']['x'] < geom.d, "orientation.x must lie inside the link"),
            (all(0 < p[0] < geom.d for p in e['rss_positions']), "rss_positions must lie inside the link"),
            (int(e['bench']['warmup']) >= 0, "bench.warmup must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError("[experiment] {}".format(message))
        return self
