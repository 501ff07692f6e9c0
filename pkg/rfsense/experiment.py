# -*- coding: utf-8 -*-

"""
Experiment runner binding a resolved configuration to the physics, surrogate
and sensing layers. Each method produces the rows of one output table.
"""

import logging
import math
from dataclasses import replace

import numpy as np

from .errors import *
from .geometry import AntennaPattern, classify_region, path_lengths
from .diffraction import attenuation_profile
from .prior import build_training_set
from .cvae import train
from .channel import link_power, marginal_rss, synth_rss
from .localization import estimate_position, detection_experiment, OracleGenerator
from .bench import bench_generation

logger = logging.getLogger(__name__)


class Experiment:
    """ Experiment : runs of one configuration under one master seed """

    _Geometry = None            # these properties are built from
    _Quadrature = None          # the configuration when first accessed
    _Noise = None
    _Grid = None
    _P0 = None

    def __init__(self, config):
        self.config = config.validate()
        self.seed = config.seed
        self.settings = config['experiment']

    @property
    def Geometry(self):
        if not self._Geometry:
            self._Geometry = self.config.geometry()
        return self._Geometry

    @property
    def Quadrature(self):
        if not self._Quadrature:
            self._Quadrature = self.config.quadrature()
        return self._Quadrature

    @property
    def Noise(self):
        if not self._Noise:
            self._Noise = self.config.noise()
        return self._Noise

    @property
    def Grid(self):
        if not self._Grid:
            self._Grid = self.config.grid()
        return self._Grid

    @property
    def P0(self):
        if self._P0 is None:
            self._P0 = link_power(self.Geometry, self.config['geometry']['tx_power_dBm'])
        return self._P0

    def rng(self):
        return np.random.default_rng(self.seed)

    def _profile_rows(self, target):
        profile = attenuation_profile(self.Geometry, target, self.Quadrature)
        return [(target.x, target.y, target.phi, f, a) for f, a in zip(self.Geometry.freq_grid, profile.values)]

    def simulate(self, kind=None):
        """ (x_m, y_m, phi_rad, freq_hz, atten_db) for a LoS, orientation or grid sweep """
        kind = kind or self.settings['sweep']['kind']
        geom = self.Geometry
        step = self.settings['sweep']['step']
        if kind == 'los':
            xs = np.arange(step, geom.d - step / 2, step)
            targets = [self.config.body(float(x)) for x in xs]
        elif kind == 'orientation':
            targets = [c.theta_k for c in self.config.orientation()]
        elif kind == 'grid':
            targets = [c.theta_k for c in self.Grid.conditions]
        else:
            raise ConfigError("unknown sweep [{}]".format(kind))
        logger.info("{} sweep over {} target states".format(kind, len(targets)))
        rows = []
        for target in targets:
            rows.extend(self._profile_rows(target))
        return rows

    def build_dataset(self, workers=None, conditions=None):
        """ training set over the grid or the orientation conditions """
        kind = conditions or self.settings['conditions']
        return build_training_set(
            self.config.conditions(kind), self.config.uncertainty(kind), self.Geometry, self.Quadrature,
            int(self.settings['samples_per_condition']), self.rng(),
            workers=int(workers or self.settings['workers']))

    def train(self, dataset, beta=None):
        cfg = self.config.train_config()
        if beta is not None:
            cfg = replace(cfg, beta=float(beta))
        if dataset.F != self.Geometry.F:
            raise DataError("dataset has F={}, configuration has F={}".format(dataset.F, self.Geometry.F))
        model, history = train(dataset, cfg)
        logger.info("parameter counts: {}".format(model.parameter_counts))
        return model, history

    def generate(self, model, n=None, conditions=None):
        """ (x_m, y_m, phi_rad, freq_hz, mean_db, std_db) of generated profiles per grid or orientation condition """
        n = int(n or self.settings['generate_samples'])
        rng = self.rng()
        rows = []
        for condition in self.config.conditions(conditions):
            state = condition.theta_k
            samples = model.sample(state, n, rng)
            for f, mean, std in zip(self.Geometry.freq_grid, samples.mean(axis=0), samples.std(axis=0)):
                rows.append((state.x, state.y, state.phi, f, mean, std))
        return rows

    def rss(self, model):
        """ generated RSS distribution at each configured position, phi = 0 """
        if model.beta != self.settings['rss_beta']:
            logger.warning("RSS histograms use a model trained with beta={:g}, experiment.rss_beta is {:g}".format(
                model.beta, self.settings['rss_beta']))
        rng = self.rng()
        results = []
        for x, y in self.settings['rss_positions']:
            state = self.config.body(float(x)).moved(float(x), float(y))
            distribution = marginal_rss(model, state, self.Noise, self.P0, int(self.settings['rss_samples']),
                                        rng, self.settings['rss_bin_width'])
            logger.info("RSS at ({}, {}): mean {:.2f} dBm".format(x, y, distribution.mean))
            results.append((state, distribution))
        return results

    def localize(self, model, trials=None):
        """ (trial, true_x_m, true_y_m, est_x_m, est_y_m, error_m, score) for observations at random grid cells """
        trials = int(trials or self.settings['trials'])
        rows = []
        grid = self.Grid
        for t, trial_rng in enumerate(self.rng().spawn(trials)):
            k = int(trial_rng.integers(grid.K))
            truth = grid[k].theta_k
            observation = synth_rss(self.Geometry, truth, self.Noise, self.Quadrature, trial_rng,
                                    tx_power_dBm=self.config['geometry']['tx_power_dBm'], index=t)
            result = estimate_position(observation, grid, model, self.Noise, self.P0,
                                       int(self.settings['m_samples']), trial_rng)
            error = math.hypot(result.position[0] - truth.x, result.position[1] - truth.y)
            rows.append((t, truth.x, truth.y, result.position[0], result.position[1], error, result.score))
        logger.info("median localization error {:.3f} m over {} trials".format(
            float(np.median([r[5] for r in rows])), trials))
        return rows

    def detect(self, models):
        """ one DetectionReport per model; an empty list of models runs the diffraction oracle """
        models = models or [OracleGenerator(self.Geometry, self.Quadrature)]
        reports = []
        for model in models:
            reports.append(detection_experiment(
                self.Grid, model, self.Geometry, self.Noise, self.Quadrature, self.settings['d_T'],
                int(self.settings['trials']), self.rng(), m_samples=int(self.settings['m_samples']),
                freq=self.settings['region_freq'], tx_power_dBm=self.config['geometry']['tx_power_dBm']))
        return reports

    def bench(self, models):
        """ models: {Z: model}; EM variants at tolerances 1e-3 and 1e-6 with both antenna kinds """
        geom = self.Geometry
        directional = AntennaPattern.directional(self.config['geometry']['gain_exponent'],
                                                 self.config['geometry']['max_gain_dBi'])
        variants = {}
        for antenna, g in (('omnidirectional', geom.with_patterns(AntennaPattern.omnidirectional(), AntennaPattern.omnidirectional())),
                           ('directional', geom.with_patterns(directional, directional))):
            for tol in (1e-3, 1e-6):
                variants['em {} tol={:.0e}'.format(antenna, tol)] = (g, replace(self.Quadrature, abs_tol=tol))
        labelled = {'cvae Z={}'.format(Z): model for Z, model in sorted(models.items())}
        b = self.settings['bench']
        conditions = [c.theta_k for c in self.Grid.conditions]
        return bench_generation(labelled, conditions, variants, int(b['n_cvae']), int(b['n_em']),
                                int(b['warmup']), self.rng())

    def fresnel_map(self):
        """ (x_m, y_m, excess_path_m, d_T_m, label) per grid cell and d_T """
        geom = self.Geometry
        freq = self.settings['region_freq']
        rows = []
        for condition in self.Grid.conditions:
            x, y = condition.theta_k.position
            r1, r2 = path_lengths(geom, (x, y, 0.0))
            for d_T in self.settings['d_T']:
                rows.append((x, y, r1 + r2 - geom.d, d_T, str(classify_region(geom, freq, (x, y), d_T))))
        return rows
