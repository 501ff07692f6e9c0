# -*- coding: utf-8 -*-

"""
MAP localization with a generative attenuation prior. For every candidate
condition the generator draws m profiles; the body effects at that candidate
are the draw that best explains the observation, and the position estimate
is the candidate with the highest such score.

A generator is any object with ``sample(condition, n, rng) -> (n, F) array``
(a trained CvaeModel, or an oracle standing in for one).
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import *
from .geometry import TargetState, RegionLabel, classify_region
from .diffraction import AttenuationProfile, attenuation_profile
from .channel import likelihood, link_power, synth_rss
from .prior import NominalCondition

logger = logging.getLogger(__name__)

REGION_FREQUENCY = 2.45e9
MIN_TRIALS = 100


@dataclass(frozen=True)
class CandidateGrid:

    """ K >= 2 nominal conditions, indexed in order, with the spacing they were laid out at """

    conditions: tuple
    spacing: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, 'conditions', tuple(self.conditions))
        if len(self.conditions) < 2:
            raise DomainError("candidate grid needs at least 2 conditions")

    @classmethod
    def regular(cls, geom, nx=15, ny=5, spacing=0.25, body=None):
        """ nx x ny positions, x-major, centered on the LoS midpoint """
        body = body or TargetState(geom.d / 2)
        xs = geom.d / 2 + spacing * (np.arange(nx) - (nx - 1) / 2)
        ys = spacing * (np.arange(ny) - (ny - 1) / 2)
        if xs[0] <= 0 or xs[-1] >= geom.d:
            raise DomainError("grid of {} x {} at {} m spacing does not fit in the link".format(nx, ny, spacing))
        return cls([NominalCondition(replace(body, x=float(x), y=float(y), phi=0.0)) for x in xs for y in ys], spacing)

    @property
    def K(self):
        return len(self.conditions)

    def __len__(self):
        return len(self.conditions)

    def __getitem__(self, k):
        return self.conditions[k]

    @property
    def positions(self):
        return np.array([c.theta_k.position for c in self.conditions])

    def labels(self, geom, d_T, freq=REGION_FREQUENCY):
        return [classify_region(geom, freq, c.theta_k.position, d_T) for c in self.conditions]


@dataclass
class MapScore:

    score: float
    profile: AttenuationProfile


@dataclass
class MapResult:

    """ per-candidate scores and best profiles, the argmax index and its position """

    scores: np.ndarray
    profiles: list
    index: int
    position: tuple

    @property
    def score(self):
        return float(self.scores[self.index])


def map_effects(observation, condition, model, noise, P0, m_samples, rng):
    """ sample-max of the likelihood over m generator draws at one condition """
    if m_samples < 1:
        raise DomainError("m_samples must be >= 1")
    state = condition.theta_k if isinstance(condition, NominalCondition) else condition
    draws = model.sample(state, m_samples, rng)
    scores = likelihood(observation, draws, noise, P0)
    best = int(np.argmax(scores))
    return MapScore(float(scores[best]), AttenuationProfile(draws[best], condition=state))


def estimate_position(observation, grid, model, noise, P0, m_samples, rng):
    """
    MAP candidate; all candidates are scored with the same generator draws
    (one seed per call), ties go to the lowest index
    """
    seed = int(rng.integers(2 ** 63))
    results = [map_effects(observation, c, model, noise, P0, m_samples, np.random.default_rng(seed))
               for c in grid.conditions]
    scores = np.array([r.score for r in results])
    index = int(np.argmax(scores))
    return MapResult(scores, [r.profile for r in results], index, grid[index].theta_k.position)


@dataclass
class DetectionRow:

    d_T: float
    p_L1: float
    trials: int
    hits: int


@dataclass
class DetectionReport:

    """ p_L0 (truth and estimate outside the Fresnel ellipsoid) and p_L1 per d_T """

    Z: int
    beta: float
    p_L0: float
    trials_L0: int
    hits_L0: int
    rows: list = field(default_factory=list)

    def csv_rows(self):
        """ (Z, beta, d_T_m, p_L0, p_L1, trials) per d_T """
        return [(self.Z, self.beta, r.d_T, self.p_L0, r.p_L1, r.trials) for r in self.rows]

    def to_dict(self):
        return dict(Z=self.Z, beta=self.beta, p_L0=self.p_L0, trials_L0=self.trials_L0, hits_L0=self.hits_L0,
                    rows=[dict(d_T=r.d_T, p_L1=r.p_L1, trials=r.trials, hits=r.hits) for r in self.rows])


class _Truth:

    """ diffraction profiles of the grid cells, computed on first use """

    def __init__(self, grid, geom, quad):
        self.grid, self.geom, self.quad = grid, geom, quad
        self.profiles = {}

    def __getitem__(self, k):
        if k not in self.profiles:
            self.profiles[k] = attenuation_profile(self.geom, self.grid[k].theta_k, self.quad)
        return self.profiles[k]


def _run_class(cells, is_hit, grid, truth, model, geom, noise, quad, P0, trials, m_samples, rng, name):
    hits = 0
    for t, trial_rng in enumerate(rng.spawn(trials)):
        k = int(cells[trial_rng.integers(len(cells))])
        state = grid[k].theta_k
        observation = synth_rss(geom, state, noise, quad, trial_rng, profile=truth[k], index=t)
        result = estimate_position(observation, grid, model, noise, P0, m_samples, trial_rng)
        hits += bool(is_hit(result.index))
        logger.debug("{} trial {}: truth {} -> estimate {}".format(name, t, k, result.index))
    return hits


def detection_experiment(grid, model, geom, noise, quad, d_T_list, trials, rng, Z=None, beta=None,
                         m_samples=256, freq=REGION_FREQUENCY, tx_power_dBm=0.0):
    """
    Fresnel-region detection rates. True positions are drawn uniformly from
    the grid cells of a region and observed through the diffraction model;
    an estimate counts when its cell falls in the same region.
    """
    if trials < MIN_TRIALS:
        raise DomainError("detection needs >= {} trials per class, got {}".format(MIN_TRIALS, trials))
    d_T_list = [float(d) for d in d_T_list]
    if not d_T_list:
        raise DataError("no d_T values given")

    labels = {d_T: grid.labels(geom, d_T, freq) for d_T in d_T_list}
    first = labels[d_T_list[0]]
    outside = np.array([k for k, label in enumerate(first) if label.kind == RegionLabel.L0])
    inside = {d_T: np.array([k for k, label in enumerate(labels[d_T]) if label.kind == RegionLabel.L1])
              for d_T in d_T_list}
    empty = [d_T for d_T in d_T_list if inside[d_T].size == 0]
    if outside.size == 0:
        raise DataError("no grid cell lies outside the Fresnel ellipsoid (d_T {})".format(d_T_list))
    if empty:
        raise DataError("no grid cell lies in L1 for d_T {}".format(empty))

    Z = Z if Z is not None else getattr(model, 'Z', None)
    beta = beta if beta is not None else getattr(model, 'beta', None)
    P0 = link_power(geom, tx_power_dBm)
    truth = _Truth(grid, geom, quad)
    streams = rng.spawn(1 + len(d_T_list))

    outside_set = set(outside.tolist())
    hits_L0 = _run_class(outside, lambda k: k in outside_set, grid, truth, model, geom, noise, quad, P0,
                         trials, m_samples, streams[0], 'L0')
    report = DetectionReport(Z, beta, hits_L0 / trials, trials, hits_L0)
    logger.info("p_L0 = {:.3f} ({}/{})".format(report.p_L0, hits_L0, trials))

    for d_T, stream in zip(d_T_list, streams[1:]):
        inside_set = set(inside[d_T].tolist())
        hits = _run_class(inside[d_T], lambda k: k in inside_set, grid, truth, model, geom, noise, quad, P0,
                          trials, m_samples, stream, 'L1({:g})'.format(d_T))
        report.rows.append(DetectionRow(d_T, hits / trials, trials, hits))
        logger.info("p_L1(d_T={:g}) = {:.3f} ({}/{})".format(d_T, hits / trials, hits, trials))
    return report


class OracleGenerator:

    """
    generator stand-in returning the diffraction profile of the queried
    condition; useful as a noiseless reference for the detection rates
    """

    Z = None
    beta = None

    def __init__(self, geom, quad):
        self.geom, self.quad = geom, quad
        self.cache = {}

    def sample(self, condition, n, rng):
        state = condition.theta_k if isinstance(condition, NominalCondition) else condition
        if state not in self.cache:
            self.cache[state] = attenuation_profile(self.geom, state, self.quad).values
        return np.tile(self.cache[state], (n, 1))
