# -*- coding: utf-8 -*-

"""
Physics prior p(A | theta_k): target states are drawn around a nominal
condition and pushed through the diffraction model. Also builds the
(condition, profile) training sets for the generative surrogate.

Random streams: every consumer gets a numpy Generator. When work is split
over conditions, condition k uses the k-th child of ``rng.spawn(K)``, so the
records do not depend on execution order or on the number of workers.
"""

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import *
from .geometry import TargetState
from .diffraction import attenuation_profile

logger = logging.getLogger(__name__)

MAX_DRAWS = 100
HALF_PI = math.pi / 2


@dataclass(frozen=True)
class NominalCondition:

    """ nominal features theta_k around which the body state is uncertain """

    theta_k: TargetState

    @property
    def vector(self):
        return self.theta_k.as_vector()

    def __str__(self):
        return str(self.theta_k)


@dataclass(frozen=True)
class UncertaintyConfig:

    """
    p(theta | theta_k): uniform position box dx x dy around the nominal
    position, uniform orientation offset over phi_range around the nominal
    orientation, cut to [-pi/2, pi/2] (None keeps the nominal orientation),
    and an optional relative jitter on the sheet sizes
    """

    dx: float = 0.1
    dy: float = 0.1
    phi_range: tuple = (-math.pi / 2, math.pi / 2)
    size_jitter: float = 0.0

    def __post_init__(self):
        if self.dx < 0 or self.dy < 0:
            raise DomainError("uncertainty box sides must be >= 0")
        if self.phi_range is not None:
            lo, hi = (float(v) for v in self.phi_range)
            if lo > hi or lo < -math.pi / 2 - 1e-12 or hi > math.pi / 2 + 1e-12:
                raise DomainError("phi_range must be an ordered interval within [-pi/2, pi/2]")
            object.__setattr__(self, 'phi_range', (lo, hi))
        if not 0 <= self.size_jitter < 1:
            raise DomainError("size_jitter must lie in [0, 1)")

    @classmethod
    def none(cls):
        return cls(0.0, 0.0, None, 0.0)

    def to_dict(self):
        return dict(dx=self.dx, dy=self.dy,
                    phi_range=list(self.phi_range) if self.phi_range is not None else None,
                    size_jitter=self.size_jitter)


def default_condition_ranges(geom):
    """ physical ranges mapped to [-1, 1] for (x, y, phi, h_S, w_S1, w_S2) """
    return (
        (0.0, geom.d),
        (-3.0, 3.0),
        (-math.pi / 2, math.pi / 2),
        (1.5, 2.0),
        (0.2, 0.7),
        (0.2, 0.7),
    )


class Normalization:

    """
    affine maps for conditions (physical range -> [-1, 1]) and profiles
    (per-frequency mean/scale -> zero mean, unit scale)
    """

    def __init__(self, condition_low, condition_high, profile_mean, profile_scale):
        self.condition_low = np.asarray(condition_low, dtype=float)
        self.condition_high = np.asarray(condition_high, dtype=float)
        self.profile_mean = np.asarray(profile_mean, dtype=float)
        self.profile_scale = np.asarray(profile_scale, dtype=float)
        if np.any(self.condition_high <= self.condition_low):
            raise DataError("condition ranges must have high > low")
        if np.any(self.profile_scale <= 0):
            raise DataError("profile scales must be positive")

    @classmethod
    def from_records(cls, profiles, ranges):
        profiles = np.asarray(profiles, dtype=float)
        scale = profiles.std(axis=0)
        scale[scale < 1e-12] = 1.0
        low, high = zip(*ranges)
        return cls(low, high, profiles.mean(axis=0), scale)

    @property
    def F(self):
        return self.profile_mean.size

    def condition(self, conditions):
        c = np.asarray(conditions, dtype=float)
        return 2 * (c - self.condition_low) / (self.condition_high - self.condition_low) - 1

    def profile(self, profiles):
        return (np.asarray(profiles, dtype=float) - self.profile_mean) / self.profile_scale

    def denormalize_profile(self, normalized):
        return np.asarray(normalized, dtype=float) * self.profile_scale + self.profile_mean

    def to_dict(self):
        return dict(
            condition_low=self.condition_low.tolist(),
            condition_high=self.condition_high.tolist(),
            profile_mean=self.profile_mean.tolist(),
            profile_scale=self.profile_scale.tolist(),
        )

    @classmethod
    def from_dict(cls, data):
        return cls(data['condition_low'], data['condition_high'], data['profile_mean'], data['profile_scale'])

    def __eq__(self, other):
        return isinstance(other, Normalization) and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ('condition_low', 'condition_high', 'profile_mean', 'profile_scale'))


class TrainingSet:

    """ condition-major, sample-minor records of (theta_k vector, attenuation profile) """

    def __init__(self, conditions, profiles, normalization):
        self.conditions = np.asarray(conditions, dtype=float).reshape(-1, len(TargetState.FIELDS))
        self.profiles = np.asarray(profiles, dtype=float)
        if self.profiles.ndim != 2 or self.profiles.shape[0] != self.conditions.shape[0]:
            raise DataError("training set needs one profile per condition record")
        if normalization.F != self.F:
            raise DataError("normalization is for F={}, records have F={}".format(normalization.F, self.F))
        self.normalization = normalization

    @property
    def F(self):
        return self.profiles.shape[1]

    @property
    def records(self):
        return list(zip(self.conditions, self.profiles))

    def __len__(self):
        return self.conditions.shape[0]

    def normalized(self):
        """ (normalized profiles, normalized conditions) """
        return self.normalization.profile(self.profiles), self.normalization.condition(self.conditions)

    def __str__(self):
        return "{} records, F={}".format(len(self), self.F)


def sample_state(nominal, unc, rng, geom):
    """ draw theta ~ p(theta | theta_k), redrawing states that leave the open slab 0 < x < d """
    theta_k = nominal.theta_k
    for attempt in range(MAX_DRAWS):
        x = theta_k.x + unc.dx * (rng.random() - 0.5)
        y = theta_k.y + unc.dy * (rng.random() - 0.5)
        if unc.phi_range is None:
            phi = theta_k.phi
        else:
            # offsets around the nominal orientation, cut to [-pi/2, pi/2]
            lo = max(theta_k.phi + unc.phi_range[0], -HALF_PI)
            hi = min(theta_k.phi + unc.phi_range[1], HALF_PI)
            phi = min(lo + max(hi - lo, 0.0) * rng.random(), HALF_PI)
        sizes = (theta_k.h_S, theta_k.w_S1, theta_k.w_S2)
        if unc.size_jitter > 0:
            sizes = tuple(s * (1 + unc.size_jitter * (2 * rng.random() - 1)) for s in sizes)
        if not 0 < x < geom.d:
            continue
        if sizes[1] < sizes[2]:
            continue
        return TargetState(x, y, phi, *sizes)
    raise SamplingError("{} consecutive draws around {} left the link slab".format(MAX_DRAWS, nominal))


def sample_prior(nominal, unc, geom, quad, n, rng):
    """ n independent samples of the physics prior p(A | theta_k) """
    if n < 1:
        raise DomainError("sample count must be >= 1")
    return [attenuation_profile(geom, sample_state(nominal, unc, rng, geom), quad) for _ in range(n)]


def _sample_condition(args):
    nominal, unc, geom, quad, count, rng = args
    return np.array([p.values for p in sample_prior(nominal, unc, geom, quad, count, rng)])


def build_training_set(grid, unc, geom, quad, per_condition, rng, ranges=None, workers=1):
    """ per_condition prior samples for every grid condition, with normalization statistics """
    if not grid:
        raise DataError("training grid is empty")
    streams = rng.spawn(len(grid))
    jobs = [(nominal, unc, geom, quad, per_condition, stream) for nominal, stream in zip(grid, streams)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_sample_condition, jobs))
    else:
        blocks = []
        for k, job in enumerate(jobs):
            blocks.append(_sample_condition(job))
            logger.debug("condition {}/{} {}: mean {:.2f} dB".format(k + 1, len(jobs), job[0], blocks[-1].mean()))

    conditions = np.repeat(np.array([nominal.vector for nominal in grid]), per_condition, axis=0)
    profiles = np.concatenate(blocks, axis=0)
    normalization = Normalization.from_records(profiles, ranges or default_condition_ranges(geom))
    logger.info("training set: {} conditions x {} samples, F={}".format(len(grid), per_condition, geom.F))
    return TrainingSet(conditions, profiles, normalization)


def condition_grid(xs, ys, body, phi=0.0):
    """ nominal conditions over an x-major grid of positions with a fixed body """
    return [NominalCondition(replace(body, x=float(x), y=float(y), phi=phi)) for x in xs for y in ys]


def orientation_sweep(body, phis):
    """ nominal conditions for a body kept in place while its orientation changes """
    return [NominalCondition(replace(body, phi=float(phi))) for phi in phis]
