# -*- coding: utf-8 -*-

"""
RSS measurement model: free-space power from the link budget, body-induced
excess attenuation and Gaussian fading,

    S = P0 + w0                  w0 ~ N(0, sigma0^2)      (free space)
    S = P0 - A + wT              wT ~ N(mu_T, sigma_T^2)  (target present)

drawn independently per frequency.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import *
from .geometry import wavelength
from .diffraction import AttenuationProfile, attenuation_profile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseModel:

    """ fading terms in dB; sigma_T^2 = sigma0^2 + the target-induced extra variance """

    sigma0: float = 1.0
    mu_T: float = 2.0
    sigma_T: float = 2.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise DomainError("sigma0 must be positive")
        if self.sigma_T < self.sigma0:
            raise DomainError("sigma_T must be >= sigma0, got {} < {}".format(self.sigma_T, self.sigma0))

    @property
    def extra_variance(self):
        return self.sigma_T ** 2 - self.sigma0 ** 2

    def to_dict(self):
        return dict(sigma0=self.sigma0, mu_T=self.mu_T, sigma_T=self.sigma_T)


class RssObservation:

    """ received power per frequency (dBm); truth is the target state for synthetic data, None for free space """

    def __init__(self, values, index=0, truth=None):
        self.values = np.array(values, dtype=float).reshape(-1)
        self.index = index
        self.truth = truth
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("RSS observation has non-finite entries")

    @property
    def F(self):
        return self.values.size

    @property
    def is_free_space(self):
        return self.truth is None

    def __str__(self):
        return "S[{}] = {:.2f} dBm (band mean), {}".format(
            self.index, self.values.mean(), "free space" if self.is_free_space else "target at {}".format(self.truth))


def free_space_power(geom, freq, tx_power_dBm=0.0, tx_gain_dBi=None, rx_gain_dBi=None):
    """ Friis: P0 = P_tx + G_tx + G_rx + 20 log10(lambda / (4 pi d)); gains default to the antenna patterns """
    if tx_gain_dBi is None:
        tx_gain_dBi = geom.tx_pattern.max_gain_dBi
    if rx_gain_dBi is None:
        rx_gain_dBi = geom.rx_pattern.max_gain_dBi
    lam = wavelength(freq)
    return tx_power_dBm + tx_gain_dBi + rx_gain_dBi + 20 * np.log10(np.asarray(lam) / (4 * math.pi * geom.d))


def link_power(geom, tx_power_dBm=0.0):
    """ P0 over the geometry's frequency grid """
    return np.atleast_1d(free_space_power(geom, geom.frequencies, tx_power_dBm))


def _values(profile):
    if isinstance(profile, AttenuationProfile):
        return profile.values
    return np.asarray(profile, dtype=float)


def synth_rss(geom, target, noise, quad, rng, profile=None, tx_power_dBm=0.0, index=0):
    """
    one synthetic observation; target None draws the free-space branch.
    A precomputed attenuation profile for the target may be passed to skip
    the diffraction integral.
    """
    P0 = link_power(geom, tx_power_dBm)
    if target is None:
        return RssObservation(P0 + noise.sigma0 * rng.standard_normal(geom.F), index)
    A = _values(profile) if profile is not None else attenuation_profile(geom, target, quad).values
    if A.size != geom.F:
        raise ShapeError("attenuation profile has {} entries for F={}".format(A.size, geom.F))
    return RssObservation(P0 - A + noise.mu_T + noise.sigma_T * rng.standard_normal(geom.F), index, target)


def likelihood(observation, profile, noise, P0):
    """
    log p(S | A) = sum over frequencies of log N(S_f; P0_f - A_f + mu_T, sigma_T^2);
    profile may be a single profile or an (m, F) array, giving m values
    """
    S = observation.values if isinstance(observation, RssObservation) else np.asarray(observation, dtype=float)
    A = _values(profile)
    P0 = np.broadcast_to(np.asarray(P0, dtype=float), S.shape)
    if A.shape[-1] != S.size:
        raise ShapeError("profile length {} does not match observation F={}".format(A.shape[-1], S.size))
    return np.sum(norm.logpdf(S, loc=P0 - A + noise.mu_T, scale=noise.sigma_T), axis=-1)


@dataclass
class RssHistogram:

    """ probability mass over consecutive bins [low, high) in dBm """

    low: np.ndarray
    high: np.ndarray
    mass: np.ndarray

    @property
    def total(self):
        return float(self.mass.sum())

    def rows(self):
        return list(zip(self.low.tolist(), self.high.tolist(), self.mass.tolist()))


def histogram(samples, bin_width=0.5):
    """ mass function of all sample values on a grid of bins aligned to multiples of bin_width """
    values = np.asarray(samples, dtype=float).reshape(-1)
    if values.size == 0:
        raise DataError("cannot bin an empty sample set")
    k_lo = math.floor(values.min() / bin_width)
    k_hi = math.floor(values.max() / bin_width)
    edges = bin_width * np.arange(k_lo, k_hi + 2, dtype=float)
    # rounding of k * bin_width must not push an extreme sample out of range
    edges[0] = min(edges[0], values.min())
    edges[-1] = max(edges[-1], values.max())
    counts, _ = np.histogram(values, bins=edges)
    return RssHistogram(edges[:-1], edges[1:], counts / values.size)


@dataclass
class RssDistribution:

    samples: np.ndarray
    histogram: RssHistogram

    @property
    def mean(self):
        return float(self.samples.mean())


def marginal_rss(model, condition, noise, P0, n, rng, bin_width=0.5):
    """
    Monte Carlo marginal of S over generated attenuation: A ~ generator(condition),
    then S ~ p(S | A); the histogram pools all frequencies
    """
    if n < 1:
        raise DomainError("sample count must be >= 1")
    A = model.sample(condition, n, rng)
    P0 = np.broadcast_to(np.asarray(P0, dtype=float), A.shape[1:])
    S = P0 - A + noise.mu_T + noise.sigma_T * rng.standard_normal(A.shape)
    return RssDistribution(S, histogram(S, bin_width))
