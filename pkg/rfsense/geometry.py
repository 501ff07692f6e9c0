# -*- coding: utf-8 -*-

"""
Link and target geometry shared by the EM body model and the sensing layer.

Link frame: origin at the TX antenna, xi1 along the LoS toward the RX, xi2
horizontal-transverse, xi3 vertical (up); the floor lies at xi3 = -h.
"""

import math
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import *

logger = logging.getLogger(__name__)


def wavelength(freq):
    """ c/f for a scalar or array of frequencies in Hz """
    f = np.asarray(freq, dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise DomainError("frequency must be positive, got [{}]".format(freq))
    lam = SPEED_OF_LIGHT / f
    return float(lam) if lam.ndim == 0 else lam


def frequency_band(f_low, f_high, count):
    """ evenly spaced frequency grid, both band edges included """
    if count < 1:
        raise DomainError("frequency grid needs at least one point")
    if count == 1:
        return (float(f_low),)
    return tuple(float(f) for f in np.linspace(f_low, f_high, count))


@dataclass(frozen=True)
class AntennaPattern:

    """
    relative field gain of an antenna; directional patterns follow cos^n of
    the angle off boresight and are zero behind the antenna
    """

    kind: str = 'omnidirectional'
    gain_exponent: float = 0.0
    max_gain_dBi: float = 0.0

    KINDS = ('omnidirectional', 'directional')

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError("unknown antenna pattern [{}]".format(self.kind))
        if self.gain_exponent < 0:
            raise DomainError("gain exponent must be >= 0")

    @classmethod
    def omnidirectional(cls, max_gain_dBi=0.0):
        return cls('omnidirectional', 0.0, max_gain_dBi)

    @classmethod
    def directional(cls, gain_exponent, max_gain_dBi=0.0):
        return cls('directional', float(gain_exponent), max_gain_dBi)

    @property
    def is_directional(self):
        return self.kind == 'directional'

    def field_gain(self, cos_alpha):
        """ relative field gain in (0,1] for directions given by the cosine to boresight """
        if not self.is_directional:
            return np.ones_like(np.asarray(cos_alpha, dtype=float))
        cos_alpha = np.asarray(cos_alpha, dtype=float)
        return np.where(cos_alpha > 0, np.clip(cos_alpha, 0.0, 1.0) ** self.gain_exponent, 0.0)

    def to_dict(self):
        return dict(kind=self.kind, gain_exponent=self.gain_exponent, max_gain_dBi=self.max_gain_dBi)


@dataclass(frozen=True)
class LinkGeometry:

    """ TX/RX placement: link length d, LoS height h, frequency grid and antennas """

    d: float = 4.0
    h: float = 0.99
    freq_grid: tuple = (2.45e9,)
    tx_pattern: AntennaPattern = field(default_factory=AntennaPattern.omnidirectional)
    rx_pattern: AntennaPattern = field(default_factory=AntennaPattern.omnidirectional)

    def __post_init__(self):
        if not self.d > 0:
            raise DomainError("link length d must be positive, got [{}]".format(self.d))
        if not self.h > 0:
            raise DomainError("link height h must be positive, got [{}]".format(self.h))
        grid = tuple(float(f) for f in self.freq_grid)
        if len(grid) < 1:
            raise DomainError("frequency grid is empty")
        if any(f <= 0 for f in grid):
            raise DomainError("frequencies must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("frequency grid must be strictly increasing")
        object.__setattr__(self, 'freq_grid', grid)

    @property
    def F(self):
        return len(self.freq_grid)

    @property
    def frequencies(self):
        return np.asarray(self.freq_grid)

    @property
    def wavelengths(self):
        return wavelength(self.frequencies)

    @property
    def directional(self):
        return self.tx_pattern.is_directional or self.rx_pattern.is_directional

    def with_freq_grid(self, freq_grid):
        return replace(self, freq_grid=tuple(freq_grid))

    def with_patterns(self, tx_pattern, rx_pattern):
        return replace(self, tx_pattern=tx_pattern, rx_pattern=rx_pattern)


@dataclass(frozen=True)
class TargetState:

    """
    absorbing-sheet body state: barycenter (x, y) in the LoS plane, rotation
    phi w.r.t. the LoS, sheet height and max/min traversal sizes
    """

    x: float
    y: float = 0.0
    phi: float = 0.0
    h_S: float = 1.80
    w_S1: float = 0.55
    w_S2: float = 0.25

    FIELDS = ('x', 'y', 'phi', 'h_S', 'w_S1', 'w_S2')

    def __post_init__(self):
        if not self.h_S > 0:
            raise DomainError("sheet height must be positive, got [{}]".format(self.h_S))
        if not (self.w_S1 >= self.w_S2 > 0):
            raise DomainError("traversal sizes must satisfy w_S1 >= w_S2 > 0, got [{}, {}]".format(self.w_S1, self.w_S2))
        if abs(self.phi) > math.pi / 2 + 1e-12:
            raise DomainError("orientation must lie in [-pi/2, pi/2], got [{}]".format(self.phi))

    @property
    def position(self):
        return (self.x, self.y)

    def in_link(self, geom):
        return 0 < self.x < geom.d

    def as_vector(self):
        return np.array([getattr(self, name) for name in self.FIELDS], dtype=float)

    @classmethod
    def from_vector(cls, vector):
        return cls(*(float(v) for v in vector))

    def moved(self, x, y):
        return replace(self, x=x, y=y)

    def __str__(self):
        return "({:.3f}, {:.3f}) phi={:.3f} sheet {:.2f}/{:.2f}/{:.2f}".format(*self.as_vector())


@dataclass(frozen=True)
class RegionLabel:

    """ Fresnel-region class of a grid position: L0, L1(d_T) or unassigned """

    kind: str
    d_T: float = None

    L0 = 'L0'
    L1 = 'L1'
    UNASSIGNED = 'unassigned'

    def __str__(self):
        if self.kind == self.L1:
            return "L1({:g})".format(self.d_T)
        return self.kind


def path_lengths(geom, point):
    """ distances (r1, r2) of a link-frame point (or array of points, last axis 3) from TX and RX """
    p = np.asarray(point, dtype=float)
    transverse = p[..., 1] ** 2 + p[..., 2] ** 2
    r1 = np.sqrt(p[..., 0] ** 2 + transverse)
    r2 = np.sqrt((geom.d - p[..., 0]) ** 2 + transverse)
    if r1.ndim == 0:
        return float(r1), float(r2)
    return r1, r2


def in_first_fresnel(geom, freq, p):
    """ True iff the horizontal projection p = (x, y) lies strictly inside the first Fresnel ellipsoid """
    r1, r2 = path_lengths(geom, (p[0], p[1], 0.0))
    return r1 + r2 < geom.d + wavelength(freq) / 2


def classify_region(geom, freq, p, d_T):
    """ L1(d_T) inside the ellipsoid within d_T of an antenna, L0 outside, unassigned otherwise """
    if not (0 < d_T < geom.d):
        raise DomainError("d_T must lie in (0, d), got [{}]".format(d_T))
    if not in_first_fresnel(geom, freq, p):
        return RegionLabel(RegionLabel.L0)
    r1, r2 = path_lengths(geom, (p[0], p[1], 0.0))
    if min(r1, r2) <= d_T:
        return RegionLabel(RegionLabel.L1, d_T)
    return RegionLabel(RegionLabel.UNASSIGNED)


def fresnel_radius(geom, freq, x):
    """ radius of the first Fresnel zone at distance x from TX along the LoS """
    if not (0 < x < geom.d):
        raise DomainError("x must lie inside the link, got [{}]".format(x))
    return math.sqrt(wavelength(freq) * x * (geom.d - x) / geom.d)


def fresnel_parameter(geom, freq, x, clearance):
    """ knife-edge parameter v of an edge at height `clearance` above the LoS, x from TX """
    if not (0 < x < geom.d):
        raise DomainError("x must lie inside the link, got [{}]".format(x))
    return clearance * math.sqrt(2 * geom.d / (wavelength(freq) * x * (geom.d - x)))
