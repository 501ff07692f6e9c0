# -*- coding: utf-8 -*-

"""
Scalar-diffraction body model: the human body is a perfectly absorbing
rectangular sheet transverse to the LoS, and the field at the RX is the
free-space field minus the contribution of the Huygens' sources obstructed by
the sheet:

    E/E0 = 1 - j (d/lambda) * integral over S of exp(-j k (r1 + r2 - d)) / (r1 r2)

The integral is computed by adaptive tile subdivision. Each tile is integrated
with a tensor Gauss-Legendre rule and compared against the same rule applied
on its 2x2 refinement; a tile is accepted when the difference is within its
area share of the absolute tolerance.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import fresnel

from .errors import *
from .geometry import wavelength

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureConfig:

    """
    adaptive quadrature settings; rule_order=1 gives the plain midpoint vs
    2x2-midpoint pair, higher orders use Gauss-Legendre nodes per tile
    """

    abs_tol: float = 1e-3
    max_depth: int = 12
    init_tiles: tuple = (4, 4)
    rule_order: int = 3
    chunk_size: int = 1 << 20

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.max_depth < 1:
            raise DomainError("max_depth must be at least 1")
        tiles = tuple(int(t) for t in self.init_tiles)
        if len(tiles) != 2 or min(tiles) < 1:
            raise DomainError("init_tiles must be n x m with n, m >= 1, got [{}]".format(self.init_tiles))
        object.__setattr__(self, 'init_tiles', tiles)
        if self.rule_order < 1:
            raise DomainError("rule_order must be at least 1")

    def to_dict(self):
        return dict(abs_tol=self.abs_tol, max_depth=self.max_depth,
                    init_tiles=list(self.init_tiles), rule_order=self.rule_order)


@dataclass(frozen=True)
class SheetPlacement:

    """ absorbing sheet in the link frame: transverse plane at xi1 = x, floor to h_S """

    x: float
    y: float
    width: float
    xi3_low: float
    xi3_high: float

    @classmethod
    def of(cls, geom, target):
        return cls(
            x=target.x,
            y=target.y,
            width=effective_width(target.w_S1, target.w_S2, target.phi),
            xi3_low=-geom.h,
            xi3_high=target.h_S - geom.h,
        )

    @property
    def xi2_range(self):
        return (self.y - self.width / 2, self.y + self.width / 2)

    @property
    def xi3_range(self):
        return (self.xi3_low, self.xi3_high)

    @property
    def area(self):
        return self.width * (self.xi3_high - self.xi3_low)


class AttenuationProfile:

    """ excess attenuation in dB over the frequency grid, with the state that produced it """

    def __init__(self, values, condition=None):
        self.values = np.array(values, dtype=float).reshape(-1)
        self.condition = condition
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("attenuation profile has non-finite entries")

    @property
    def F(self):
        return self.values.size

    def __len__(self):
        return self.values.size

    def __str__(self):
        return "A = {:.2f} dB (mean over {} freq.) at {}".format(self.values.mean(), self.F, self.condition)


def effective_width(w_S1, w_S2, phi):
    """ projected breadth of an elliptical cylinder with axes w_S1, w_S2 rotated by phi """
    if not (w_S1 >= w_S2 > 0):
        raise DomainError("traversal sizes must satisfy w_S1 >= w_S2 > 0")
    return math.sqrt((w_S1 * math.cos(phi)) ** 2 + (w_S2 * math.sin(phi)) ** 2)


def _rule(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = (nodes + 1.0) / 2.0
    weights = weights / 2.0
    return nodes, np.outer(weights, weights).reshape(-1)


class _SheetIntegrand:

    """ (d/lambda) / (r1 r2) * exp(-j k (r1 + r2 - d)), times antenna gains, for all frequencies """

    def __init__(self, geom, x, freqs):
        self.geom = geom
        self.x = float(x)
        lam = np.atleast_1d(wavelength(freqs))
        self.k = 2 * math.pi / lam
        self.scale = geom.d / lam

    def __call__(self, xi2, xi3):
        d = self.geom.d
        transverse = xi2 ** 2 + xi3 ** 2
        r1 = np.sqrt(self.x ** 2 + transverse)
        r2 = np.sqrt((d - self.x) ** 2 + transverse)
        amplitude = 1.0 / (r1 * r2)
        if self.geom.directional:
            amplitude = amplitude \
                * self.geom.tx_pattern.field_gain(self.x / r1) \
                * self.geom.rx_pattern.field_gain((d - self.x) / r2)
        excess = r1 + r2 - d
        return (amplitude[:, None] * self.scale[None, :]) * np.exp(-1j * excess[:, None] * self.k[None, :])


def _integrate_tiles(integrand, tiles, nodes, weights, chunk_size):
    """ rule estimate per tile; tiles is an (N, 4) array of [xi2_lo, xi2_hi, xi3_lo, xi3_hi] """
    q = nodes.size
    n_freq = integrand.k.size
    per_chunk = max(1, chunk_size // (q * q * n_freq))
    out = np.empty((tiles.shape[0], n_freq), dtype=complex)
    for start in range(0, tiles.shape[0], per_chunk):
        t = tiles[start:start + per_chunk]
        span2 = t[:, 1] - t[:, 0]
        span3 = t[:, 3] - t[:, 2]
        xi2 = t[:, 0, None] + span2[:, None] * nodes[None, :]
        xi3 = t[:, 2, None] + span3[:, None] * nodes[None, :]
        xi2 = np.repeat(xi2, q, axis=1)
        xi3 = np.tile(xi3, (1, q))
        values = integrand(xi2.reshape(-1), xi3.reshape(-1)).reshape(t.shape[0], q * q, n_freq)
        out[start:start + per_chunk] = (span2 * span3)[:, None] * np.einsum('npf,p->nf', values, weights)
    return out


def _split(tiles):
    """ 2x2 refinement; the four children of a parent are contiguous """
    a0, a1, b0, b1 = tiles.T
    am = (a0 + a1) / 2
    bm = (b0 + b1) / 2
    children = np.stack([
        np.stack([a0, am, b0, bm], axis=1),
        np.stack([am, a1, b0, bm], axis=1),
        np.stack([a0, am, bm, b1], axis=1),
        np.stack([am, a1, bm, b1], axis=1),
    ], axis=1)
    return children.reshape(-1, 4)


def _adaptive_integral(integrand, xi2_range, xi3_range, quad):
    """ returns (integral per frequency, summed error estimate, number of accepted tiles) """
    nodes, weights = _rule(quad.rule_order)
    (a_lo, a_hi), (b_lo, b_hi) = xi2_range, xi3_range
    total_area = (a_hi - a_lo) * (b_hi - b_lo)
    n, m = quad.init_tiles
    a_edges = np.linspace(a_lo, a_hi, n + 1)
    b_edges = np.linspace(b_lo, b_hi, m + 1)
    tiles = np.array([[a_edges[i], a_edges[i + 1], b_edges[j], b_edges[j + 1]]
                      for i in range(n) for j in range(m)], dtype=float)

    coarse = _integrate_tiles(integrand, tiles, nodes, weights, quad.chunk_size)
    total = np.zeros(integrand.k.size, dtype=complex)
    total_error = 0.0
    accepted = 0

    for depth in range(1, quad.max_depth + 1):
        children = _split(tiles)
        child_estimates = _integrate_tiles(integrand, children, nodes, weights, quad.chunk_size)
        fine = child_estimates.reshape(tiles.shape[0], 4, -1).sum(axis=1)
        error = np.abs(fine - coarse).max(axis=1)
        area = (tiles[:, 1] - tiles[:, 0]) * (tiles[:, 3] - tiles[:, 2])
        done = error <= quad.abs_tol * area / total_area

        total += fine[done].sum(axis=0)
        total_error += float(error[done].sum())
        accepted += int(done.sum())

        if done.all():
            logger.debug("quadrature converged at depth {}: {} tiles, error {:.2e}".format(depth, accepted, total_error))
            return total, total_error, accepted

        refine = np.repeat(~done, 4)
        tiles = children[refine]
        coarse = child_estimates[refine]

    estimate = total + fine[~done].sum(axis=0)
    achieved = total_error + float(error[~done].sum())
    raise QuadratureError(
        "tolerance {:g} not reached at depth {} ({} tiles pending, error {:.2e})".format(
            quad.abs_tol, quad.max_depth, int((~done).sum()), achieved),
        estimate=1 - 1j * estimate, error=achieved)


def rectangle_field_ratio(geom, freqs, x, xi2_range, xi3_range, quad):
    """ E/E0 per frequency for an absorbing rectangle at xi1 = x spanning the given transverse ranges """
    if not (0 < x < geom.d):
        raise DomainError("sheet at xi1 = {} lies outside the link slab (0, {})".format(x, geom.d))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if xi2_range[1] <= xi2_range[0] or xi3_range[1] <= xi3_range[0]:
        return np.ones(freqs.size, dtype=complex)
    integrand = _SheetIntegrand(geom, x, freqs)
    integral, _, _ = _adaptive_integral(integrand, xi2_range, xi3_range, quad)
    return 1 - 1j * integral


def field_ratio(geom, target, freq, quad):
    """ complex field ratio E_theta/E_0 at one frequency """
    sheet = SheetPlacement.of(geom, target)
    return complex(rectangle_field_ratio(geom, freq, sheet.x, sheet.xi2_range, sheet.xi3_range, quad)[0])


def _to_db(ratio):
    power = np.abs(ratio) ** 2
    if np.any(power == 0):
        raise NumericalError("field ratio vanished, attenuation is unbounded")
    return -10 * np.log10(power)


def excess_attenuation(geom, target, freq, quad):
    """ A = -10 log10 |E/E0|^2 in dB at one frequency """
    return float(_to_db(field_ratio(geom, target, freq, quad)))


def attenuation_profile(geom, target, quad):
    """ excess attenuation over the geometry's whole frequency grid, integrated jointly """
    sheet = SheetPlacement.of(geom, target)
    ratio = rectangle_field_ratio(geom, geom.frequencies, sheet.x, sheet.xi2_range, sheet.xi3_range, quad)
    return AttenuationProfile(_to_db(ratio), condition=target)


def rectangle_field_ratio_midpoint(geom, freqs, x, xi2_range, xi3_range, n=2000, m=2000, rows=50):
    """ dense n x m midpoint rule, the brute-force reference for the adaptive scheme """
    if not (0 < x < geom.d):
        raise DomainError("sheet at xi1 = {} lies outside the link slab (0, {})".format(x, geom.d))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    integrand = _SheetIntegrand(geom, x, freqs)
    h2 = (xi2_range[1] - xi2_range[0]) / n
    h3 = (xi3_range[1] - xi3_range[0]) / m
    xi2 = xi2_range[0] + h2 * (np.arange(n) + 0.5)
    xi3 = xi3_range[0] + h3 * (np.arange(m) + 0.5)
    total = np.zeros(freqs.size, dtype=complex)
    for start in range(0, n, rows):
        block = xi2[start:start + rows]
        values = integrand(np.repeat(block, m), np.tile(xi3, block.size))
        total += values.sum(axis=0)
    return 1 - 1j * total * h2 * h3


def field_ratio_midpoint(geom, target, freq, n=2000, m=2000):
    sheet = SheetPlacement.of(geom, target)
    return complex(rectangle_field_ratio_midpoint(geom, freq, sheet.x, sheet.xi2_range, sheet.xi3_range, n, m)[0])


def knife_edge_attenuation(v):
    """ classical knife-edge loss in dB for Fresnel parameter v (6.02 dB at grazing) """
    s, c = fresnel(v)
    ratio = (1 + 1j) / 2 * ((0.5 - c) - 1j * (0.5 - s))
    return float(-20 * np.log10(np.abs(ratio)))
