# -*- coding: utf-8 -*-

"""
Per-sample generation time of the generative surrogate against the
diffraction integral. Calls are timed in batches on the monotonic
performance counter after discarding warm-up calls.
"""

import logging
import statistics
import time
from itertools import count
from dataclasses import dataclass, field

import numpy as np

from .errors import *
from .diffraction import attenuation_profile

logger = logging.getLogger(__name__)

# published per-sample times, embedded single-board computer
REFERENCE_SECONDS = {
    'cvae Z=16': 3.5e-5,
    'cvae Z=32': 5.2e-5,
    'em omnidirectional tol=1e-03': 5.4e-3,
    'em omnidirectional tol=1e-06': 3.81e-2,
    'em directional tol=1e-03': 0.64,
    'em directional tol=1e-06': 1.56,
}

BATCHES = 5


@dataclass
class BenchEntry:

    config: str
    mean: float
    median: float
    samples: int

    @property
    def reference(self):
        return REFERENCE_SECONDS.get(self.config)


@dataclass
class BenchReport:

    """ timing per configuration and EM/C-VAE speedup ratios """

    entries: dict = field(default_factory=dict)

    def ratio(self, em_config, cvae_config):
        return self.entries[em_config].mean / self.entries[cvae_config].mean

    @property
    def baseline_em(self):
        return next(name for name in self.entries if name.startswith('em omnidirectional'))

    @property
    def baseline_cvae(self):
        return next(name for name in self.entries if name.startswith('cvae'))

    def ratio_vs_em(self, config):
        """ C-VAE rows: baseline EM time over theirs; EM rows: their time over the baseline C-VAE """
        if config.startswith('cvae'):
            return self.ratio(self.baseline_em, config)
        return self.ratio(config, self.baseline_cvae)

    def csv_rows(self):
        return [(name, entry.mean, self.ratio_vs_em(name)) for name, entry in self.entries.items()]

    def to_dict(self):
        return {name: dict(mean=e.mean, median=e.median, samples=e.samples, reference=e.reference,
                           ratio_vs_em=self.ratio_vs_em(name))
                for name, e in self.entries.items()}


def time_calls(call, n, warmup=10, batches=BATCHES):
    """ (mean, median over batches) seconds per call of n timed calls after warm-up """
    if n < 1:
        raise DomainError("need at least one timed call")
    for _ in range(warmup):
        call()
    resolution = time.get_clock_info('perf_counter').resolution
    sizes = [n // batches + (1 if b < n % batches else 0) for b in range(min(batches, n))]
    per_call = []
    for size in sizes:
        start = time.perf_counter()
        for _ in range(size):
            call()
        per_call.append((time.perf_counter() - start) / size)
    mean = sum(t * s for t, s in zip(per_call, sizes)) / n
    if mean < 10 * resolution:
        raise BenchError("per-call time {:.3g} s is below 10x the timer resolution {:.3g} s".format(mean, resolution))
    return mean, statistics.median(per_call)


def bench_generation(models, conditions, em_variants, n_cvae=1000, n_em=10, warmup=10, rng=None):
    """
    models: {label: generator}, conditions: target states cycled through,
    em_variants: {label: (geometry, quadrature config)}
    """
    if n_cvae < 100 or n_em < 10:
        logger.warning("fewer timed calls than recommended (C-VAE {} < 100 or EM {} < 10)".format(n_cvae, n_em))
    rng = rng if rng is not None else np.random.default_rng(0)
    conditions = list(conditions)
    report = BenchReport()

    for label, model in models.items():
        cycle = count()
        call = lambda: model.sample(conditions[next(cycle) % len(conditions)], 1, rng)
        mean, median = time_calls(call, n_cvae, warmup)
        report.entries[label] = BenchEntry(label, mean, median, n_cvae)
        logger.info("{}: {:.3g} s/sample".format(label, mean))

    for label, (geom, quad) in em_variants.items():
        cycle = count()
        call = lambda: attenuation_profile(geom, conditions[next(cycle) % len(conditions)], quad)
        mean, median = time_calls(call, n_em, min(warmup, n_em))
        report.entries[label] = BenchEntry(label, mean, median, n_em)
        logger.info("{}: {:.3g} s/sample".format(label, mean))

    return report
