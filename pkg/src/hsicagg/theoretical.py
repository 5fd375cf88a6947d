"""Aggregated test calibrated by Monte Carlo under a simulable null.

Used as a reference to validate the permuted procedure: the level correction
and corrected quantiles depend only on the null distribution, so they are
computed once and replayed against any number of observations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .aggregation import (
    AggregatedOutcome,
    CorrectedLevels,
    DichotomyResult,
    WeightedCollection,
    _finish,
    _resolve_seeds,
    dichotomy,
)
from .errors import InvalidArgumentError
from .estimator import hsic_statistics
from .kernels import Sample
from .permutation import derive_seed

DEFAULT_COUNT_A = 50_000
DEFAULT_COUNT_B = 1_000


@dataclass(frozen=True)
class NullSampler:
    """Draws i.i.d. samples of size ``n`` from the product of the marginals."""

    draw: Callable[[int, int], Sample]
    n: int

    def sample(self, seed: int) -> Sample:
        return self.draw(self.n, seed)


def mc_null_statistics(
    ns: NullSampler, coll: WeightedCollection, count: int, seed: int
) -> np.ndarray:
    """HSIC statistics of ``count`` independent null samples, shape (count, items)."""
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    out = np.empty((count, len(coll)))
    for k in range(count):
        out[k] = hsic_statistics(ns.sample(derive_seed(seed, k)), coll.bandwidths)
    return out


@dataclass
class TheoreticalCalibration:
    coll: WeightedCollection
    alpha: float
    levels: CorrectedLevels
    result: DichotomyResult
    seeds: tuple

    @property
    def u_tilde(self) -> float:
        return self.result.u_hat

    @property
    def quantiles(self) -> np.ndarray:
        return self.levels.quantiles(self.result.u_hat)

    def test(self, s: Sample) -> AggregatedOutcome:
        observed = hsic_statistics(s, self.coll.bandwidths)
        return _finish(
            "theoretical", observed, self.levels, self.result, self.coll, self.alpha, self.seeds
        )


def calibrate_theoretical(
    ns: NullSampler,
    coll: WeightedCollection,
    alpha: float,
    counts: Sequence[int] = (DEFAULT_COUNT_A, DEFAULT_COUNT_B),
    seeds: Union[int, Sequence[int]] = 0,
) -> TheoreticalCalibration:
    """Observation-independent part: null quantiles and the level correction."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    count_a, count_b = (int(c) for c in counts)
    seed_a, seed_b = _resolve_seeds(seeds)
    stats_a = mc_null_statistics(ns, coll, count_a, seed_a)
    stats_b = mc_null_statistics(ns, coll, count_b, seed_b)
    # plain Monte Carlo quantiles: no plus-one term here
    levels = CorrectedLevels(stats_a, stats_b, coll.omegas)
    res = dichotomy(levels, alpha, coll.max_correction)
    return TheoreticalCalibration(coll, alpha, levels, res, (seed_a, seed_b))


def theoretical_aggregated_test(
    ns: NullSampler,
    s: Sample,
    coll: WeightedCollection,
    alpha: float,
    counts: Sequence[int] = (DEFAULT_COUNT_A, DEFAULT_COUNT_B),
    seeds: Union[int, Sequence[int]] = 0,
) -> AggregatedOutcome:
    if s.n != ns.n:
        raise InvalidArgumentError("observation size differs from the null sampler's n")
    return calibrate_theoretical(ns, coll, alpha, counts, seeds).test(s)
