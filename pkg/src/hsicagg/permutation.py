"""Seeded permutations, the plus-one permutation quantile and the single test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .estimator import GramStack
from .kernels import Bandwidths, Sample

_SNAP = 1e-9


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidArgumentError("seeds must be integers in [0, 2**64)")
    return seed


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 64-bit sub-seed for the stream identified by ``keys``."""
    ss = np.random.SeedSequence(_check_seed(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def permutation_rng(seed: int, index: int) -> np.random.Generator:
    # counter-based stream: draw ``index`` depends only on (seed, index)
    return np.random.Generator(np.random.Philox(key=_check_seed(seed), counter=[0, 0, 0, index]))


@dataclass(frozen=True)
class PermutationBatch:
    """``b`` i.i.d. uniform 0-based permutations of ``range(n)``."""

    perms: np.ndarray = field(repr=False)
    seed: int
    n: int
    b: int


def draw_permutations(n: int, b: int, seed: int) -> PermutationBatch:
    if n < 1 or b < 1:
        raise InvalidArgumentError("need n >= 1 and b >= 1")
    perms = np.empty((b, n), dtype=np.int64)
    for k in range(b):
        perms[k] = permutation_rng(seed, k).permutation(n)
    perms.setflags(write=False)
    return PermutationBatch(perms, int(seed), n, b)


def order_rank(count: int, level: float) -> int:
    """1-based rank ``ceil(count * (1 - level))`` clamped to ``[1, count]``.

    Products within 1e-9 of an integer are snapped first, so a decimal level
    such as 0.05 is not pushed one rank up by its binary representation.
    """
    x = count * (1.0 - level)
    r = round(x)
    k = r if abs(x - r) <= _SNAP * max(1.0, abs(x)) else math.ceil(x)
    return int(min(max(k, 1), count))


def permutation_quantile(stats, observed: float, alpha: float) -> float:
    """Order statistic of rank ``ceil((B+1)(1-alpha))`` among the B stats plus ``observed``."""
    stats = np.asarray(stats, dtype=np.float64).ravel()
    if stats.size == 0:
        raise InvalidArgumentError("stats must not be empty")
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    pooled = np.sort(np.append(stats, observed), kind="stable")
    return float(pooled[order_rank(pooled.size, alpha) - 1])


@dataclass
class SingleTestOutcome:
    statistic: float
    quantile: float
    reject: bool
    alpha: float
    b: int
    seed: int
    bandwidths: Optional[Bandwidths] = None
    permuted_stats: Optional[np.ndarray] = field(default=None, repr=False)

    def to_record(self) -> dict:
        rec = {
            "test": "single",
            "statistic": self.statistic,
            "quantile": self.quantile,
            "reject": self.reject,
            "alpha": self.alpha,
            "b": self.b,
            "seed": self.seed,
        }
        if self.bandwidths is not None:
            rec["lambda"] = self.bandwidths.lam.tolist()
            rec["mu"] = self.bandwidths.mu.tolist()
        return rec


def single_permuted_test(
    s: Sample,
    bw: Bandwidths,
    alpha: float,
    b: int,
    seed: int,
    keep_stats: bool = False,
) -> SingleTestOutcome:
    """Permutation HSIC test at bandwidths ``bw``; Y is the permuted side."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    stack = GramStack(s, [bw])
    observed = float(stack.observed()[0])
    batch = draw_permutations(s.n, b, seed)
    permuted = stack.permuted(batch.perms)[:, 0]
    q = permutation_quantile(permuted, observed, alpha)
    return SingleTestOutcome(
        statistic=observed,
        quantile=q,
        reject=bool(observed > q),
        alpha=alpha,
        b=b,
        seed=int(seed),
        bandwidths=bw,
        permuted_stats=permuted if keep_stats else None,
    )
