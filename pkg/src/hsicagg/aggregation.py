"""Bandwidth collections, level correction by dichotomy and the aggregated test."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import EmptyCollectionError, InvalidArgumentError
from .estimator import GramStack
from .kernels import Bandwidths, Sample, empirical_bandwidths
from .permutation import derive_seed, draw_permutations, order_rank

_BASEL = math.pi / math.sqrt(6.0)
DICHOTOMY_RTOL = 1e-3
WEIGHT_SLACK = 1e-9


@dataclass(frozen=True)
class WeightedCollection:
    """Bandwidth pairs with nonnegative weights satisfying ``sum(exp(-w)) <= 1``."""

    bandwidths: tuple
    omegas: np.ndarray = field(repr=False)
    labels: Optional[tuple] = None

    def __post_init__(self):
        bws = tuple(self.bandwidths)
        omegas = np.asarray(self.omegas, dtype=np.float64).ravel()
        if not bws:
            raise EmptyCollectionError("collection is empty")
        if omegas.size != len(bws):
            raise InvalidArgumentError("one weight per bandwidth pair is required")
        if np.any(omegas < 0) or not np.all(np.isfinite(omegas)):
            raise InvalidArgumentError("weights must be finite and nonnegative")
        p, q = bws[0].p, bws[0].q
        if any(bw.p != p or bw.q != q for bw in bws):
            raise InvalidArgumentError("bandwidth dimensions differ across the collection")
        if math.fsum(np.exp(-omegas)) > 1.0 + WEIGHT_SLACK:
            raise InvalidArgumentError("weights violate sum(exp(-omega)) <= 1")
        if self.labels is not None and len(self.labels) != len(bws):
            raise InvalidArgumentError("one label per item is required")
        omegas.setflags(write=False)
        object.__setattr__(self, "bandwidths", bws)
        object.__setattr__(self, "omegas", omegas)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_items(cls, items, labels=None) -> "WeightedCollection":
        items = list(items)
        return cls(tuple(bw for bw, _ in items), np.array([w for _, w in items]), labels)

    def __len__(self) -> int:
        return len(self.bandwidths)

    @property
    def items(self) -> list:
        return list(zip(self.bandwidths, self.omegas.tolist()))

    @property
    def p(self) -> int:
        return self.bandwidths[0].p

    @property
    def q(self) -> int:
        return self.bandwidths[0].q

    @property
    def weight_mass(self) -> float:
        return math.fsum(np.exp(-self.omegas))

    @property
    def max_correction(self) -> float:
        """Upper end of the search interval for the level correction."""
        return float(np.exp(self.omegas.min()))

    def rows(self) -> list[dict]:
        out = []
        for i, (bw, w) in enumerate(self.items):
            out.append(
                {
                    "index": i,
                    "label": self.labels[i] if self.labels else "",
                    "lambda": bw.lam.tolist(),
                    "mu": bw.mu.tolist(),
                    "omega": w,
                }
            )
        return out


def singleton_collection(bw: Bandwidths, omega: float = 0.0) -> WeightedCollection:
    return WeightedCollection((bw,), np.array([omega]))


def dyadic_levels(n: int, p: int, q: int) -> int:
    if n < 2:
        return 0
    return math.floor(math.log2((n / math.log(n)) ** (2.0 / (p + q))))


def dyadic_isotropic_collection(n: int, p: int, q: int) -> WeightedCollection:
    """Bandwidths ``2^-m`` in every coordinate, m = 1..M, weights ``2 log(m pi / sqrt 6)``."""
    m_max = dyadic_levels(n, p, q)
    if m_max < 1:
        raise EmptyCollectionError(f"no dyadic level fits n={n}, p={p}, q={q}")
    bws, omegas, labels = [], [], []
    for m in range(1, m_max + 1):
        h = 2.0**-m
        bws.append(Bandwidths(np.full(p, h), np.full(q, h)))
        omegas.append(2.0 * math.log(m * _BASEL))
        labels.append(f"m={m}")
    return WeightedCollection(tuple(bws), np.array(omegas), tuple(labels))


def dyadic_anisotropic_collection(n: int, p: int, q: int) -> WeightedCollection:
    """All coordinate-wise dyadic bandwidths with total exponent <= 2 log2(n / log n)."""
    if n < 3:
        raise EmptyCollectionError("n must be at least 3")
    budget = 2.0 * math.log2(n / math.log(n))
    d = p + q
    top = math.floor(budget) - (d - 1)
    if top < 1:
        raise EmptyCollectionError(f"empty anisotropic collection for n={n}, p={p}, q={q}")
    bws, omegas, labels = [], [], []
    for ms in itertools.product(range(1, top + 1), repeat=d):
        if sum(ms) > budget:
            continue
        h = np.power(2.0, -np.asarray(ms, dtype=np.float64))
        bws.append(Bandwidths(h[:p], h[p:]))
        omegas.append(2.0 * sum(math.log(m * _BASEL) for m in ms))
        labels.append("m=" + ",".join(map(str, ms)))
    return WeightedCollection(tuple(bws), np.array(omegas), tuple(labels))


def scaled_grid_collection(
    base: Bandwidths, r: int, weights: str = "exponential", shape: str = "grid"
) -> WeightedCollection:
    """Dyadic fractions of ``base``.

    ``shape="grid"``: all pairs ``(base.lam / 2^a, base.mu / 2^b)``, 0 <= a, b < r.
    ``shape="diagonal"``: ``base / 2^m``, 0 <= m < r.
    Both weight families are normalized so that ``sum(exp(-omega)) == 1``.
    """
    if int(r) != r or r < 1:
        raise InvalidArgumentError("r must be a positive integer")
    r = int(r)
    if weights not in ("uniform", "exponential"):
        raise InvalidArgumentError(f"unknown weights {weights!r}")
    bws, omegas, labels = [], [], []
    if shape == "grid":
        norm = math.log(math.fsum(1.0 / (u * u * v * v) for u in range(1, r + 1) for v in range(1, r + 1)))
        for a in range(r):
            for b in range(r):
                bws.append(Bandwidths(base.lam / 2.0**a, base.mu / 2.0**b))
                if weights == "uniform":
                    omegas.append(math.log(r * r))
                else:
                    omegas.append(2.0 * math.log(a + 1) + 2.0 * math.log(b + 1) + norm)
                labels.append(f"a={a},b={b}")
    elif shape == "diagonal":
        norm = math.log(math.fsum(1.0 / (m + 1) ** 2 for m in range(r)))
        for m in range(r):
            bws.append(base.scaled(2.0**-m))
            if weights == "uniform":
                omegas.append(math.log(r))
            else:
                omegas.append(2.0 * math.log(m + 1) + norm)
            labels.append(f"m={m}")
    else:
        raise InvalidArgumentError(f"unknown shape {shape!r}")
    return WeightedCollection(tuple(bws), np.array(omegas), tuple(labels))


def unit_grid_collection(r: int, p: int = 1, q: int = 1) -> WeightedCollection:
    """The grid ``{1, 1/2, ..., 1/2^(r-1)}^2`` with uniform weights ``log(r^2)``."""
    return scaled_grid_collection(Bandwidths(np.ones(p), np.ones(q)), r, "uniform", "grid")


def diagonal_collection(s: Sample, r: int = 7, weights: str = "exponential") -> WeightedCollection:
    """Diagonal collection around the sample's empirical bandwidths."""
    return scaled_grid_collection(empirical_bandwidths(s), r, weights, shape="diagonal")


class CorrectedLevels:
    """Corrected quantiles and exceedance probabilities from fixed reference draws.

    ``reference`` (count x items) estimates the null quantiles; ``probes``
    (B x items) estimate the probability that some item exceeds its corrected
    quantile. Both are fixed, so the exceedance probability is nondecreasing in u.
    """

    def __init__(self, reference: np.ndarray, probes: np.ndarray, omegas: np.ndarray):
        reference = np.atleast_2d(np.asarray(reference, dtype=np.float64))
        self.sorted_ref = np.sort(reference, axis=0, kind="stable")
        self.probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
        self.omegas = np.asarray(omegas, dtype=np.float64)
        self.count = self.sorted_ref.shape[0]
        if self.sorted_ref.shape[1] != self.omegas.size or self.probes.shape[1] != self.omegas.size:
            raise InvalidArgumentError("reference/probe columns must match the collection")

    def ranks(self, u: float) -> np.ndarray:
        levels = u * np.exp(-self.omegas)
        return np.array([order_rank(self.count, lv) for lv in levels])

    def quantiles(self, u: float) -> np.ndarray:
        r = self.ranks(u)
        return self.sorted_ref[r - 1, np.arange(self.omegas.size)]

    def exceedance(self, u: float) -> float:
        q = self.quantiles(u)
        return float(np.mean(np.any(self.probes > q, axis=1)))


@dataclass
class DichotomyResult:
    u_hat: float
    u_min: float
    u_max: float
    iterations: int
    infeasible: bool
    probes: list


def dichotomy(levels: CorrectedLevels, alpha: float, upper: float) -> DichotomyResult:
    """Largest probed u in [alpha, upper] whose exceedance probability is <= alpha."""
    u_min, u_max = alpha, upper
    if upper <= alpha:
        return DichotomyResult(alpha, alpha, upper, 0, True, [])
    probes = []
    it = 0
    while u_max - u_min > DICHOTOMY_RTOL * u_min:
        u = 0.5 * (u_min + u_max)
        p_u = levels.exceedance(u)
        probes.append((u, p_u))
        it += 1
        if p_u <= alpha:
            u_min = u
        else:
            u_max = u
    ordered = sorted(probes)
    if any(b[1] < a[1] for a, b in zip(ordered, ordered[1:])):
        raise RuntimeError("exceedance probability is not monotone in u")
    return DichotomyResult(u_min, u_min, u_max, it, False, probes)


@dataclass
class AggregatedOutcome:
    u_hat: float
    statistics: np.ndarray
    quantiles: np.ndarray
    reject: bool
    dichotomy_iterations: int
    seeds: tuple
    alpha: float
    omegas: np.ndarray = field(repr=False)
    u_bounds: tuple = (float("nan"), float("nan"))
    saturated: list = field(default_factory=list)
    infeasible: bool = False
    bandwidths: Optional[tuple] = field(default=None, repr=False)
    labels: Optional[tuple] = None
    kind: str = "permuted"

    @property
    def per_item(self) -> list[tuple[float, float]]:
        return list(zip(self.statistics.tolist(), self.quantiles.tolist()))

    @property
    def rejecting_items(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.statistics > self.quantiles)]

    def to_record(self) -> dict:
        items = []
        for i, (stat, q) in enumerate(self.per_item):
            item = {"statistic": stat, "quantile": q, "omega": float(self.omegas[i])}
            if self.bandwidths is not None:
                item["lambda"] = self.bandwidths[i].lam.tolist()
                item["mu"] = self.bandwidths[i].mu.tolist()
            if self.labels is not None:
                item["label"] = self.labels[i]
            items.append(item)
        return {
            "test": f"aggregated-{self.kind}",
            "alpha": self.alpha,
            "u_hat": self.u_hat,
            "u_bounds": list(self.u_bounds),
            "dichotomy_iterations": self.dichotomy_iterations,
            "infeasible_correction": self.infeasible,
            "saturated_items": self.saturated,
            "reject": self.reject,
            "rejecting_items": self.rejecting_items,
            "seeds": list(self.seeds),
            "items": items,
        }


def _resolve_seeds(seeds) -> tuple[int, int]:
    if isinstance(seeds, (tuple, list)):
        if len(seeds) != 2:
            raise InvalidArgumentError("seeds must be an int or a pair of ints")
        return int(seeds[0]), int(seeds[1])
    return derive_seed(int(seeds), 1), derive_seed(int(seeds), 2)


def _check_common(alpha: float, b1: int, b2: int) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    if b1 < 1 or b2 < 1:
        raise InvalidArgumentError("b1 and b2 must be >= 1")


@dataclass
class _PermutedSetup:
    stack: GramStack
    observed: np.ndarray
    levels: CorrectedLevels
    seeds: tuple


def _permuted_setup(s, coll, b1, b2, seeds) -> _PermutedSetup:
    seed_a, seed_b = _resolve_seeds(seeds)
    stack = GramStack(s, coll.bandwidths)
    observed = stack.observed()
    stats_a = stack.permuted(draw_permutations(s.n, b1, seed_a).perms)
    stats_b = stack.permuted(draw_permutations(s.n, b2, seed_b).perms)
    # plus-one rule: the observed statistic joins the quantile reference set
    reference = np.vstack([stats_a, observed[None, :]])
    return _PermutedSetup(stack, observed, CorrectedLevels(reference, stats_b, coll.omegas), (seed_a, seed_b))


def estimate_u_alpha(
    s: Sample,
    coll: WeightedCollection,
    alpha: float,
    b1: int,
    b2: int,
    seeds: Union[int, Sequence[int]],
):
    """Permutation estimate of the level correction.

    Returns ``(u_hat, corrected_quantiles, iterations)``.
    """
    _check_common(alpha, b1, b2)
    setup = _permuted_setup(s, coll, b1, b2, seeds)
    res = dichotomy(setup.levels, alpha, coll.max_correction)
    return res.u_hat, setup.levels.quantiles(res.u_hat), res.iterations


def _finish(kind, observed, levels, res, coll, alpha, seeds) -> AggregatedOutcome:
    q = levels.quantiles(res.u_hat)
    saturated = [int(i) for i in np.flatnonzero(levels.ranks(res.u_hat) == levels.count)]
    return AggregatedOutcome(
        u_hat=res.u_hat,
        statistics=observed,
        quantiles=q,
        reject=bool(np.any(observed > q)),
        dichotomy_iterations=res.iterations,
        seeds=tuple(seeds),
        alpha=alpha,
        omegas=coll.omegas,
        u_bounds=(res.u_min, res.u_max),
        saturated=saturated,
        infeasible=res.infeasible,
        bandwidths=coll.bandwidths,
        labels=coll.labels,
        kind=kind,
    )


def aggregated_test(
    s: Sample,
    coll: WeightedCollection,
    alpha: float,
    b1: int,
    b2: int,
    seeds: Union[int, Sequence[int]],
) -> AggregatedOutcome:
    """Permuted aggregated HSIC test over the weighted collection ``coll``."""
    _check_common(alpha, b1, b2)
    if coll.p != s.p or coll.q != s.q:
        raise InvalidArgumentError("collection dimensions do not match the sample")
    setup = _permuted_setup(s, coll, b1, b2, seeds)
    res = dichotomy(setup.levels, alpha, coll.max_correction)
    return _finish("permuted", setup.observed, setup.levels, res, coll, alpha, setup.seeds)
