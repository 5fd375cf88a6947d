"""Gaussian kernels, Gram matrices and bandwidth helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateSampleError, InvalidArgumentError

_DEGENERATE_SQ_WIDTH = 1e-300


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    """Paired observations ``x`` (n x p) and ``y`` (n x q).

    One-dimensional inputs are promoted to a single column.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2 or y.ndim != 2:
            raise InvalidArgumentError("x and y must be 1-D or 2-D arrays")
        if x.shape[0] != y.shape[0]:
            raise InvalidArgumentError(
                f"x and y have different row counts ({x.shape[0]} != {y.shape[0]})"
            )
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise InvalidArgumentError("sample must have at least one row and column")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("sample contains non-finite entries")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def q(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class Bandwidths:
    """Per-coordinate bandwidths ``lam`` (for X) and ``mu`` (for Y)."""

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = np.atleast_1d(np.array(self.lam, dtype=np.float64))
        mu = np.atleast_1d(np.array(self.mu, dtype=np.float64))
        for name, v in (("lam", lam), ("mu", mu)):
            if v.ndim != 1 or v.size == 0:
                raise InvalidArgumentError(f"{name} must be a non-empty vector")
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise InvalidArgumentError(f"{name} components must be positive and finite")
        object.__setattr__(self, "lam", _frozen(lam))
        object.__setattr__(self, "mu", _frozen(mu))

    @property
    def p(self) -> int:
        return self.lam.size

    @property
    def q(self) -> int:
        return self.mu.size

    def scaled(self, factor: float) -> "Bandwidths":
        return Bandwidths(self.lam * factor, self.mu * factor)

    def __eq__(self, other):
        if not isinstance(other, Bandwidths):
            return NotImplemented
        return np.array_equal(self.lam, other.lam) and np.array_equal(self.mu, other.mu)

    def __hash__(self):
        return hash((self.lam.tobytes(), self.mu.tobytes()))

    def __repr__(self):
        return f"Bandwidths(lam={self.lam.tolist()}, mu={self.mu.tolist()})"


@dataclass(frozen=True)
class GramPair:
    """Gram matrices ``k`` and ``l`` with cached off-diagonal row sums."""

    k: np.ndarray
    l: np.ndarray
    row_sums_k_offdiag: np.ndarray = field(repr=False)
    row_sums_l_offdiag: np.ndarray = field(repr=False)

    @classmethod
    def from_matrices(cls, k, l) -> "GramPair":
        k = np.array(k, dtype=np.float64)
        l = np.array(l, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape != l.shape:
            raise InvalidArgumentError("k and l must be square matrices of equal size")
        return cls(
            _frozen(k), _frozen(l), _frozen(offdiag_row_sums(k)), _frozen(offdiag_row_sums(l))
        )

    @property
    def n(self) -> int:
        return self.k.shape[0]


def offdiag_row_sums(a: np.ndarray) -> np.ndarray:
    b = np.array(a, dtype=np.float64)
    np.fill_diagonal(b, 0.0)
    return b.sum(axis=1)


def _check_bw(bw) -> np.ndarray:
    bw = np.atleast_1d(np.asarray(bw, dtype=np.float64))
    if not np.all(np.isfinite(bw)) or np.any(bw <= 0):
        raise InvalidArgumentError("bandwidth components must be positive and finite")
    return bw


def gaussian_kernel_value(diff, bw) -> float:
    """Value of the scaled Gaussian density ``prod(1/bw) * g_d(diff / bw)``."""
    diff = np.atleast_1d(np.asarray(diff, dtype=np.float64))
    bw = _check_bw(bw)
    if diff.shape != bw.shape:
        raise InvalidArgumentError(f"dimension mismatch: diff {diff.shape} vs bw {bw.shape}")
    d = bw.size
    z = diff / bw
    return float(
        math.exp(-0.5 * float(np.dot(z, z))) / (np.prod(bw) * (2.0 * math.pi) ** (d / 2.0))
    )


def kernel_at_zero(bw) -> float:
    bw = _check_bw(bw)
    return float(1.0 / (np.prod(bw) * (2.0 * math.pi) ** (bw.size / 2.0)))


def gram_matrix(z: np.ndarray, bw) -> np.ndarray:
    """Symmetric n x n Gram matrix of the Gaussian kernel with bandwidths ``bw``."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    bw = _check_bw(bw)
    if z.shape[1] != bw.size:
        raise InvalidArgumentError(
            f"dimension mismatch: data has {z.shape[1]} columns, bandwidth has {bw.size}"
        )
    n = z.shape[0]
    if n == 1:
        return np.full((1, 1), kernel_at_zero(bw))
    # squareform mirrors the condensed vector, so the result is exactly symmetric
    sq = squareform(pdist(z / bw, "sqeuclidean"))
    return kernel_at_zero(bw) * np.exp(-0.5 * sq)


def compute_grams(s: Sample, bw: Bandwidths) -> GramPair:
    if bw.p != s.p or bw.q != s.q:
        raise InvalidArgumentError(
            f"bandwidth dimensions ({bw.p}, {bw.q}) do not match sample ({s.p}, {s.q})"
        )
    return GramPair.from_matrices(gram_matrix(s.x, bw.lam), gram_matrix(s.y, bw.mu))


def _reference_width(z: np.ndarray) -> float:
    n = z.shape[0]
    # sum_{i != j} ||z_i - z_j||^2 = 2n * sum_i ||z_i - mean||^2
    centered = z - z.mean(axis=0)
    sq = 2.0 * n * float(np.sum(centered * centered)) / (2.0 * n * (n - 1))
    if sq < _DEGENERATE_SQ_WIDTH:
        raise DegenerateSampleError("sample block has zero pairwise spread")
    return math.sqrt(sq)


def empirical_bandwidths(s: Sample) -> Bandwidths:
    """Isotropic reference widths from the mean squared pairwise distance per block.

    In the univariate case these are the usual sample standard deviations
    (divisor ``n - 1``).
    """
    if s.n < 2:
        raise InvalidArgumentError("empirical bandwidths need at least two observations")
    lam = _reference_width(s.x)
    mu = _reference_width(s.y)
    return Bandwidths(np.full(s.p, lam), np.full(s.q, mu))


def check_assumption_a2(bw: Bandwidths, n: int, alpha: float) -> bool:
    """Whether ``bw`` is admissible for sample size ``n`` at level ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    prod_lam = float(np.prod(bw.lam))
    prod_mu = float(np.prod(bw.mu))
    log_inv_alpha = math.log(1.0 / alpha)
    return (
        max(prod_lam, prod_mu) < 1.0
        and n * math.sqrt(prod_lam * prod_mu) > log_inv_alpha
        and log_inv_alpha > 1.0
    )


def sobolev_optimal_bandwidths(n: int, delta: float, p: int, q: int) -> Bandwidths:
    if n < 1 or delta <= 0 or p < 1 or q < 1:
        raise InvalidArgumentError("need n >= 1, delta > 0, p, q >= 1")
    h = float(n) ** (-2.0 / (4.0 * delta + p + q))
    return Bandwidths(np.full(p, h), np.full(q, h))


def nikolskii_optimal_bandwidths(n: int, nu, gamma) -> Bandwidths:
    nu = np.atleast_1d(np.asarray(nu, dtype=np.float64))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    reg = np.concatenate([nu, gamma])
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if np.any(reg <= 0) or np.any(reg > 2):
        raise InvalidArgumentError("regularities must lie in (0, 2]")
    eta = 1.0 / float(np.sum(1.0 / reg))
    expo = 2.0 * eta / (1.0 + 4.0 * eta)
    return Bandwidths(float(n) ** (-expo / nu), float(n) ** (-expo / gamma))
