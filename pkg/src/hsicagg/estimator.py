"""Unbiased HSIC estimator and its evaluation under permutations of Y."""

from __future__ import annotations

import itertools
import math
import os
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, SampleTooSmallError
from .kernels import Bandwidths, GramPair, Sample, gram_matrix, offdiag_row_sums

try:
    import numba

    _HAVE_NUMBA = os.environ.get("HSICAGG_DISABLE_NUMBA", "") == ""
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER = "omp"
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

THREADS_ENV = "HSICAGG_NUM_THREADS"


def _apply_thread_override() -> None:
    value = os.environ.get(THREADS_ENV)
    if _HAVE_NUMBA and value:
        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))


def _check_n(n: int) -> None:
    if n < 4:
        raise SampleTooSmallError(f"the HSIC U-statistic needs n >= 4 (got {n})")


def _norms(n: int) -> tuple[float, float, float]:
    # exact integer products before the single conversion to float
    n2 = n * (n - 1)
    n3 = n2 * (n - 2)
    n4 = n3 * (n - 3)
    return float(n2), float(n3), float(n4)


def hsic_from_sums(n: int, s1, t, sk, sl):
    """Combine the off-diagonal sums into the U-statistic.

    ``s1 = sum_{i!=j} K_ij L_ij``, ``t = sum_i rK_i rL_i`` and ``sk``/``sl`` are
    the totals of the off-diagonal row sums. The order-2, 3 and 4 averages are
    merged over the common denominator n(n-1)(n-2)(n-3). Works elementwise.
    """
    _, _, n4 = _norms(n)
    return ((n - 1) * (n - 2) * s1 + sk * sl - 2.0 * (n - 1) * t) / n4


def _hsic_scalar(n: int, s1: float, t: float, sk: float, sl: float) -> float:
    _, _, n4 = _norms(n)
    return math.fsum([(n - 1) * (n - 2) * s1, sk * sl, -2.0 * (n - 1) * t]) / n4


def _offdiag_product_sum(k: np.ndarray, l: np.ndarray) -> float:
    prod = k * l
    np.fill_diagonal(prod, 0.0)
    return math.fsum(prod.ravel())


def _scalar_sums(g: GramPair, l: np.ndarray, rl: np.ndarray) -> tuple:
    rk = g.row_sums_k_offdiag
    s1 = _offdiag_product_sum(g.k, l)
    t = math.fsum(rk * rl)
    return s1, t, math.fsum(rk), math.fsum(rl)


def hsic_bruteforce(g: GramPair) -> float:
    """Literal enumeration of the order-2, 3 and 4 U-statistics. O(n^4).

    Sums are compensated (``math.fsum``): the statistic can be orders of
    magnitude smaller than each average, so plain summation would leave the
    reference less accurate than the fast path it checks.
    """
    n = g.n
    _check_n(n)
    k = g.k.tolist()
    l = g.l.tolist()
    idx = range(n)
    s2 = math.fsum(k[i][j] * l[i][j] for i, j in itertools.permutations(idx, 2))
    s3 = math.fsum(k[i][j] * l[j][r] for i, j, r in itertools.permutations(idx, 3))
    s4 = math.fsum(k[i][j] * l[r][s] for i, j, r, s in itertools.permutations(idx, 4))
    n2, n3, n4 = _norms(n)
    return math.fsum([s2 / n2, s4 / n4, -2.0 * s3 / n3])


def hsic_fast(g: GramPair) -> float:
    """O(n^2) evaluation of the unbiased HSIC estimator."""
    n = g.n
    _check_n(n)
    return _hsic_scalar(n, *_scalar_sums(g, g.l, g.row_sums_l_offdiag))


def _check_perm(sigma, n: int) -> np.ndarray:
    sigma = np.asarray(sigma)
    if sigma.shape != (n,) or not np.issubdtype(sigma.dtype, np.integer):
        raise InvalidArgumentError(f"permutation must be an integer vector of length {n}")
    if not np.array_equal(np.sort(sigma), np.arange(n)):
        raise InvalidArgumentError("not a permutation of 0..n-1")
    return sigma.astype(np.intp)


def hsic_permuted(g: GramPair, sigma) -> float:
    """HSIC of the sample ``(X_i, Y_sigma(i))``; ``sigma`` is 0-based.

    Reuses the Gram matrices: ``L`` and its row-sum cache are reindexed.
    """
    n = g.n
    _check_n(n)
    sigma = _check_perm(sigma, n)
    l = g.l[np.ix_(sigma, sigma)]
    return _hsic_scalar(n, *_scalar_sums(g, l, g.row_sums_l_offdiag[sigma]))


# ---------------------------------------------------------------------------
# Batched evaluation over a bandwidth collection and many permutations.
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def _perm_s1_numba(ks, ls, kidx, lidx, perms):
        n_perm, n = perms.shape
        n_items = kidx.shape[0]
        n_l = ls.shape[0]
        out = np.empty((n_perm, n_items))
        for b in numba.prange(n_perm):
            sig = perms[b]
            acc = np.zeros(n_items)
            row = np.empty(n_items)
            lv = np.empty(n_l)
            for i in range(n):
                si = sig[i]
                row[:] = 0.0
                for j in range(i + 1, n):
                    sj = sig[j]
                    for a in range(n_l):
                        lv[a] = ls[a, si, sj]
                    for w in range(n_items):
                        row[w] += ks[kidx[w], i, j] * lv[lidx[w]]
                for w in range(n_items):
                    acc[w] += row[w]
            for w in range(n_items):
                out[b, w] = 2.0 * acc[w]
        return out


def _perm_s1_numpy(ks, ls, kidx, lidx, perms):
    n_perm, n = perms.shape
    out = np.empty((n_perm, kidx.size))
    ks0 = ks.copy()
    for a in range(ks0.shape[0]):
        np.fill_diagonal(ks0[a], 0.0)
    for b in range(n_perm):
        sig = perms[b]
        lp = ls[:, sig][:, :, sig]
        full = np.einsum("aij,cij->ac", ks0, lp)
        out[b] = full[kidx, lidx]
    return out


class GramStack:
    """Gram matrices for every bandwidth pair of a collection, deduplicated per side.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, s: Sample, bandwidths: Sequence[Bandwidths]):
        _check_n(s.n)
        self.n = s.n
        ks, ls, kidx, lidx = [], [], [], []
        kpos: dict[bytes, int] = {}
        lpos: dict[bytes, int] = {}
        for bw in bandwidths:
            key = bw.lam.tobytes()
            if key not in kpos:
                kpos[key] = len(ks)
                ks.append(gram_matrix(s.x, bw.lam))
            key = bw.mu.tobytes()
            if key not in lpos:
                lpos[key] = len(ls)
                ls.append(gram_matrix(s.y, bw.mu))
            kidx.append(kpos[bw.lam.tobytes()])
            lidx.append(lpos[bw.mu.tobytes()])
        self.ks = np.ascontiguousarray(np.stack(ks))
        self.ls = np.ascontiguousarray(np.stack(ls))
        self.kidx = np.asarray(kidx, dtype=np.intp)
        self.lidx = np.asarray(lidx, dtype=np.intp)
        self.rk = np.stack([offdiag_row_sums(k) for k in ks])
        self.rl = np.stack([offdiag_row_sums(l) for l in ls])
        self.sk = self.rk.sum(axis=1)
        self.sl = self.rl.sum(axis=1)
        for a in (self.ks, self.ls, self.rk, self.rl):
            a.setflags(write=False)

    def __len__(self) -> int:
        return self.kidx.size

    def gram_pair(self, item: int) -> GramPair:
        return GramPair.from_matrices(self.ks[self.kidx[item]], self.ls[self.lidx[item]])

    def observed(self) -> np.ndarray:
        """HSIC estimate for every item on the unpermuted sample.

        Evaluated through the permuted path with the identity, so that ties
        with permuted statistics are exact rather than rounding-dependent.
        """
        return self.permuted(np.arange(self.n)[None, :])[0]

    def permuted(self, perms: np.ndarray) -> np.ndarray:
        """Array of shape (B, items): HSIC of ``(X_i, Y_perm(i))`` for each row."""
        perms = np.ascontiguousarray(perms, dtype=np.int64)
        if perms.ndim != 2 or perms.shape[1] != self.n:
            raise InvalidArgumentError(f"permutations must have shape (B, {self.n})")
        if perms.shape[0] == 0:
            return np.empty((0, len(self)))
        if _HAVE_NUMBA:
            _apply_thread_override()
            s1 = _perm_s1_numba(self.ks, self.ls, self.kidx, self.lidx, perms)
        else:
            s1 = _perm_s1_numpy(self.ks, self.ls, self.kidx, self.lidx, perms)
        rl_perm = self.rl[:, perms]  # (n_l, B, n)
        t = np.einsum("wi,wbi->bw", self.rk[self.kidx], rl_perm[self.lidx])
        return hsic_from_sums(self.n, s1, t, self.sk[self.kidx], self.sl[self.lidx])


def hsic_statistics(s: Sample, bandwidths: Sequence[Bandwidths]) -> np.ndarray:
    """Observed HSIC estimates of ``s`` for each bandwidth pair."""
    return GramStack(s, bandwidths).observed()
