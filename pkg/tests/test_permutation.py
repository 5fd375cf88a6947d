import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from hsicagg import (
    Bandwidths,
    InvalidArgumentError,
    Sample,
    compute_grams,
    draw_permutations,
    hsic_fast,
    hsic_permuted,
    permutation_quantile,
    single_permuted_test,
)
from hsicagg.permutation import derive_seed, order_rank

from conftest import random_sample


def test_n1_identity():
    batch = draw_permutations(1, 5, 3)
    assert batch.perms.shape == (5, 1) and np.all(batch.perms == 0)


def test_batches_deterministic_and_bijective():
    a = draw_permutations(30, 50, 123)
    b = draw_permutations(30, 50, 123)
    assert np.array_equal(a.perms, b.perms)
    assert not np.array_equal(a.perms, draw_permutations(30, 50, 124).perms)
    for row in a.perms:
        assert np.array_equal(np.sort(row), np.arange(30))


def test_batch_prefix_stable():
    # permutation k depends only on (seed, k)
    assert np.array_equal(draw_permutations(12, 40, 9).perms[:10], draw_permutations(12, 10, 9).perms)


def test_permutation_frequencies_n4():
    batch = draw_permutations(4, 24000, 2024)
    counts = {}
    for row in batch.perms:
        counts[tuple(row)] = counts.get(tuple(row), 0) + 1
    assert len(counts) == 24
    freqs = np.array(list(counts.values())) / 24000
    assert np.all(np.abs(freqs - 1 / 24) <= 0.01)


def test_derive_seed():
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
    assert len({derive_seed(5, k) for k in range(100)}) == 100
    with pytest.raises(InvalidArgumentError):
        derive_seed(-1)


def test_quantile_examples():
    assert permutation_quantile([0.5, 0.1, 0.4, 0.2], 0.3, 0.5) == 0.3
    assert order_rank(100, 0.05) == 95
    stats = np.arange(99, dtype=float)
    assert permutation_quantile(stats, 99.0, 0.05) == 94.0
    assert permutation_quantile([0.1, 0.3, 0.2], 0.25, 1e-12) == 0.3
    with pytest.raises(InvalidArgumentError):
        permutation_quantile([], 0.0, 0.05)


def test_order_rank_matches_exact_arithmetic():
    for count in range(1, 301):
        for alpha in (0.01, 0.05, 0.1, 0.2, 0.25, 0.5):
            exact = math.ceil(Fraction(count) * (1 - Fraction(str(alpha))))
            assert order_rank(count, alpha) == max(1, exact)


def test_plus_one_exhaustive_ranks():
    # with B+1 distinct values and a uniform rank for the observed one,
    # the rejection probability is exactly floor(alpha(B+1))/(B+1)
    for b in range(1, 21):
        values = np.arange(b + 1, dtype=float)
        for alpha in (0.05, 0.1, 0.2, 0.3, 0.5):
            rejections = 0
            for rank in range(b + 1):
                stats = np.delete(values, rank)
                q = permutation_quantile(stats, values[rank], alpha)
                rejections += values[rank] > q
            exact = Fraction(math.floor(Fraction(str(alpha)) * (b + 1)), b + 1)
            assert Fraction(rejections, b + 1) == exact


def test_level_under_exchangeability():
    r = np.random.default_rng(77)
    draws, b, alpha = 10_000, 39, 0.05
    pooled = r.standard_normal((draws, b + 1))
    rejections = sum(
        pooled[i, 0] > permutation_quantile(pooled[i, 1:], pooled[i, 0], alpha) for i in range(draws)
    )
    se = math.sqrt(alpha * (1 - alpha) / draws)
    assert rejections / draws <= alpha + 3 * se


def test_ties_do_not_reject():
    out = single_permuted_test(Sample(np.ones(10), np.arange(10.0)), Bandwidths([1.0], [1.0]), 0.05, 50, 1)
    assert abs(out.statistic) < 1e-12
    assert not out.reject


def test_constant_sample():
    s = Sample(np.full(12, 2.0), np.full(12, -1.0))
    out = single_permuted_test(s, Bandwidths([1.0], [1.0]), 0.05, 30, 4, keep_stats=True)
    assert abs(out.statistic) < 1e-12
    assert np.all(np.abs(out.permuted_stats) < 1e-12)
    assert abs(out.quantile) < 1e-12 and not out.reject


def test_single_test_matches_components(rng):
    s = random_sample(rng, 15)
    bw = Bandwidths([0.9], [1.1])
    out = single_permuted_test(s, bw, 0.1, 40, 99, keep_stats=True)
    g = compute_grams(s, bw)
    assert out.statistic == pytest.approx(hsic_fast(g), rel=1e-12)
    perms = draw_permutations(15, 40, 99).perms
    expect = [hsic_permuted(g, p) for p in perms]
    np.testing.assert_allclose(out.permuted_stats, expect, rtol=1e-10, atol=1e-16)
    assert out.quantile == permutation_quantile(out.permuted_stats, out.statistic, 0.1)
    assert out.reject == (out.statistic > out.quantile)


def test_single_test_deterministic(rng):
    s = random_sample(rng, 40)
    bw = Bandwidths([0.5], [0.5])
    a = single_permuted_test(s, bw, 0.05, 100, 17, keep_stats=True)
    b = single_permuted_test(s, bw, 0.05, 100, 17, keep_stats=True)
    assert a.statistic == b.statistic and a.quantile == b.quantile and a.reject == b.reject
    assert np.array_equal(a.permuted_stats, b.permuted_stats)
    assert single_permuted_test(s, bw, 0.05, 100, 17).permuted_stats is None


def test_strong_dependence_rejects():
    x = np.linspace(-2, 2, 60)
    out = single_permuted_test(Sample(x, x**2), Bandwidths([0.5], [0.5]), 0.05, 200, 3)
    assert out.reject
    assert out.to_record()["reject"] is True
