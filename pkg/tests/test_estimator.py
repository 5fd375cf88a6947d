import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsicagg import (
    Bandwidths,
    InvalidArgumentError,
    Sample,
    SampleTooSmallError,
    compute_grams,
    hsic_bruteforce,
    hsic_fast,
    hsic_permuted,
    hsic_statistics,
)
from hsicagg import estimator
from hsicagg.estimator import GramStack, _perm_s1_numpy
from hsicagg.kernels import GramPair

from conftest import random_sample

BW = Bandwidths([0.8], [1.3])


def u_statistic_oracle(k, l):
    """Three separate tuple averages, written independently of the package."""
    n = k.shape[0]
    h2 = np.mean([k[i, j] * l[i, j] for i, j in itertools.permutations(range(n), 2)])
    h3 = np.mean([k[i, j] * l[i, r] for i, j, r in itertools.permutations(range(n), 3)])
    h4 = np.mean([k[i, j] * l[r, s] for i, j, r, s in itertools.permutations(range(n), 4)])
    return h2 + h4 - 2 * h3


def test_bruteforce_matches_independent_oracle(rng):
    for n in (4, 5, 7):
        g = compute_grams(random_sample(rng, n), BW)
        assert hsic_bruteforce(g) == pytest.approx(u_statistic_oracle(g.k, g.l), rel=1e-12)


def test_constant_sample_is_zero():
    s = Sample(np.zeros(6), np.ones(6))
    g = compute_grams(s, BW)
    assert abs(hsic_bruteforce(g)) < 1e-12
    assert abs(hsic_fast(g)) < 1e-12
    assert abs(hsic_permuted(g, np.arange(6)[::-1])) < 1e-12


def test_all_ones_gram():
    m = np.ones((4, 4))
    g = GramPair.from_matrices(m, m)
    assert hsic_bruteforce(g) == pytest.approx(0.0, abs=1e-15)
    assert hsic_fast(g) == pytest.approx(0.0, abs=1e-15)


def test_fast_matches_bruteforce_n6(rng):
    g = compute_grams(random_sample(rng, 6, 2, 1), Bandwidths([0.5, 1.0], [0.7]))
    assert hsic_fast(g) == pytest.approx(hsic_bruteforce(g), rel=1e-12)


def test_too_small():
    g = compute_grams(Sample(np.arange(3.0), np.arange(3.0)), BW)
    for fn in (hsic_bruteforce, hsic_fast):
        with pytest.raises(SampleTooSmallError):
            fn(g)


def test_permuted_identity_and_oracle(rng):
    s = random_sample(rng, 8)
    g = compute_grams(s, BW)
    assert hsic_permuted(g, np.arange(8)) == pytest.approx(hsic_fast(g), rel=1e-14)
    for _ in range(5):
        sigma = rng.permutation(8)
        materialized = compute_grams(Sample(s.x, s.y[sigma]), BW)
        assert hsic_permuted(g, sigma) == pytest.approx(hsic_bruteforce(materialized), rel=1e-10)


@pytest.mark.parametrize("sigma", [[0, 0, 1, 2, 3, 4, 5, 6], [0, 1, 2], [1, 2, 3, 4, 5, 6, 7, 8]])
def test_permuted_rejects_invalid(rng, sigma):
    g = compute_grams(random_sample(rng, 8), BW)
    with pytest.raises(InvalidArgumentError):
        hsic_permuted(g, sigma)


def test_stack_matches_single_items(rng):
    s = random_sample(rng, 25, 1, 2)
    bws = [Bandwidths([a], [b, b]) for a in (0.3, 1.0) for b in (0.5, 2.0)]
    stack = GramStack(s, bws)
    obs = stack.observed()
    for w, bw in enumerate(bws):
        assert obs[w] == pytest.approx(hsic_fast(compute_grams(s, bw)), rel=1e-12)
    perms = np.array([rng.permutation(25) for _ in range(6)])
    got = stack.permuted(perms)
    assert got.shape == (6, 4)
    for b in range(6):
        for w, bw in enumerate(bws):
            expect = hsic_permuted(compute_grams(s, bw), perms[b])
            assert got[b, w] == pytest.approx(expect, rel=1e-10, abs=1e-16)
    np.testing.assert_allclose(hsic_statistics(s, bws), obs, rtol=0, atol=0)


def test_numba_and_numpy_paths_agree(rng):
    s = random_sample(rng, 30)
    stack = GramStack(s, [BW, BW.scaled(0.5)])
    perms = np.array([rng.permutation(30) for _ in range(20)])
    args = (stack.ks, stack.ls, stack.kidx, stack.lidx, perms)
    s1_numpy = _perm_s1_numpy(*args)
    if estimator._HAVE_NUMBA:
        np.testing.assert_allclose(estimator._perm_s1_numba(*args), s1_numpy, rtol=1e-12)
    ref = np.array([[hsic_permuted(stack.gram_pair(w), p) for w in range(2)] for p in perms])
    np.testing.assert_allclose(stack.permuted(perms), ref, rtol=1e-10, atol=1e-16)


def test_permuted_scheduling_invariance(rng):
    s = random_sample(rng, 20)
    stack = GramStack(s, [BW])
    perms = np.array([rng.permutation(20) for _ in range(12)])
    order = rng.permutation(12)
    np.testing.assert_array_equal(stack.permuted(perms)[order], stack.permuted(perms[order]))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(4, 9),
    seed=st.integers(0, 2**32 - 1),
    lam=st.floats(0.1, 5.0),
    mu=st.floats(0.1, 5.0),
)
def test_fast_equals_bruteforce_property(n, seed, lam, mu):
    r = np.random.default_rng(seed)
    g = compute_grams(random_sample(r, n), Bandwidths([lam], [mu]))
    brute = hsic_bruteforce(g)
    assert hsic_fast(g) == pytest.approx(brute, rel=1e-10, abs=1e-14 * g.k[0, 0] * g.l[0, 0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-50, 50), perm_seed=st.integers(0, 1000))
def test_invariances(seed, shift, perm_seed):
    r = np.random.default_rng(seed)
    s = random_sample(r, 10)
    base = hsic_fast(compute_grams(s, BW))
    shifted = hsic_fast(compute_grams(Sample(s.x + shift, s.y - shift), BW))
    assert shifted == pytest.approx(base, rel=1e-8, abs=1e-12)
    # relabelling the observations jointly leaves the statistic unchanged
    pi = np.random.default_rng(perm_seed).permutation(10)
    relabelled = hsic_fast(compute_grams(Sample(s.x[pi], s.y[pi]), BW))
    assert relabelled == pytest.approx(base, rel=1e-10, abs=1e-14)
