import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsicagg import (
    Bandwidths,
    DegenerateSampleError,
    InvalidArgumentError,
    Sample,
    check_assumption_a2,
    compute_grams,
    empirical_bandwidths,
    gaussian_kernel_value,
    nikolskii_optimal_bandwidths,
    sobolev_optimal_bandwidths,
)

from conftest import random_sample

# mpmath, 30 digits
K_2_2 = 0.120985362259571674898915096468
K_1_1 = 0.241970724519143349797830192936
N100_THIRD = 0.215443469003188372175929356652
N100_2_42 = 0.803085722139151438028658980757


def test_kernel_at_zero():
    assert gaussian_kernel_value([0.0], [1.0]) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_kernel_hand_value():
    assert gaussian_kernel_value([2.0], [2.0]) == pytest.approx(K_2_2, rel=1e-14)


def test_kernel_zero_distance_2d():
    a, b = 0.3, 1.7
    assert gaussian_kernel_value([0.0, 0.0], [a, b]) == pytest.approx(1 / (2 * math.pi * a * b), rel=1e-14)


@pytest.mark.parametrize("diff,bw", [([1.0], [1.0, 2.0]), ([1.0], [0.0]), ([1.0], [-1.0])])
def test_kernel_errors(diff, bw):
    with pytest.raises(InvalidArgumentError):
        gaussian_kernel_value(diff, bw)


def test_sample_validation():
    with pytest.raises(InvalidArgumentError):
        Sample(np.zeros((3, 1)), np.zeros((4, 1)))
    with pytest.raises(InvalidArgumentError):
        Sample(np.array([0.0, np.nan]), np.zeros(2))
    s = Sample(np.arange(5.0), np.arange(5.0))
    assert (s.n, s.p, s.q) == (5, 1, 1)


def test_bandwidths_validation():
    with pytest.raises(InvalidArgumentError):
        Bandwidths([1.0, 0.0], [1.0])
    with pytest.raises(InvalidArgumentError):
        Bandwidths([1.0], [np.inf])
    assert Bandwidths([1.0], [2.0]) == Bandwidths(np.array([1.0]), (2.0,))


def test_grams_constant_sample():
    s = Sample(np.ones((6, 2)), np.full((6, 1), 3.0))
    g = compute_grams(s, Bandwidths([0.5, 2.0], [1.5]))
    assert np.all(g.k == gaussian_kernel_value([0.0, 0.0], [0.5, 2.0]))
    assert np.all(g.l == gaussian_kernel_value([0.0], [1.5]))


def test_grams_hand_sample():
    s = Sample(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.0, 0.0]))
    g = compute_grams(s, Bandwidths([1.0], [1.0]))
    assert g.k[0, 1] == pytest.approx(K_1_1, rel=1e-14)
    assert g.k[1, 2] == pytest.approx(K_1_1, rel=1e-14)


def test_grams_invariants(rng):
    s = random_sample(rng, 30, 2, 3)
    bw = Bandwidths([0.7, 1.1], [0.4, 0.9, 2.0])
    g = compute_grams(s, bw)
    assert np.array_equal(g.k, g.k.T) and np.array_equal(g.l, g.l.T)
    assert np.all(np.diag(g.k) == gaussian_kernel_value([0.0, 0.0], bw.lam))
    assert np.all(g.k > 0) and np.all(g.k <= g.k[0, 0])
    expect = g.k.sum(axis=1) - np.diag(g.k)
    np.testing.assert_allclose(g.row_sums_k_offdiag, expect, rtol=1e-12)
    assert g.k[3, 7] == pytest.approx(gaussian_kernel_value(s.x[3] - s.x[7], bw.lam), rel=1e-13)
    with pytest.raises(InvalidArgumentError):
        compute_grams(s, Bandwidths([1.0], [1.0, 1.0, 1.0]))


def test_empirical_bandwidths_hand():
    s = Sample(np.array([0.0, 2.0]), np.array([1.0, 5.0]))
    bw = empirical_bandwidths(s)
    assert bw.lam[0] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert bw.mu[0] == pytest.approx(math.sqrt(8), rel=1e-15)


def test_empirical_bandwidths_divisor(rng):
    # the pairwise-difference form equals the n-1 divisor standard deviation
    for n in (5, 17, 100):
        x = rng.normal(size=n)
        s = Sample(x, rng.normal(size=n))
        pairwise = np.sum((x[:, None] - x[None, :]) ** 2) / (2 * n * (n - 1))
        lam = empirical_bandwidths(s).lam[0]
        assert lam**2 == pytest.approx(pairwise, rel=1e-12)
        assert lam == pytest.approx(np.std(x, ddof=1), rel=1e-12)


def test_empirical_bandwidths_isotropic_and_homogeneous(rng):
    s = random_sample(rng, 40, 3, 2)
    bw = empirical_bandwidths(s)
    assert len(bw.lam) == 3 and np.all(bw.lam == bw.lam[0])
    scaled = empirical_bandwidths(Sample(4.5 * s.x, s.y))
    assert scaled.lam[0] == pytest.approx(4.5 * bw.lam[0], rel=1e-12)
    assert scaled.mu[0] == pytest.approx(bw.mu[0], rel=1e-15)


def test_empirical_bandwidths_degenerate():
    with pytest.raises(DegenerateSampleError):
        empirical_bandwidths(Sample(np.ones(5), np.arange(5.0)))


def test_assumption_a2():
    assert check_assumption_a2(Bandwidths([0.5], [0.5]), 100, 0.05)
    assert not check_assumption_a2(Bandwidths([0.5], [0.5]), 100, 0.5)
    assert not check_assumption_a2(Bandwidths([2.0], [1.0]), 10**6, 0.05)


def test_sobolev_bandwidths():
    bw = sobolev_optimal_bandwidths(100, 1.0, 1, 1)
    assert bw.lam[0] == pytest.approx(N100_THIRD, rel=1e-14)
    assert bw.mu[0] == pytest.approx(N100_THIRD, rel=1e-14)
    assert sobolev_optimal_bandwidths(100, 10.0, 1, 1).lam[0] == pytest.approx(N100_2_42, rel=1e-14)
    one = sobolev_optimal_bandwidths(1, 2.5, 2, 3)
    assert np.all(one.lam == 1.0) and np.all(one.mu == 1.0)


def test_nikolskii_bandwidths():
    bw = nikolskii_optimal_bandwidths(100, [1.0], [1.0])
    assert bw.lam[0] == pytest.approx(N100_THIRD, rel=1e-14)
    one = nikolskii_optimal_bandwidths(1, [0.5, 2.0], [1.0])
    assert np.all(one.lam == 1.0) and np.all(one.mu == 1.0)
    for bad in ([0.0], [2.5], [-1.0]):
        with pytest.raises(InvalidArgumentError):
            nikolskii_optimal_bandwidths(100, bad, [1.0])


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 10**6),
    delta=st.floats(0.05, 2.0),
    p=st.integers(1, 4),
    q=st.integers(1, 4),
)
def test_nikolskii_reduces_to_sobolev(n, delta, p, q):
    nik = nikolskii_optimal_bandwidths(n, [delta] * p, [delta] * q)
    sob = sobolev_optimal_bandwidths(n, delta, p, q)
    np.testing.assert_allclose(nik.lam, sob.lam, rtol=1e-12)
    np.testing.assert_allclose(nik.mu, sob.mu, rtol=1e-12)
