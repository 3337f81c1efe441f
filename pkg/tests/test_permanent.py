import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsnoise.errors import DimensionError, PatternError, SizeCapError
from bsnoise.linalg import RngStream, complex_gaussian, haar_unitary
from bsnoise.permanent import (
    build_submatrix,
    enumerate_distribution,
    estimate_permanent_gurvits,
    output_probability,
    permanent_glynn,
    permanent_naive,
    permanent_ryser,
    rys_polynomial,
    sign_vectors,
)


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestNaive:
    def test_identity(self):
        assert permanent_naive(np.eye(4)) == 1

    def test_ones(self):
        assert permanent_naive(np.ones((3, 3))) == 6

    def test_2x2(self):
        a, b, c, d = 1 + 2j, -0.5, 3j, 2.0
        assert permanent_naive([[a, b], [c, d]]) == pytest.approx(a * d + b * c, abs=1e-15)

    def test_cap(self):
        with pytest.raises(SizeCapError):
            permanent_naive(np.eye(10))


class TestExact:
    @pytest.mark.parametrize("fn", [permanent_ryser, permanent_glynn])
    def test_empty_and_identity(self, fn):
        assert fn(np.zeros((0, 0))) == 1
        assert fn(np.eye(5)) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("fn", [permanent_ryser, permanent_glynn])
    def test_identity_minor(self, fn):
        assert fn(np.eye(9)[:4, :4]) == pytest.approx(1.0, abs=1e-14)

    def test_zero(self):
        assert permanent_glynn(np.zeros((6, 6))) == 0

    @pytest.mark.parametrize("n", range(1, 13))
    def test_ones_factorial(self, n):
        assert rel_err(permanent_ryser(np.ones((n, n))), math.factorial(n)) < 1e-12
        assert rel_err(permanent_glynn(np.ones((n, n))), math.factorial(n)) < 1e-12

    def test_matches_naive_6x6(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = complex_gaussian(rng, (6, 6))
            oracle = permanent_naive(a)
            assert rel_err(permanent_ryser(a), oracle) < 1e-10

    def test_glynn_matches_ryser(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = complex_gaussian(rng, (6, 6))
            assert rel_err(permanent_glynn(a), permanent_ryser(a)) < 1e-12

    @pytest.mark.parametrize("n", [18, 20])
    def test_large_n_agreement(self, n):
        # scaled unitary minors, the benchmark inputs; incremental row sums must not drift
        a = haar_unitary(n, np.random.default_rng(n))[:n, :n] * math.sqrt(n)
        assert rel_err(permanent_ryser(a), permanent_glynn(a)) <= 1e-10

    def test_cap(self):
        with pytest.raises(SizeCapError):
            permanent_ryser(np.zeros((31, 31)))
        with pytest.raises(DimensionError):
            permanent_glynn(np.zeros((2, 3)))

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 7))
    def test_permutation_and_transpose_invariance(self, seed, n):
        rng = np.random.default_rng(seed)
        a = complex_gaussian(rng, (n, n))
        p = np.eye(n)[rng.permutation(n)]
        q = np.eye(n)[rng.permutation(n)]
        base = permanent_naive(a)
        scale = max(abs(base), 1e-3)
        assert abs(permanent_ryser(p @ a @ q) - base) <= 1e-10 * scale
        assert abs(permanent_glynn(a.T) - base) <= 1e-10 * scale


class TestRys:
    def test_identity_uniform(self):
        n = 4
        assert rys_polynomial(np.eye(n), np.full(n, 1 / math.sqrt(n))) == pytest.approx(1.0, abs=1e-13)

    def test_signed_2x2(self):
        x = np.array([1, -1]) / math.sqrt(2)
        assert rys_polynomial(np.eye(2), x) == pytest.approx(1.0, abs=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            rys_polynomial(np.eye(3), np.ones(2) / math.sqrt(2))

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_exhaustive_sign_mean_is_permanent(self, n):
        v = complex_gaussian(np.random.default_rng(n), (n, n))
        mean = np.mean([rys_polynomial(v, x) for x in sign_vectors(n)])
        assert abs(mean - permanent_naive(v)) <= 1e-10 * max(1.0, abs(permanent_naive(v)))

    def test_complex_phases_average_to_permanent(self):
        # average over the 4th roots of unity per coordinate is exact for degree-1 phases
        n = 3
        v = complex_gaussian(np.random.default_rng(7), (n, n))
        roots = np.exp(0.5j * math.pi * np.arange(4))
        vals = [rys_polynomial(v, np.array(c) / math.sqrt(n)) for c in np.array(np.meshgrid(*[roots] * n)).reshape(n, -1).T]
        assert abs(np.mean(vals) - permanent_naive(v)) < 1e-10


class TestGurvits:
    def test_identity_is_exact(self):
        est = estimate_permanent_gurvits(np.eye(5), 1000, RngStream(1))
        assert est.estimate == pytest.approx(1.0, abs=1e-12)
        assert est.stderr == pytest.approx(0.0, abs=1e-12)

    def test_single_sample_stderr_invalid(self):
        est = estimate_permanent_gurvits(np.eye(3), 1, RngStream(1))
        assert math.isnan(est.stderr) and not est.stderr_valid

    @pytest.mark.parametrize("sampler", ["sign", "phase"])
    def test_unbiased(self, sampler):
        v = haar_unitary(6, RngStream(42))
        est = estimate_permanent_gurvits(v, 100_000, RngStream(43), sampler=sampler)
        assert abs(est.estimate - permanent_naive(v)) <= 3 * est.stderr


class TestSubmatrix:
    def test_identity(self):
        assert np.array_equal(build_submatrix(np.eye(5), 3, (1, 1, 1, 0, 0)), np.eye(3))

    def test_repeated_row(self):
        u = haar_unitary(4, RngStream(0))
        sub = build_submatrix(u, 2, (2, 0, 0, 0))
        assert np.array_equal(sub[0], sub[1])

    def test_hand_check(self):
        u = np.arange(9).reshape(3, 3).astype(complex)
        assert np.array_equal(build_submatrix(u, 2, (0, 1, 1)), [[3, 4], [6, 7]])

    def test_bad_pattern(self):
        with pytest.raises(PatternError):
            build_submatrix(np.eye(3), 2, (1, 0, 0))


class TestProbability:
    def test_identity_point_mass(self):
        assert output_probability(np.eye(6), 3, (1, 1, 1, 0, 0, 0)) == pytest.approx(1.0, abs=1e-14)
        assert output_probability(np.eye(6), 3, (1, 1, 0, 1, 0, 0)) == 0

    def test_normalization_n3_m5(self):
        dist = enumerate_distribution(haar_unitary(5, RngStream(3)), 3)
        assert len(dist) == 35
        assert abs(sum(p for _, p in dist) - 1) < 1e-9
        assert all(0 <= p <= 1 + 1e-9 for _, p in dist)

    def test_single_photon(self):
        u = haar_unitary(3, RngStream(4))
        dist = dict(enumerate_distribution(u, 1))
        for i in range(3):
            s = tuple(int(k == i) for k in range(3))
            assert dist[s] == pytest.approx(abs(u[i, 0]) ** 2, abs=1e-14)

    def test_hong_ou_mandel(self):
        bs = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        dist = dict(enumerate_distribution(bs, 2))
        assert dist[(1, 1)] == pytest.approx(0.0, abs=1e-15)
        assert dist[(2, 0)] == pytest.approx(0.5, abs=1e-14)

    def test_cap(self):
        with pytest.raises(SizeCapError):
            enumerate_distribution(np.eye(40), 10)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 6), data=st.data())
    def test_total_mass(self, seed, m, data):
        n = data.draw(st.integers(1, m))
        dist = enumerate_distribution(haar_unitary(m, RngStream(seed)), n)
        assert abs(sum(p for _, p in dist) - 1) < 1e-9
