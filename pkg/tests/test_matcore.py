import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gnpn.errors import DimensionMismatch, NonPositiveVariance, NotPositiveDefinite
from gnpn.matcore import (
    as_symmetric,
    correlation_from_covariance,
    invert_spd,
    is_positive_definite,
    matrix_from_json,
    matrix_to_json,
    rng_stream,
    spectral_norm,
)

from conftest import ALPHA, random_spd


class TestInvertSpd:
    def test_identity(self):
        assert np.array_equal(invert_spd(np.eye(8)), np.eye(8))

    def test_circle_sigma(self, circle):
        s = invert_spd(circle.gamma_rho)
        assert np.round(s[0, 0], 4) == 1.0042
        assert np.round(s[0, 1], 4) == -0.0457
        assert np.round(s[0, 2], 4) == 0.0021

    def test_diagonal(self):
        np.testing.assert_allclose(invert_spd(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), atol=1e-15)

    def test_result_is_exactly_symmetric(self):
        m = random_spd(np.random.default_rng(0), 7)
        inv = invert_spd(m)
        assert np.array_equal(inv, inv.T)
        assert np.max(np.abs(m @ inv - np.eye(7))) < 1e-10

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            invert_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            invert_spd(np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionMismatch):
            invert_spd(np.ones((2, 3)))


class TestSpectralNorm:
    def test_zero(self):
        assert spectral_norm(np.zeros((4, 4))) == 0.0

    def test_circle_b(self, circle):
        assert spectral_norm(circle.b) == pytest.approx(2 * ALPHA, rel=1e-12)

    def test_diagonal(self):
        assert spectral_norm(np.diag([-3.0, 2.0])) == pytest.approx(3.0, rel=1e-12)

    def test_matches_brute_force_operator_norm(self):
        m = random_spd(np.random.default_rng(1), 5) - 3 * np.eye(5)
        assert spectral_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-10)


class TestCorrelation:
    def test_identity(self):
        assert np.array_equal(correlation_from_covariance(np.eye(3)), np.eye(3))

    def test_hand_scaled(self):
        np.testing.assert_allclose(correlation_from_covariance([[4.0, 2.0], [2.0, 1.0]]), np.ones((2, 2)))

    def test_scaled_printed_entry(self):
        m = np.array([[15.0, -0.4156], [-0.4156, 15.0]])
        assert correlation_from_covariance(m)[0, 1] == pytest.approx(-0.4156 / 15, abs=1e-12)
        assert round(correlation_from_covariance(m)[0, 1], 4) == -0.0277

    def test_non_positive_variance(self):
        with pytest.raises(NonPositiveVariance):
            correlation_from_covariance([[1.0, 0.0], [0.0, 0.0]])


class TestJson:
    def test_round_trip(self):
        m = random_spd(np.random.default_rng(2), 4)
        text = json.dumps(matrix_to_json(m))
        assert np.array_equal(matrix_from_json(text), m)

    def test_symmetrizes_small_asymmetry(self):
        obj = {"dim": 2, "rows": [[1.0, 0.5 + 1e-12], [0.5, 1.0]]}
        m = matrix_from_json(obj)
        assert m[0, 1] == m[1, 0]

    def test_rejects_large_asymmetry(self):
        with pytest.raises(ValueError):
            matrix_from_json({"dim": 2, "rows": [[1.0, 0.5], [0.4, 1.0]]})

    def test_rejects_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            matrix_from_json({"dim": 3, "rows": [[1.0, 0.0], [0.0, 1.0]]})


class TestRng:
    def test_same_stream_same_draws(self):
        a = rng_stream(5, 3).standard_normal(100)
        b = rng_stream(5, 3).standard_normal(100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = rng_stream(5, 3).standard_normal(1000)
        b = rng_stream(5, 4).standard_normal(1000)
        assert not np.array_equal(a, b)
        # independent streams: sample correlation near 0
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.15

    def test_tuple_stream_ids(self):
        assert np.array_equal(rng_stream(1, (2, 3)).random(5), rng_stream(1, [2, 3]).random(5))
        assert not np.array_equal(rng_stream(1, (2, 3)).random(5), rng_stream(1, (3, 2)).random(5))


spd_seeds = st.integers(0, 2**32 - 1)


@given(seed=spd_seeds, d=st.integers(1, 12), log_cond=st.floats(0.0, 6.0))
def test_double_inverse_recovers_matrix(seed, d, log_cond):
    m = random_spd(np.random.default_rng(seed), d, 10.0 ** log_cond)
    back = invert_spd(invert_spd(m))
    assert np.max(np.abs(back - m)) < 1e-8 * max(1.0, np.max(np.abs(m)))


@given(seed=spd_seeds, d=st.integers(1, 10), c=st.sampled_from([-2.0, 0.5]))
def test_spectral_norm_is_homogeneous(seed, d, c):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    m = a + a.T
    assert spectral_norm(c * m) == pytest.approx(abs(c) * spectral_norm(m), rel=1e-12, abs=1e-300)


@given(seed=spd_seeds, d=st.integers(1, 10), log_scale=st.floats(0, 3))
def test_correlation_is_bounded_with_unit_diagonal(seed, d, log_scale):
    rng = np.random.default_rng(seed)
    m = random_spd(rng, d, 1e3)
    scales = 10.0 ** rng.uniform(-log_scale, log_scale, d) if log_scale else np.ones(d)
    r = correlation_from_covariance(m * np.outer(scales, scales))
    assert np.all(np.diag(r) == 1.0)
    assert np.all(np.abs(r) <= 1 + 1e-12)
    assert np.array_equal(r, r.T)


@given(seed=spd_seeds, d=st.integers(1, 8))
def test_as_symmetric_is_idempotent_and_pd_detection(seed, d):
    m = random_spd(np.random.default_rng(seed), d)
    assert np.array_equal(as_symmetric(as_symmetric(m)), as_symmetric(m))
    assert is_positive_definite(m)
    assert not is_positive_definite(-m)
