from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cauchypca.errors import ZeroScaleError
from cauchypca.prep import (
    CenteringSpec,
    column_median_center,
    lower_median,
    mad_scale,
    median_abs_dev_scale,
    preprocess,
    spatial_median,
)
from oracles import random_orthogonal, spatial_median_grid, sum_distances

seeds = st.integers(0, 2**32 - 1)
cells = st.floats(-1e3, 1e3, allow_nan=False)


class TestCenteringSpec:
    def test_bad_mode(self):
        with pytest.raises(ValueError):
            CenteringSpec(mode="mean")

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            CenteringSpec(scale="std")


class TestColumnMedian:
    def test_odd(self):
        Xc, center = column_median_center(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_array_equal(Xc[:, 0], [-1, 0, 1])
        assert center[0] == 2.0

    def test_even_lower(self):
        Xc, center = column_median_center(np.array([[1.0], [3.0]]))
        np.testing.assert_array_equal(Xc[:, 0], [0, 2])

    def test_constant(self):
        Xc, _ = column_median_center(np.full((4, 2), 7.5))
        assert not np.any(Xc)

    @settings(max_examples=100)
    @given(st.tuples(st.integers(1, 20), st.integers(1, 5)).flatmap(lambda s: arrays(float, s, elements=cells)))
    def test_median_exactly_zero(self, X):
        Xc, _ = column_median_center(X)
        assert np.all(lower_median(Xc) == 0.0)


class TestSpatialMedian:
    def test_triangle(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        np.testing.assert_allclose(spatial_median(X), X.mean(0), atol=1e-8)

    def test_majority_point(self):
        a, b = np.array([1.0, 2.0]), np.array([4.0, -1.0])
        X = np.vstack([a, a, a, b])
        m = spatial_median(X)
        np.testing.assert_array_equal(m, a)
        _, best = spatial_median_grid(X, -5, 5, 201)
        assert sum_distances(X, m) <= best + 1e-12

    def test_two_points(self):
        np.testing.assert_array_equal(spatial_median(np.array([[0.0, 0.0], [2.0, 4.0]])), [1.0, 2.0])

    def test_identical_rows(self):
        np.testing.assert_array_equal(spatial_median(np.ones((3, 2))), [1.0, 1.0])

    def test_grid_oracle(self):
        X = np.random.default_rng(0).standard_normal((9, 2))
        m = spatial_median(X)
        _, best = spatial_median_grid(X, -2, 2, 401)
        assert sum_distances(X, m) <= best + 1e-9

    @settings(max_examples=100)
    @given(seeds, st.integers(3, 15), st.integers(1, 4))
    def test_translation_equivariant(self, seed, n, p):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        t = rng.uniform(-10, 10, p)
        np.testing.assert_allclose(spatial_median(X + t), spatial_median(X) + t, atol=1e-8)

    @settings(max_examples=100)
    @given(seeds, st.integers(3, 15), st.integers(1, 4))
    def test_rotation_equivariant(self, seed, n, p):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        R = random_orthogonal(rng, p)
        np.testing.assert_allclose(spatial_median(X @ R), spatial_median(X) @ R, atol=1e-8)


class TestMadScale:
    def test_example(self):
        Xs, s = mad_scale(np.array([[-1.0], [0.0], [1.0]]))
        assert s[0] == pytest.approx(2 / 3)
        np.testing.assert_allclose(Xs[:, 0], [-1.5, 0.0, 1.5])

    def test_constant_column(self):
        with pytest.raises(ZeroScaleError) as info:
            mad_scale(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
        assert info.value.column == 1

    def test_about_mean(self):
        Xs, s = mad_scale(np.array([[0.0], [0.0], [3.0]]), about="mean")
        assert s[0] == pytest.approx(4 / 3)

    @settings(max_examples=100)
    @given(seeds, st.integers(2, 20), st.integers(1, 5))
    def test_unit_deviation(self, seed, n, p):
        X = np.random.default_rng(seed).standard_cauchy((n, p))
        Xs, _ = mad_scale(X)
        dev = np.mean(np.abs(Xs - lower_median(Xs)), axis=0)
        np.testing.assert_allclose(dev, 1.0, atol=1e-12)

    def test_median_abs_dev(self):
        Xs, s = median_abs_dev_scale(np.array([[-1.0], [0.0], [1.0], [10.0]]))
        assert s[0] == 1.0
        with pytest.raises(ZeroScaleError):
            median_abs_dev_scale(np.array([[0.0], [0.0], [0.0], [1.0]]))


class TestPreprocess:
    def test_modes(self):
        X = np.random.default_rng(1).standard_normal((10, 3)) + 5
        Xp, c, s = preprocess(X, CenteringSpec("none", "none"))
        np.testing.assert_array_equal(Xp, X)
        Xp, c, s = preprocess(X, CenteringSpec("spatial-median", "none"))
        np.testing.assert_allclose(c, spatial_median(X))
        Xp, c, s = preprocess(X)
        np.testing.assert_allclose(Xp * s + c, X)
