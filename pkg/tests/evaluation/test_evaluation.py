"""
Tests for Procrustes alignment, regression, rank correlation and transport distances.
"""

import itertools
import unittest

import numpy as np
import pytest
from scipy.optimize import minimize

from geolift.core import DistanceMatrix, PointCloud, Seed
from geolift.errors import (
    DataConditionError,
    DimensionError,
    ValidationError,
    ZeroVarianceError,
)
from geolift.evaluation import (
    assignment_cost,
    earth_mover_distance,
    geodesic_regression,
    monotonicity_diagnostic,
    procrustes_align,
    recovery_error,
    sample_pairs,
)


def rotation(angle):
    return np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])


def nelder_mead_residual(source, target):
    """Best similarity-transform RMS found by a derivative-free search over both orientations."""
    best = np.inf
    for flip in (np.eye(2), np.diag([1.0, -1.0])):
        flipped = source @ flip.T

        def objective(params):
            scale = np.exp(params[0])
            moved = scale * flipped @ rotation(params[1]).T + params[2:]
            return np.sum((moved - target) ** 2)

        for angle in np.linspace(-np.pi, np.pi, 12, endpoint=False):
            start = np.array([0.0, angle, 0.0, 0.0])
            fit = minimize(
                objective,
                start,
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000, "maxfev": 40000},
            )
            best = min(best, float(np.sqrt(fit.fun / source.shape[0])))
    return best


def brute_force_assignment(cost):
    n = cost.shape[0]
    rows = np.arange(n)
    return min(float(cost[rows, list(p)].sum()) for p in itertools.permutations(range(n)))


class TestProcrustes(unittest.TestCase):
    def test_exact_similarity_transform(self):
        source = np.random.default_rng(0).standard_normal((20, 2))
        r = rotation(0.7)
        target = 2.0 * source @ r.T + np.array([1.0, -3.0])
        result = procrustes_align(PointCloud(source), PointCloud(target))
        self.assertAlmostEqual(result.scale, 2.0, places=10)
        np.testing.assert_allclose(result.rotation, r, atol=1e-10)
        np.testing.assert_allclose(result.translation, [1.0, -3.0], atol=1e-10)
        self.assertLessEqual(result.residual_rms, 1e-10)
        np.testing.assert_allclose(result.apply(PointCloud(source)).coords, target, atol=1e-10)

    def test_identity(self):
        cloud = PointCloud(np.random.default_rng(1).standard_normal((10, 3)))
        result = procrustes_align(cloud, cloud)
        self.assertAlmostEqual(result.scale, 1.0, places=12)
        np.testing.assert_allclose(result.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(result.translation, 0.0, atol=1e-12)
        self.assertAlmostEqual(result.residual_rms, 0.0, places=12)

    def test_reflection_is_allowed(self):
        source = np.random.default_rng(2).standard_normal((15, 2))
        mirrored = source * np.array([1.0, -1.0])
        self.assertLessEqual(recovery_error(PointCloud(source), PointCloud(mirrored)), 1e-12)

    def test_matches_independent_optimizer(self):
        rng = np.random.default_rng(3)
        source = rng.standard_normal((50, 2))
        target = rng.standard_normal((50, 2))
        expected = nelder_mead_residual(source, target)
        actual = procrustes_align(PointCloud(source), PointCloud(target)).residual_rms
        self.assertAlmostEqual(actual, expected, delta=1e-6)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            procrustes_align(PointCloud(np.zeros((4, 2))), PointCloud(np.zeros((5, 2))))
        with self.assertRaises(DimensionError):
            procrustes_align(PointCloud(np.zeros((1, 2))), PointCloud(np.zeros((1, 2))))

    def test_degenerate_source(self):
        with self.assertRaises(DataConditionError):
            procrustes_align(PointCloud(np.ones((4, 2))), PointCloud(np.eye(4)[:, :2]))


class TestMonotonicity(unittest.TestCase):
    def test_monotone_transform(self):
        x = np.linspace(0.0, 1.0, 30)
        self.assertAlmostEqual(monotonicity_diagnostic(x, np.exp(3 * x)), 1.0, places=12)
        self.assertAlmostEqual(monotonicity_diagnostic(PointCloud(x), -(x**3)), -1.0, places=12)

    def test_constant_input(self):
        with self.assertRaises(ZeroVarianceError) as ctx:
            monotonicity_diagnostic(np.arange(5.0), np.ones(5))
        self.assertEqual(ctx.exception.entity, "covariate")

    def test_validation(self):
        with self.assertRaises(ValidationError):
            monotonicity_diagnostic([1.0, 2.0], [1.0, 2.0])
        with self.assertRaises(DimensionError):
            monotonicity_diagnostic([1.0, 2.0, 3.0], [1.0, 2.0])
        with self.assertRaises(DimensionError):
            monotonicity_diagnostic(PointCloud(np.zeros((3, 2))), [1.0, 2.0, 3.0])


class TestRegression(unittest.TestCase):
    def test_exact_proportional(self):
        dz = DistanceMatrix.from_points(PointCloud(np.random.default_rng(4).random((12, 2))))
        dhat = DistanceMatrix(0.5 * dz.entries)
        result = geodesic_regression(dhat, dz)
        self.assertAlmostEqual(result.slope, 0.5, places=12)
        self.assertAlmostEqual(result.r2, 1.0, places=12)
        self.assertEqual(result.pairs, 66)
        self.assertEqual(result.excluded, 0)

    def test_infinite_pairs_are_excluded(self):
        dz = DistanceMatrix(np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]))
        dhat = DistanceMatrix(np.array([[0.0, 2.0, np.inf], [2.0, 0.0, 2.0], [np.inf, 2.0, 0.0]]))
        result = geodesic_regression(dhat, dz)
        self.assertEqual(result.slope, 2.0)
        self.assertEqual((result.pairs, result.excluded), (2, 1))

    def test_all_zero_latent_distances(self):
        with self.assertRaises(ZeroVarianceError):
            geodesic_regression(
                DistanceMatrix(np.ones((3, 3)) - np.eye(3)), DistanceMatrix(np.zeros((3, 3)))
            )


class TestAssignmentAndEmd(unittest.TestCase):
    def test_assignment_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for size in range(1, 8):
            cost = rng.random((size, size))
            self.assertEqual(assignment_cost(cost), brute_force_assignment(cost))

    def test_assignment_needs_square_matrix(self):
        with self.assertRaises(DimensionError):
            assignment_cost(np.zeros((2, 3)))

    def test_identical_groups_have_zero_distance(self):
        d = DistanceMatrix.from_points(PointCloud(np.random.default_rng(6).random((20, 2))))
        group = list(range(10))
        result = earth_mover_distance(d, group, group, sample=10, seed=Seed(1), reps=3)
        self.assertEqual(result.mean, 0.0)
        self.assertEqual(result.stderr, 0.0)

    def test_separated_groups(self):
        points = np.vstack([np.zeros((5, 1)), np.full((5, 1), 3.0)])
        d = DistanceMatrix.from_points(PointCloud(points))
        result = earth_mover_distance(d, range(5), range(5, 10), sample=4, seed=Seed(2), reps=5)
        self.assertEqual(result.mean, 3.0)
        self.assertEqual(result.values.shape, (5,))

    def test_reproducible(self):
        d = DistanceMatrix.from_points(PointCloud(np.random.default_rng(7).random((30, 2))))
        first = earth_mover_distance(d, range(15), range(15, 30), 5, Seed(3), reps=10)
        second = earth_mover_distance(d, range(15), range(15, 30), 5, Seed(3), reps=10)
        self.assertTrue(np.array_equal(first.values, second.values))
        self.assertAlmostEqual(first.stderr, first.values.std(ddof=1) / np.sqrt(10))

    def test_group_too_small(self):
        d = DistanceMatrix(np.zeros((4, 4)))
        with self.assertRaises(ValidationError):
            earth_mover_distance(d, [0, 1], [2, 3], sample=3, seed=Seed(0))

    def test_disconnected_pairs(self):
        d = DistanceMatrix(np.array([[0.0, np.inf], [np.inf, 0.0]]))
        with self.assertRaises(DataConditionError):
            earth_mover_distance(d, [0], [1], sample=1, seed=Seed(0), reps=1)


def test_sample_pairs_caps_and_orders():
    dz = DistanceMatrix.from_points(PointCloud(np.arange(30.0)))
    dhat = DistanceMatrix(2.0 * dz.entries)
    sample = sample_pairs(dhat, dz, 100, Seed(4))
    assert sample.rows.size == 100
    keys = sample.rows * 30 + sample.cols
    assert np.all(np.diff(keys) > 0)
    assert np.all(sample.rows < sample.cols)
    np.testing.assert_array_equal(sample.dhat, 2.0 * sample.dz)


def test_sample_pairs_keeps_everything_below_cap():
    d = DistanceMatrix.from_points(PointCloud(np.arange(5.0)))
    sample = sample_pairs(d, d, 100, Seed(0))
    assert sample.rows.size == 10


def test_regression_needs_two_finite_pairs():
    d = DistanceMatrix(np.array([[0.0, np.inf], [np.inf, 0.0]]))
    with pytest.raises(DataConditionError):
        geodesic_regression(d, d)
