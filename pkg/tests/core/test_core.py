"""
Unit tests for the core containers and matrix primitives.
"""

import unittest

import numpy as np
import pytest

from geolift.core import (
    DistanceMatrix,
    MatrixKind,
    PointCloud,
    Seed,
    SimilarityMatrix,
    double_center,
    normalize_signs,
    symmetric_eigs,
)
from geolift.errors import (
    ConvergenceError,
    DimensionError,
    DisconnectedGraphError,
    ValidationError,
)


def jacobi_eigenvalues(a, sweeps=100, tol=1e-14):
    """Textbook cyclic Jacobi rotations; returns eigenvalues in ascending order."""
    m = np.array(a, dtype=float)
    n = m.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(m, -1) ** 2))
        if off < tol * np.linalg.norm(m):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p, q]) < 1e-300:
                    continue
                theta = (m[q, q] - m[p, p]) / (2.0 * m[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                m = rot.T @ m @ rot
    return np.sort(np.diag(m))


def random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2.0


class TestSymmetricEigs(unittest.TestCase):
    def test_diagonal_matrix(self):
        m = SimilarityMatrix.from_dense(np.diag([4.0, 1.0]))
        result = symmetric_eigs(m, 1)
        np.testing.assert_allclose(result.values, [4.0])
        np.testing.assert_allclose(np.abs(result.vectors[:, 0]), [1.0, 0.0], atol=1e-12)

    def test_magnitude_tie_prefers_positive(self):
        m = SimilarityMatrix.from_dense([[0.0, 2.0], [2.0, 0.0]])
        result = symmetric_eigs(m, 2)
        np.testing.assert_allclose(result.values, [2.0, -2.0], atol=1e-12)
        s = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(np.abs(result.vectors[:, 0]), [s, s], atol=1e-12)
        np.testing.assert_allclose(np.abs(result.vectors[:, 1]), [s, s], atol=1e-12)
        self.assertLess(result.vectors[0, 1] * result.vectors[1, 1], 0.0)

    def test_matches_jacobi_oracle(self):
        a = random_symmetric(20, 7)
        result = symmetric_eigs(SimilarityMatrix.from_dense(a), 20)
        np.testing.assert_allclose(np.sort(result.values), jacobi_eigenvalues(a), atol=1e-9)
        rebuilt = result.vectors @ np.diag(result.values) @ result.vectors.T
        self.assertLessEqual(np.linalg.norm(a - rebuilt), 1e-8 * np.linalg.norm(a))

    def test_orthonormal_columns(self):
        a = random_symmetric(15, 3)
        result = symmetric_eigs(SimilarityMatrix.from_dense(a), 6)
        np.testing.assert_allclose(result.vectors.T @ result.vectors, np.eye(6), atol=1e-10)

    def test_ordering_by_magnitude(self):
        a = random_symmetric(12, 11)
        values = symmetric_eigs(SimilarityMatrix.from_dense(a), 12).values
        self.assertTrue(np.all(np.diff(np.abs(values)) <= 1e-12))

    def test_requested_rank_out_of_range(self):
        m = SimilarityMatrix.from_dense(np.eye(3))
        with self.assertRaises(DimensionError):
            symmetric_eigs(m, 4)
        with self.assertRaises(DimensionError):
            symmetric_eigs(m, 0)

    def test_deterministic(self):
        m = SimilarityMatrix.from_dense(random_symmetric(30, 5))
        first = symmetric_eigs(m, 4)
        second = symmetric_eigs(m, 4)
        self.assertTrue(np.array_equal(first.values, second.values))
        self.assertTrue(np.array_equal(first.vectors, second.vectors))


def test_iterative_path_agrees_with_dense():
    a = random_symmetric(60, 2)
    m = SimilarityMatrix.from_dense(a)
    dense = symmetric_eigs(m, 4)
    iterative = symmetric_eigs(m, 4, seed=Seed(9), dense_threshold=10)
    np.testing.assert_allclose(iterative.values, dense.values, rtol=1e-8)
    for k in range(4):
        overlap = abs(float(iterative.vectors[:, k] @ dense.vectors[:, k]))
        assert overlap == pytest.approx(1.0, abs=1e-6)


def test_iterative_path_on_sparse_storage():
    rng = np.random.default_rng(4)
    n = 80
    # A random diagonal breaks the +/- pairing of a bipartite path spectrum.
    rows = np.concatenate([np.arange(n - 1), np.arange(n)])
    cols = np.concatenate([np.arange(1, n), np.arange(n)])
    values = rng.uniform(0.5, 1.5, size=rows.size)
    m = SimilarityMatrix.from_upper_triplets(n, rows, cols, values)
    dense = symmetric_eigs(SimilarityMatrix.from_dense(m.to_dense()), 3)
    sparse = symmetric_eigs(m, 3, dense_threshold=10)
    np.testing.assert_allclose(sparse.values, dense.values, rtol=1e-8)


def test_iterative_non_convergence_reports_residual():
    m = SimilarityMatrix.from_dense(random_symmetric(300, 1))
    with pytest.raises(ConvergenceError):
        symmetric_eigs(m, 5, dense_threshold=10, max_iter=1)


def test_non_finite_entries_rejected():
    with pytest.raises(ValidationError):
        SimilarityMatrix.from_dense([[0.0, np.nan], [np.nan, 0.0]])


def test_normalize_signs():
    flipped = normalize_signs(np.array([[0.1, 0.5], [-0.9, 0.5]]))
    np.testing.assert_allclose(flipped, [[-0.1, 0.5], [0.9, 0.5]])


class TestSimilarityMatrix(unittest.TestCase):
    def test_asymmetric_dense_rejected(self):
        with self.assertRaises(ValidationError):
            SimilarityMatrix.from_dense([[0.0, 1.0], [0.5, 0.0]])

    def test_adjacency_invariants(self):
        with self.assertRaises(ValidationError):
            SimilarityMatrix.from_dense([[0.0, 2.0], [2.0, 0.0]], kind=MatrixKind.ADJACENCY)
        with self.assertRaises(ValidationError):
            SimilarityMatrix.from_dense([[1.0, 1.0], [1.0, 0.0]], kind=MatrixKind.ADJACENCY)

    def test_correlation_invariants(self):
        with self.assertRaises(ValidationError):
            SimilarityMatrix.from_dense([[1.0, 1.5], [1.5, 1.0]], kind=MatrixKind.CORRELATION)
        with self.assertRaises(ValidationError):
            SimilarityMatrix.from_dense([[0.9, 0.1], [0.1, 1.0]], kind=MatrixKind.CORRELATION)

    def test_triplets_fold_and_sum(self):
        m = SimilarityMatrix.from_upper_triplets(3, [0, 1, 2], [1, 0, 2], [1.0, 2.0, 4.0])
        self.assertTrue(m.is_sparse)
        self.assertEqual(m.entry(0, 1), 3.0)
        self.assertEqual(m.entry(1, 0), 3.0)
        self.assertEqual(m.entry(2, 2), 4.0)
        np.testing.assert_array_equal(m.to_dense(), [[0, 3, 0], [3, 0, 0], [0, 0, 4]])

    def test_triplet_index_out_of_range(self):
        with self.assertRaises(DimensionError):
            SimilarityMatrix.from_upper_triplets(2, [0], [2], [1.0])

    def test_upper_triplets_roundtrip(self):
        m = SimilarityMatrix.from_upper_triplets(
            4, [2, 0], [3, 1], [1.0, 1.0], MatrixKind.ADJACENCY
        )
        rows, cols, values = m.upper_triplets()
        self.assertEqual(rows.tolist(), [0, 2])
        self.assertEqual(cols.tolist(), [1, 3])
        self.assertEqual(values.tolist(), [1.0, 1.0])
        dense = SimilarityMatrix.from_dense(m.to_dense(), kind=MatrixKind.ADJACENCY)
        self.assertEqual(dense.frobenius_norm(), pytest.approx(m.frobenius_norm()))


class TestPointAndDistance(unittest.TestCase):
    def test_point_cloud_validation(self):
        with self.assertRaises(ValidationError):
            PointCloud(np.array([[0.0, np.inf]]))
        cloud = PointCloud(np.array([1.0, 2.0, 3.0]))
        self.assertEqual((cloud.n, cloud.dim), (3, 1))

    def test_distance_matrix_invariants(self):
        with self.assertRaises(ValidationError):
            DistanceMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
        with self.assertRaises(ValidationError):
            DistanceMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with self.assertRaises(ValidationError):
            DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
        d = DistanceMatrix(np.array([[0.0, np.inf], [np.inf, 0.0]]))
        self.assertTrue(d.has_disconnected)

    def test_from_points(self):
        d = DistanceMatrix.from_points(PointCloud(np.array([[0.0, 0.0], [3.0, 4.0]])))
        self.assertEqual(d.entries[0, 1], 5.0)


class TestDoubleCenter(unittest.TestCase):
    def test_single_point(self):
        np.testing.assert_array_equal(double_center(DistanceMatrix(np.zeros((1, 1)))), [[0.0]])

    def test_two_points_on_a_line(self):
        b = double_center(DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]])))
        np.testing.assert_allclose(b, [[0.25, -0.25], [-0.25, 0.25]])

    def test_rank_of_euclidean_input(self):
        points = np.random.default_rng(0).standard_normal((5, 3))
        b = double_center(DistanceMatrix.from_points(PointCloud(points)))
        values = np.sort(np.linalg.eigvalsh(b))[::-1]
        self.assertLessEqual(abs(values[3]), 1e-9 * values[0])
        self.assertGreaterEqual(values[-1], -1e-9 * values[0])
        np.testing.assert_allclose(b.sum(axis=1), 0.0, atol=1e-9 * np.linalg.norm(b))

    def test_disconnected_rejected(self):
        d = DistanceMatrix(np.array([[0.0, np.inf], [np.inf, 0.0]]))
        with self.assertRaises(DisconnectedGraphError):
            double_center(d)


class TestSeed(unittest.TestCase):
    def test_same_seed_same_draws(self):
        self.assertTrue(
            np.array_equal(Seed(123).generator().random(5), Seed(123).generator().random(5))
        )

    def test_streams_are_independent_of_order(self):
        seed = Seed(42)
        direct = seed.stream(3).random(4)
        seed.stream(0).random(100)
        self.assertTrue(np.array_equal(direct, seed.stream(3).random(4)))
        self.assertFalse(np.array_equal(direct, seed.stream(2).random(4)))

    def test_spawn_is_deterministic(self):
        self.assertEqual(Seed(5).spawn(1), Seed(5).spawn(1))
        self.assertNotEqual(Seed(5).spawn(1), Seed(5).spawn(2))

    def test_invalid_seed(self):
        with self.assertRaises(ValidationError):
            Seed(-1)
        with self.assertRaises(ValidationError):
            Seed(2**64)
