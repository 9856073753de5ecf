"""
Tests for the kernel variants, their metric tensors and closed-form geodesics.
"""

import unittest

import numpy as np
import pytest

from geolift.base_kernel import Box, MetricTensor, Sphere
from geolift.errors import (
    AssumptionViolationError,
    DimensionError,
    UnsupportedVariantError,
    ValidationError,
)
from geolift.kernel_catalog import (
    additive_cosine,
    cosine_grid,
    linear_inner_product,
    polynomial_inner_product,
    radial_exponential,
    radial_exponential_taylor,
    warped_cosine_1d,
)
from geolift.kernel_variants import (
    FiniteRankKernel,
    InnerProductKernel,
    RadialKernel,
    TranslationInvariantKernel,
)


def random_sphere_points(n, dim, seed):
    draws = np.random.default_rng(seed).standard_normal((n, dim))
    return draws / np.linalg.norm(draws, axis=1, keepdims=True)


def random_box_points(domain, n, seed):
    lower, upper = np.asarray(domain.lower), np.asarray(domain.upper)
    return lower + (upper - lower) * np.random.default_rng(seed).random((n, domain.dim))


class TestDomains(unittest.TestCase):
    def test_box_membership(self):
        box = Box((0.0, 0.0), (1.0, 2.0))
        self.assertEqual(box.contains(np.array([[1.0, 2.0], [1.1, 0.0]])).tolist(), [True, False])
        with self.assertRaises(ValidationError):
            box.check([[0.5, 2.5]])
        with self.assertRaises(ValidationError):
            Box((1.0,), (0.0,))

    def test_boundary_tolerance(self):
        box = Box.cube(0.0, 1.0, 2)
        self.assertTrue(box.contains(np.array([[1.0 + 1e-10, 0.0]]))[0])

    def test_sphere(self):
        sphere = Sphere(3)
        self.assertEqual(sphere.dim, 3)
        with self.assertRaises(ValidationError):
            sphere.check([[1.0, 1.0, 0.0]])
        with self.assertRaises(DimensionError):
            Sphere(1)

    def test_metric_tensor_checks(self):
        tensor = MetricTensor(np.zeros(2), np.diag([2.0, 0.5]))
        self.assertAlmostEqual(tensor.length([1.0, 2.0]), np.sqrt(4.0))
        with self.assertRaises(AssumptionViolationError):
            MetricTensor(np.zeros(2), np.diag([1.0, -1.0]))
        with self.assertRaises(ValidationError):
            MetricTensor(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestTranslationInvariant(unittest.TestCase):
    def test_cosine_grid_metric_and_geodesic(self):
        kernel = cosine_grid()
        np.testing.assert_allclose(kernel.metric([0.0, 0.0]).matrix, 0.25 * np.eye(2))
        distance = kernel.geodesic([[0.0, 0.0]], [[0.3, -0.4]])[0]
        self.assertAlmostEqual(distance, 0.25, places=14)

    def test_finite_difference_hessian(self):
        reference = cosine_grid()
        estimated = TranslationInvariantKernel(reference.g, reference.domain)
        np.testing.assert_allclose(estimated.neg_hessian, 0.25 * np.eye(2), atol=1e-6)

    def test_non_positive_definite_hessian(self):
        with self.assertRaises(AssumptionViolationError):
            TranslationInvariantKernel(
                lambda u: np.ones(u.shape[0]), Box.cube(0, 1, 2), neg_hessian=np.zeros((2, 2))
            )

    def test_features_reproduce_kernel(self):
        kernel = cosine_grid()
        x = random_box_points(kernel.domain, 100, 0)
        y = random_box_points(kernel.domain, 100, 1)
        inner = np.sum(kernel.features(x) * kernel.features(y), axis=1)
        np.testing.assert_allclose(inner, kernel.evaluate(x, y), atol=1e-12)


class TestRadial(unittest.TestCase):
    def test_geodesic_is_scaled_euclidean(self):
        kernel = radial_exponential()
        x = random_box_points(kernel.domain, 20, 2)
        y = random_box_points(kernel.domain, 20, 3)
        expected = np.sqrt(2.0) * np.linalg.norm(x - y, axis=1)
        np.testing.assert_allclose(kernel.geodesic(x, y), expected, rtol=1e-12)

    def test_requires_decreasing_profile(self):
        with self.assertRaises(AssumptionViolationError):
            RadialKernel(np.exp, 1.0, Box.cube(0, 1, 2))

    def test_has_no_feature_map(self):
        kernel = radial_exponential()
        self.assertFalse(kernel.has_feature_map)
        with self.assertRaises(UnsupportedVariantError):
            kernel.features([[0.5, 0.5]])
        with self.assertRaises(UnsupportedVariantError):
            kernel.as_finite_rank()

    def test_taylor_truncation_matches_kernel(self):
        exact = radial_exponential()
        truncated = radial_exponential_taylor()
        x = random_box_points(exact.domain, 50, 4)
        y = random_box_points(exact.domain, 50, 5)
        np.testing.assert_allclose(truncated.evaluate(x, y), exact.evaluate(x, y), atol=1e-10)


class TestInnerProduct(unittest.TestCase):
    def test_antipodal_distance_is_pi(self):
        kernel = linear_inner_product()
        distance = kernel.geodesic([[1.0, 0.0, 0.0]], [[-1.0, 0.0, 0.0]])[0]
        self.assertEqual(distance, np.pi)

    def test_polynomial_geodesic_scale(self):
        kernel = polynomial_inner_product(degree=2)
        distance = kernel.geodesic([[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])[0]
        self.assertAlmostEqual(distance, np.sqrt(1.0) * np.pi / 2.0, places=14)

    def test_polynomial_features_reproduce_kernel(self):
        kernel = polynomial_inner_product(degree=3)
        x = random_sphere_points(100, 3, 6)
        y = random_sphere_points(100, 3, 7)
        inner = np.sum(kernel.features(x) * kernel.features(y), axis=1)
        np.testing.assert_allclose(inner, kernel.evaluate(x, y), atol=1e-12)

    def test_requires_positive_slope(self):
        with self.assertRaises(AssumptionViolationError):
            InnerProductKernel(lambda t: -t, -1.0, 0.0, 3)

    def test_points_must_lie_on_sphere(self):
        with self.assertRaises(ValidationError):
            linear_inner_product().evaluate([[1.0, 1.0, 0.0]], [[1.0, 0.0, 0.0]])


class TestAdditive(unittest.TestCase):
    def test_cosine_psi_is_affine(self):
        kernel = additive_cosine(weights=(0.25, 4.0))
        z = random_box_points(kernel.domain, 30, 8)
        expected = z * np.sqrt([0.25, 4.0])
        np.testing.assert_allclose(kernel.psi(z), expected, atol=1e-9)

    def test_warped_psi_matches_closed_form(self):
        kernel = warped_cosine_1d(weight=2.0)
        z = np.linspace(0.5, 1.4, 25)[:, None]
        expected = np.sqrt(2.0 * 4.5) * (z**3 - 0.5**3) / 3.0
        np.testing.assert_allclose(kernel.psi(z), expected, atol=1e-9)
        self.assertTrue(np.all(np.diff(kernel.psi(z)[:, 0]) > 0))

    def test_geodesic_is_distance_after_psi(self):
        kernel = warped_cosine_1d()
        distance = kernel.geodesic([[0.6]], [[1.3]])[0]
        expected = np.sqrt(4.5) * (1.3**3 - 0.6**3) / 3.0
        self.assertAlmostEqual(distance, expected, places=9)

    def test_weights_must_be_positive(self):
        with self.assertRaises(ValidationError):
            additive_cosine(weights=(1.0, 0.0))

    def test_warped_features_reproduce_kernel(self):
        kernel = warped_cosine_1d()
        x = random_box_points(kernel.domain, 100, 9)
        y = random_box_points(kernel.domain, 100, 10)
        inner = np.sum(kernel.features(x) * kernel.features(y), axis=1)
        np.testing.assert_allclose(inner, kernel.evaluate(x, y), atol=1e-12)


class TestFiniteRank(unittest.TestCase):
    def test_metric_from_jacobian(self):
        finite = cosine_grid().as_finite_rank()
        self.assertIsInstance(finite, FiniteRankKernel)
        np.testing.assert_allclose(finite.metric([0.3, -1.0]).matrix, 0.25 * np.eye(2), atol=1e-8)

    def test_has_no_closed_form(self):
        finite = cosine_grid().as_finite_rank()
        self.assertFalse(finite.has_closed_form)
        with self.assertRaises(UnsupportedVariantError):
            finite.geodesic([[0.0, 0.0]], [[0.1, 0.1]])

    def test_gram_uses_features(self):
        kernel = cosine_grid()
        z = random_box_points(kernel.domain, 12, 11)
        np.testing.assert_allclose(kernel.as_finite_rank().gram(z), kernel.gram(z), atol=1e-12)


def test_rho_scaling():
    full, quarter = cosine_grid(rho=1.0), cosine_grid(rho=0.25)
    a, b = [[0.1, 0.2]], [[-1.0, 0.7]]
    assert quarter.evaluate(a, b)[0] == pytest.approx(0.25 * full.evaluate(a, b)[0])
    assert quarter.geodesic(a, b)[0] == pytest.approx(0.5 * full.geodesic(a, b)[0])
    np.testing.assert_allclose(quarter.features(a), 0.5 * full.features(a))
    np.testing.assert_allclose(quarter.metric(a[0]).matrix, 0.25 * full.metric(a[0]).matrix)


def test_rho_must_be_a_probability_scale():
    with pytest.raises(ValidationError):
        cosine_grid(rho=1.5)
    with pytest.raises(ValidationError):
        cosine_grid(rho=-0.1)


def test_zero_rho_has_degenerate_metric():
    with pytest.raises(AssumptionViolationError):
        cosine_grid(rho=0.0).metrics([[0.0, 0.0]])


def test_gram_is_symmetric():
    kernel = radial_exponential(dim=3)
    z = random_box_points(kernel.domain, 15, 12)
    gram = kernel.gram(z)
    assert np.array_equal(gram, gram.T)
    np.testing.assert_allclose(np.diag(gram), 1.0)


def test_describe():
    data = cosine_grid(rho=0.5).describe()
    assert data["name"] == "cosine-grid"
    assert data["variant"] == "translation_invariant"
    assert data["rho"] == 0.5
    assert data["domain"]["type"] == "box"
