"""
Structured kernel variants: translation-invariant, radial, inner-product,
additive and explicit finite-rank kernels.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from .base_kernel import Box, Domain, FeatureMap, KernelModel, Sphere, check_positive_definite
from .errors import (
    AssumptionViolationError,
    ConvergenceError,
    DimensionError,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Step for second differences of g at the origin.
HESSIAN_STEP = 1e-4

# Step for central-difference Jacobians of feature maps.
JACOBIAN_STEP = 1e-5

PSI_TOL = 1e-10
# Subinterval limit for one quadrature call (21 evaluations each), about 1e6 evaluations.
PSI_MAX_SUBINTERVALS = 47_619

ArrayFunction = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def _finite_difference_hessian(g: ArrayFunction, dim: int, step: float) -> NDArray[np.float64]:
    """Hessian of ``g`` at the origin by central second differences."""
    eye = np.eye(dim) * step
    probes = []
    for i in range(dim):
        for j in range(dim):
            probes.extend([eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]])
    values = np.asarray(g(np.array(probes)), dtype=np.float64).reshape(dim, dim, 4)
    hessian = (values[..., 0] - values[..., 1] - values[..., 2] + values[..., 3]) / (4 * step**2)
    return (hessian + hessian.T) / 2.0


class TranslationInvariantKernel(KernelModel):
    """f(x, y) = g(x - y) with metric H = -Hessian(g)(0), constant in z."""

    variant = "translation_invariant"

    def __init__(
        self,
        g: ArrayFunction,
        domain: Domain,
        neg_hessian: Optional[ArrayLike] = None,
        rho: float = 1.0,
        feature_map: Optional[FeatureMap] = None,
        name: Optional[str] = None,
    ) -> None:
        """Initialize with ``g`` acting on (m, d) difference rows."""
        super().__init__(domain, rho=rho, feature_map=feature_map, name=name)
        self.g = g
        if neg_hessian is None:
            matrix = -_finite_difference_hessian(g, domain.dim, HESSIAN_STEP)
            logger.debug("Finite-difference metric for %s: %s", self.name, matrix.tolist())
        else:
            matrix = np.array(neg_hessian, dtype=np.float64)
        if matrix.shape != (domain.dim, domain.dim):
            raise DimensionError(f"Hessian must be {domain.dim}x{domain.dim}, got {matrix.shape}")
        matrix = (matrix + matrix.T) / 2.0
        check_positive_definite(matrix[None], np.zeros((1, domain.dim)))
        self.neg_hessian = matrix
        values, vectors = np.linalg.eigh(matrix)
        # G = V diag(lambda)^(1/2), so that H = G G^T.
        self.factor = vectors * np.sqrt(values)

    def _evaluate(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(self.g(x - y), dtype=np.float64)

    def _metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        shape = (points.shape[0],) + self.neg_hessian.shape
        return np.broadcast_to(self.neg_hessian, shape).copy()

    def _geodesic(self, zi: NDArray[np.float64], zj: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(np.linalg.norm((zi - zj) @ self.factor, axis=1))


class RadialKernel(TranslationInvariantKernel):
    """f(x, y) = h(||x - y||^2); the metric is -2 h'(0) I."""

    variant = "radial"

    def __init__(
        self,
        h: ArrayFunction,
        h_prime_at_0: float,
        domain: Domain,
        rho: float = 1.0,
        feature_map: Optional[FeatureMap] = None,
        name: Optional[str] = None,
    ) -> None:
        if not h_prime_at_0 < 0:
            raise AssumptionViolationError(
                f"Radial kernels need h'(0) < 0 for a positive-definite metric, got {h_prime_at_0}"
            )
        self.h = h
        self.h_prime_at_0 = float(h_prime_at_0)
        super().__init__(
            lambda u: h(np.sum(u * u, axis=1)),
            domain,
            neg_hessian=-2.0 * self.h_prime_at_0 * np.eye(domain.dim),
            rho=rho,
            feature_map=feature_map,
            name=name,
        )


class InnerProductKernel(KernelModel):
    """f(x, y) = g(<x, y>) on the unit sphere."""

    variant = "inner_product"

    def __init__(
        self,
        g: ArrayFunction,
        g_prime_at_1: float,
        g_second_at_1: float,
        ambient_dim: int,
        rho: float = 1.0,
        feature_map: Optional[FeatureMap] = None,
        name: Optional[str] = None,
    ) -> None:
        super().__init__(Sphere(ambient_dim), rho=rho, feature_map=feature_map, name=name)
        if not g_prime_at_1 > 0:
            raise AssumptionViolationError(
                f"Inner-product kernels need g'(1) > 0, got {g_prime_at_1}"
            )
        self.g = g
        self.g_prime_at_1 = float(g_prime_at_1)
        self.g_second_at_1 = float(g_second_at_1)

    def _evaluate(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(self.g(np.einsum("ij,ij->i", x, y)), dtype=np.float64)

    def _metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        eye = np.eye(points.shape[1])
        outer = np.einsum("mi,mj->mij", points, points)
        return self.g_prime_at_1 * eye[None] + self.g_second_at_1 * outer

    def _geodesic(self, zi: NDArray[np.float64], zj: NDArray[np.float64]) -> NDArray[np.float64]:
        cosine = np.clip(np.einsum("ij,ij->i", zi, zj), -1.0, 1.0)
        return np.sqrt(self.g_prime_at_1) * np.arccos(cosine)


@dataclass(frozen=True)
class AdditiveComponent:
    """One-dimensional kernel f_i used as a summand of an additive kernel.

    ``mixed_partial(xi)`` is d^2 f_i / dx dy at (xi, xi); ``feature_map`` maps
    an (m,) array to (m, p_i) features when the component has finite rank.
    """

    f: Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]
    mixed_partial: ArrayFunction
    feature_map: Optional[ArrayFunction] = None


class AdditiveKernel(KernelModel):
    """f(x, y) = sum_i alpha_i f_i(x_i, y_i) on a box."""

    variant = "additive"

    def __init__(
        self,
        components: Sequence[AdditiveComponent],
        weights: Sequence[float],
        domain: Box,
        rho: float = 1.0,
        name: Optional[str] = None,
    ) -> None:
        if not isinstance(domain, Box):
            raise ValidationError("Additive kernels are defined on a box")
        if not (len(components) == len(weights) == domain.dim):
            raise DimensionError(
                f"Additive kernel needs one component and weight per coordinate ({domain.dim})"
            )
        alphas = np.asarray(weights, dtype=np.float64)
        if np.any(alphas <= 0):
            raise ValidationError(f"Additive weights must be positive, got {alphas.tolist()}")
        self.components = tuple(components)
        self.weights = alphas
        feature_map = None
        if all(c.feature_map is not None for c in self.components):
            feature_map = self._stacked_features
        super().__init__(domain, rho=rho, feature_map=feature_map, name=name)

    def _stacked_features(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        blocks = [
            np.sqrt(alpha) * np.asarray(c.feature_map(points[:, i]))  # type: ignore[misc]
            for i, (c, alpha) in enumerate(zip(self.components, self.weights))
        ]
        return np.hstack(blocks)

    def _evaluate(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        total = np.zeros(x.shape[0])
        for i, (component, alpha) in enumerate(zip(self.components, self.weights)):
            total = total + alpha * np.asarray(component.f(x[:, i], y[:, i]), dtype=np.float64)
        return total

    def _mixed(self, i: int, xi: NDArray[np.float64]) -> NDArray[np.float64]:
        values = np.asarray(self.components[i].mixed_partial(xi), dtype=np.float64)
        return np.broadcast_to(values, np.shape(xi))

    def _metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        diagonal = np.column_stack(
            [alpha * self._mixed(i, points[:, i]) for i, alpha in enumerate(self.weights)]
        )
        return np.einsum("mi,ij->mij", diagonal, np.eye(points.shape[1]))

    def _psi_coordinate(self, i: int, values: NDArray[np.float64]) -> NDArray[np.float64]:
        lower = self.domain.lower[i]  # type: ignore[attr-defined]

        def integrand(xi: float) -> float:
            mixed = float(self._mixed(i, np.asarray(xi)))
            if not mixed > 0:
                raise AssumptionViolationError(
                    f"Component {i} has non-positive mixed partial {mixed:.6g} at {xi:.6g}; "
                    "the coordinate transform needs a positive integrand"
                )
            return float(np.sqrt(mixed))

        order = np.argsort(values, kind="stable")
        knots = np.concatenate([[lower], values[order]])
        pieces = np.zeros(values.size)
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            for k in range(values.size):
                a, b = knots[k], knots[k + 1]
                if b <= a:
                    continue
                try:
                    pieces[k], _ = integrate.quad(
                        integrand, a, b, epsabs=PSI_TOL, epsrel=0.0, limit=PSI_MAX_SUBINTERVALS
                    )
                except integrate.IntegrationWarning as e:
                    raise ConvergenceError(
                        f"Quadrature of component {i} on [{a:.6g}, {b:.6g}] failed: {e}"
                    ) from e
        out = np.empty(values.size)
        out[order] = np.cumsum(pieces)
        return np.sqrt(self.weights[i]) * out

    def _psi(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.column_stack([self._psi_coordinate(i, points[:, i]) for i in range(self.dim)])

    def psi(self, z: ArrayLike) -> NDArray[np.float64]:
        """Coordinatewise increasing transform that makes geodesics Euclidean."""
        return np.sqrt(self.rho) * self._psi(self.domain.check(z))

    def _geodesic(self, zi: NDArray[np.float64], zj: NDArray[np.float64]) -> NDArray[np.float64]:
        both = self._psi(np.vstack([zi, zj]))
        m = zi.shape[0]
        return np.asarray(np.linalg.norm(both[:m] - both[m:], axis=1))


class FiniteRankKernel(KernelModel):
    """f(x, y) = <phi(x), phi(y)> for an explicit feature map phi."""

    variant = "finite_rank"

    def __init__(
        self,
        feature_map: FeatureMap,
        domain: Domain,
        rho: float = 1.0,
        name: Optional[str] = None,
    ) -> None:
        super().__init__(domain, rho=rho, feature_map=feature_map, name=name)
        self.phi = feature_map

    def _evaluate(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.einsum("ij,ij->i", self.phi(x), self.phi(y))

    def jacobians(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Central-difference Jacobians of phi as an (m, p0, d) stack."""
        columns = []
        for k in range(points.shape[1]):
            shift = np.zeros(points.shape[1])
            shift[k] = JACOBIAN_STEP
            forward = np.asarray(self.phi(points + shift))
            backward = np.asarray(self.phi(points - shift))
            columns.append((forward - backward) / (2 * JACOBIAN_STEP))
        return np.stack(columns, axis=2)

    def _metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        jac = self.jacobians(points)
        metrics = np.einsum("mpi,mpj->mij", jac, jac)
        return (metrics + np.transpose(metrics, (0, 2, 1))) / 2.0

    def _cross(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(self.phi(x)) @ np.asarray(self.phi(y)).T
