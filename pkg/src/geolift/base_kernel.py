"""
Kernel model base class, latent domains and the metric tensor type.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AssumptionViolationError,
    DimensionError,
    UnsupportedVariantError,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Closed boxes and the sphere accept points this far outside.
DOMAIN_TOL = 1e-9

# Symmetry tolerance for metric tensors.
METRIC_SYMMETRY_TOL = 1e-10

# Batch budget (in evaluated pairs) for Gram matrix assembly.
_GRAM_BATCH = 1 << 20

FeatureMap = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def as_points(z: ArrayLike, dim: int) -> NDArray[np.float64]:
    """Coerce one point or a stack of points to an (m, dim) float array."""
    points = np.asarray(z, dtype=np.float64)
    if points.ndim == 0:
        points = points.reshape(1, 1)
    elif points.ndim == 1:
        points = points.reshape(1, -1) if points.size == dim else points.reshape(-1, 1)
    if points.ndim != 2 or points.shape[1] != dim:
        raise DimensionError(f"Expected points of dimension {dim}, got shape {np.shape(z)}")
    if not np.all(np.isfinite(points)):
        raise ValidationError("Latent points must be finite")
    return points


class Domain(ABC):
    """Latent space Z that a kernel is defined on."""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @abstractmethod
    def contains(self, points: NDArray[np.float64], tol: float = DOMAIN_TOL) -> NDArray[np.bool_]:
        """Row-wise membership test."""
        pass

    @abstractmethod
    def to_dict(self) -> dict:
        pass

    def check(self, z: ArrayLike) -> NDArray[np.float64]:
        """Return ``z`` as (m, dim) points, raising if any lies outside the domain."""
        points = as_points(z, self.dim)
        inside = self.contains(points)
        if not np.all(inside):
            first = int(np.flatnonzero(~inside)[0])
            raise ValidationError(f"Point {points[first].tolist()} lies outside {self}")
        return points


@dataclass(frozen=True)
class Box(Domain):
    """Closed axis-aligned box (a product of intervals)."""

    lower: tuple
    upper: tuple

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise DimensionError("Box bounds must be non-empty and of equal length")
        if any(not lo < hi for lo, hi in zip(lower, upper)):
            raise ValidationError(f"Box lower bounds must be below upper bounds: {lower}, {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, points: NDArray[np.float64], tol: float = DOMAIN_TOL) -> NDArray[np.bool_]:
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.asarray(np.all((points >= lo) & (points <= hi), axis=1))

    def to_dict(self) -> dict:
        return {"type": "box", "lower": list(self.lower), "upper": list(self.upper)}

    def __str__(self) -> str:
        return " x ".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper))


@dataclass(frozen=True)
class Sphere(Domain):
    """Unit sphere in R^ambient_dim."""

    ambient_dim: int

    def __post_init__(self) -> None:
        if self.ambient_dim < 2:
            raise DimensionError("The sphere needs an ambient dimension of at least 2")

    @property
    def dim(self) -> int:
        return self.ambient_dim

    def contains(self, points: NDArray[np.float64], tol: float = DOMAIN_TOL) -> NDArray[np.bool_]:
        return np.asarray(np.abs(np.linalg.norm(points, axis=1) - 1.0) <= tol)

    def to_dict(self) -> dict:
        return {"type": "sphere", "ambient_dim": self.ambient_dim}

    def __str__(self) -> str:
        return f"the unit sphere in R^{self.ambient_dim}"


@dataclass(frozen=True)
class MetricTensor:
    """H_z: the mixed second derivative of f at (z, z)."""

    z: NDArray[np.float64]
    matrix: NDArray[np.float64]

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"Metric tensor must be square, got shape {matrix.shape}")
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > METRIC_SYMMETRY_TOL:
            raise ValidationError("Metric tensor is not symmetric")
        check_positive_definite(matrix[None, :, :], np.asarray(self.z, dtype=np.float64)[None, :])
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "z", np.array(self.z, dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def length(self, step: ArrayLike) -> float:
        """Riemannian length <dz, H dz>^(1/2) of an infinitesimal step."""
        dz = np.asarray(step, dtype=np.float64)
        return float(np.sqrt(max(float(dz @ self.matrix @ dz), 0.0)))


def check_positive_definite(matrices: NDArray[np.float64], points: NDArray[np.float64]) -> None:
    """Raise if any metric in an (m, d, d) stack is not positive definite."""
    if matrices.size == 0:
        return
    smallest = np.linalg.eigvalsh(matrices)[:, 0]
    bad = smallest <= 0
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise AssumptionViolationError(
            f"Metric tensor at z={points[first].tolist()} is not positive definite "
            f"(minimum eigenvalue {smallest[first]:.6g})"
        )


class KernelModel(ABC):
    """Similarity kernel f = rho * f0 on a latent domain.

    Subclasses implement the unscaled ``f0``; the sparsity factor rho scales
    values and metric tensors linearly and features and geodesics by sqrt(rho).
    """

    variant = "abstract"

    def __init__(
        self,
        domain: Domain,
        rho: float = 1.0,
        feature_map: Optional[FeatureMap] = None,
        name: Optional[str] = None,
    ) -> None:
        """Initialize the common kernel state."""
        if isinstance(rho, bool) or not 0.0 <= float(rho) <= 1.0:
            raise ValidationError(f"Sparsity factor rho must lie in [0, 1], got {rho!r}")
        self.domain = domain
        self.rho = float(rho)
        self._feature_map = feature_map
        self.name = name or self.variant

    @property
    def dim(self) -> int:
        return self.domain.dim

    @abstractmethod
    def _evaluate(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        """Unscaled kernel on matching rows of two (m, d) arrays."""
        pass

    def _metrics(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        """Unscaled H for each row of ``points`` as an (m, d, d) stack."""
        raise UnsupportedVariantError(f"{self.name} kernel has no metric tensor")

    def _geodesic(self, zi: NDArray[np.float64], zj: NDArray[np.float64]) -> NDArray[np.float64]:
        """Unscaled closed-form manifold distance for matching rows."""
        raise UnsupportedVariantError(
            f"{self.name} kernel has no closed-form geodesic; use path_length_oracle instead"
        )

    @property
    def has_feature_map(self) -> bool:
        return self._feature_map is not None

    @property
    def has_closed_form(self) -> bool:
        return type(self)._geodesic is not KernelModel._geodesic

    def evaluate(self, x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
        """f(x_k, y_k) for matching rows (single points broadcast)."""
        xs, ys = self.domain.check(x), self.domain.check(y)
        xs, ys = np.broadcast_arrays(xs, ys)
        return self.rho * self._evaluate(np.ascontiguousarray(xs), np.ascontiguousarray(ys))

    def _cross(self, x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
        """Unscaled f(x_r, y_c) for every row pair, as an (len x, len y) matrix."""
        out = np.empty((x.shape[0], y.shape[0]))
        batch = max(1, _GRAM_BATCH // max(y.shape[0], 1))
        for start in range(0, x.shape[0], batch):
            rows = x[start : start + batch]
            left = np.repeat(rows, y.shape[0], axis=0)
            right = np.tile(y, (rows.shape[0], 1))
            out[start : start + batch] = self._evaluate(left, right).reshape(rows.shape[0], -1)
        return out

    def cross(self, x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
        """Matrix of f(x_r, y_c) between two point stacks."""
        return self.rho * self._cross(self.domain.check(x), self.domain.check(y))

    def gram(self, z: ArrayLike) -> NDArray[np.float64]:
        """Symmetric matrix of f(z_i, z_j) over all pairs of rows."""
        points = self.domain.check(z)
        upper = np.triu(self._cross(points, points))
        return self.rho * (upper + np.triu(upper, 1).T)

    def metrics(self, z: ArrayLike) -> NDArray[np.float64]:
        """H_z for a stack of points, checked for positive definiteness."""
        points = self.domain.check(z)
        stack = self.rho * self._metrics(points)
        check_positive_definite(stack, points)
        return stack

    def metric(self, z: ArrayLike) -> MetricTensor:
        points = self.domain.check(z)
        if points.shape[0] != 1:
            raise DimensionError("metric expects a single point")
        return MetricTensor(points[0], self.rho * self._metrics(points)[0])

    def geodesic(self, zi: ArrayLike, zj: ArrayLike) -> NDArray[np.float64]:
        """Closed-form manifold distance for matching rows."""
        a, b = self.domain.check(zi), self.domain.check(zj)
        a, b = np.broadcast_arrays(a, b)
        return np.sqrt(self.rho) * self._geodesic(a, b)

    def features(self, z: ArrayLike) -> NDArray[np.float64]:
        """Explicit feature map rows phi(z) with <phi(x), phi(y)> = f(x, y)."""
        if self._feature_map is None:
            raise UnsupportedVariantError(f"{self.name} kernel has no finite-rank feature map")
        points = self.domain.check(z)
        return np.sqrt(self.rho) * np.asarray(self._feature_map(points), dtype=np.float64)

    def as_finite_rank(self) -> "KernelModel":
        """The equivalent kernel defined only through its feature map."""
        if self._feature_map is None:
            raise UnsupportedVariantError(f"{self.name} kernel has no finite-rank feature map")
        from .kernel_variants import FiniteRankKernel

        return FiniteRankKernel(
            self._feature_map, self.domain, rho=self.rho, name=f"{self.name}-finite-rank"
        )

    def describe(self) -> dict:
        return {
            "name": self.name,
            "variant": self.variant,
            "rho": self.rho,
            "domain": self.domain.to_dict(),
        }
