"""
Geometry oracles on kernel models: metric tensors, closed-form geodesics,
the additive coordinate transform, feature maps and discretized path lengths.
"""

import logging
from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .base_kernel import KernelModel, MetricTensor, as_points
from .errors import DimensionError, UnsupportedVariantError, ValidationError
from .kernel_variants import AdditiveKernel

logger = logging.getLogger(__name__)


def metric_tensor(k: KernelModel, z: ArrayLike) -> MetricTensor:
    """H_z, checked for symmetry and positive definiteness."""
    return k.metric(z)


def geodesic_oracle(k: KernelModel, zi: ArrayLike, zj: ArrayLike) -> float:
    """Closed-form manifold distance between the images of two latent points."""
    a = as_points(zi, k.dim)
    b = as_points(zj, k.dim)
    if a.shape[0] != 1 or b.shape[0] != 1:
        raise DimensionError("geodesic_oracle compares exactly two points")
    return float(k.geodesic(a, b)[0])


def psi_transform(k: KernelModel, z: ArrayLike) -> NDArray[np.float64]:
    """Coordinatewise monotone transform of an additive kernel (rows in, rows out)."""
    if not isinstance(k, AdditiveKernel):
        raise UnsupportedVariantError(f"psi_transform needs an additive kernel, got {k.variant}")
    result = k.psi(z)
    return result[0] if np.ndim(z) == 1 and result.shape[0] == 1 else result


def feature_map(k: KernelModel, z: ArrayLike) -> NDArray[np.float64]:
    """phi(z) for a kernel with an explicit finite-rank feature map."""
    result = k.features(z)
    return result[0] if np.ndim(z) == 1 and result.shape[0] == 1 else result


def _as_path(k: KernelModel, path: ArrayLike) -> NDArray[np.float64]:
    points = k.domain.check(path)
    if points.shape[0] < 2:
        raise ValidationError("A path needs at least two points")
    return points


def riemannian_path_length(k: KernelModel, path: ArrayLike) -> float:
    """Sum of <dz_k, H_(z_(k-1)) dz_k>^(1/2) along a discretized path."""
    points = _as_path(k, path)
    steps = np.diff(points, axis=0)
    metrics = k.metrics(points[:-1])
    squared = np.einsum("mi,mij,mj->m", steps, metrics, steps)
    return float(np.sum(np.sqrt(np.clip(squared, 0.0, None))))


def path_length_oracle(k: KernelModel, path: ArrayLike) -> Tuple[float, float]:
    """Feature-space polygon length and Riemannian sum along the same path."""
    points = _as_path(k, path)
    phi = k.features(points)
    feature_length = float(np.sum(np.linalg.norm(np.diff(phi, axis=0), axis=1)))
    riemannian_length = riemannian_path_length(k, points)
    logger.debug(
        "Path of %d points: feature length %.12g, riemannian length %.12g",
        points.shape[0],
        feature_length,
        riemannian_length,
    )
    return feature_length, riemannian_length


def straight_path(a: ArrayLike, b: ArrayLike, steps: int) -> NDArray[np.float64]:
    """``steps + 1`` equally spaced points from a to b inclusive."""
    if steps < 1:
        raise ValidationError(f"A path needs at least one step, got {steps}")
    start = np.atleast_1d(np.asarray(a, dtype=np.float64))
    end = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if start.shape != end.shape:
        raise DimensionError("Path endpoints must have the same dimension")
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return np.asarray(start + t * (end - start))


def great_circle_path(a: ArrayLike, b: ArrayLike, steps: int) -> NDArray[np.float64]:
    """``steps + 1`` points along the shorter great-circle arc between unit vectors."""
    if steps < 1:
        raise ValidationError(f"A path needs at least one step, got {steps}")
    start = np.asarray(a, dtype=np.float64)
    end = np.asarray(b, dtype=np.float64)
    if start.shape != end.shape or start.ndim != 1:
        raise DimensionError("Great-circle endpoints must be vectors of equal length")
    cosine = float(np.clip(start @ end, -1.0, 1.0))
    angle = np.arccos(cosine)
    if angle < 1e-15:
        return np.repeat(start[None, :], steps + 1, axis=0)
    if np.pi - angle < 1e-12:
        raise ValidationError("Antipodal endpoints do not determine a unique great circle")
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    path = (np.sin((1 - t) * angle) * start + np.sin(t * angle) * end) / np.sin(angle)
    return np.asarray(path / np.linalg.norm(path, axis=1, keepdims=True))
