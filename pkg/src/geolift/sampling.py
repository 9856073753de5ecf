"""
Latent position designs and similarity matrices sampled from a kernel.
"""

import logging

import numpy as np

from .base_kernel import Box, Domain, KernelModel, Sphere
from .core import MatrixKind, PointCloud, Seed, SimilarityMatrix
from .errors import ConfigError, InvalidProbabilityError, ValidationError

logger = logging.getLogger(__name__)

# Kernel values this far outside [0, 1] are clipped rather than rejected.
PROBABILITY_TOL = 1e-12


def sample_latent_grid(domain: Domain, n: int) -> PointCloud:
    """Equally spaced grid including the box corners; first coordinate varies fastest."""
    if not isinstance(domain, Box):
        raise ValidationError(f"Grid designs need a box domain, got {domain}")
    if n < 1:
        raise ValidationError(f"Grid size must be positive, got {n}")
    dim = domain.dim
    side = int(round(n ** (1.0 / dim)))
    if side**dim != n:
        below = max(1, int(np.floor(n ** (1.0 / dim))))
        options = sorted({below**dim, (below + 1) ** dim}, key=lambda m: (abs(m - n), m))
        raise ValidationError(
            f"n={n} does not fill a {dim}-D grid; nearest valid n is {options[0]}"
        )
    axes = [np.linspace(lo, hi, side) for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes[::-1], indexing="ij")
    coords = np.column_stack([m.ravel() for m in mesh[::-1]])
    logger.debug("Grid of %d points with %d per side", n, side)
    return PointCloud(coords)


def sample_latent_uniform(domain: Domain, n: int, seed: Seed) -> PointCloud:
    """Independent uniform draws from a box or the unit sphere."""
    if n < 1:
        raise ValidationError(f"Sample size must be positive, got {n}")
    rng = seed.generator()
    if isinstance(domain, Box):
        lower = np.asarray(domain.lower)
        upper = np.asarray(domain.upper)
        return PointCloud(lower + (upper - lower) * rng.random((n, domain.dim)))
    if isinstance(domain, Sphere):
        draws = rng.standard_normal((n, domain.dim))
        return PointCloud(draws / np.linalg.norm(draws, axis=1, keepdims=True))
    raise ValidationError(f"Cannot sample uniformly from {domain}")


def sparsity_schedule(n: int, scale: float, exponent: float) -> float:
    """rho_n = min(1, scale * n^(-exponent)) for a sparse graph sequence."""
    if scale <= 0:
        raise ConfigError(f"Sparsity scale must be positive, got {scale}")
    if not 0.0 <= exponent < 1.0:
        raise ConfigError(f"Sparsity exponent must lie in [0, 1), got {exponent}")
    return float(min(1.0, scale * float(n) ** (-exponent)))


def noiseless_similarity(k: KernelModel, z: PointCloud) -> SimilarityMatrix:
    """A_ij = f(z_i, z_j) with no sampling noise, diagonal included."""
    return SimilarityMatrix.from_dense(k.gram(z.coords), kind=MatrixKind.GENERIC)


def sample_adjacency(k: KernelModel, z: PointCloud, seed: Seed) -> SimilarityMatrix:
    """Undirected graph with independent Bernoulli(f(z_i, z_j)) edges for i < j.

    Row i draws from its own counter-based stream, so the result depends only
    on the seed and not on evaluation order.
    """
    points = k.domain.check(z.coords)
    n = points.shape[0]
    rows, cols = [], []
    for i in range(n - 1):
        probabilities = k.cross(points[i : i + 1], points[i + 1 :])[0]
        invalid = (probabilities < -PROBABILITY_TOL) | (probabilities > 1.0 + PROBABILITY_TOL)
        if np.any(invalid):
            offset = int(np.argmax(invalid))
            raise InvalidProbabilityError(i, i + 1 + offset, float(probabilities[offset]))
        draws = seed.stream(i).random(n - i - 1)
        hits = np.flatnonzero(draws < np.clip(probabilities, 0.0, 1.0))
        rows.append(np.full(hits.size, i, dtype=np.int64))
        cols.append(hits + i + 1)
    if rows:
        r, c = np.concatenate(rows), np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    logger.info("Sampled %d edges among %d vertices (rho=%g)", r.size, n, k.rho)
    return SimilarityMatrix.from_upper_triplets(
        n, r, c, np.ones(r.size), kind=MatrixKind.ADJACENCY
    )
