"""
Alignment and recovery diagnostics.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import orthogonal_procrustes
from scipy.optimize import linear_sum_assignment
from scipy.stats import spearmanr

from .core import DistanceMatrix, PointCloud, Seed
from .errors import DataConditionError, DimensionError, ValidationError, ZeroVarianceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlignmentResult:
    """Similarity transform x -> scale * rotation @ x + translation."""

    scale: float
    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]
    residual_rms: float

    def apply(self, cloud: PointCloud) -> PointCloud:
        return PointCloud(self.scale * cloud.coords @ self.rotation.T + self.translation)


def procrustes_align(source: PointCloud, target: PointCloud) -> AlignmentResult:
    """Least-squares scale, orthogonal map (reflections allowed) and shift onto ``target``."""
    if source.n != target.n or source.dim != target.dim:
        raise DimensionError(
            f"Cannot align a {source.n}x{source.dim} cloud to a {target.n}x{target.dim} cloud"
        )
    if source.n < source.dim:
        raise DimensionError(f"Alignment needs at least {source.dim} points, got {source.n}")
    source_mean = source.coords.mean(axis=0)
    target_mean = target.coords.mean(axis=0)
    a = source.coords - source_mean
    b = target.coords - target_mean
    norm_sq = float(np.sum(a * a))
    if norm_sq == 0.0:
        raise DataConditionError("Cannot align a source cloud whose points all coincide")

    # orthogonal_procrustes solves min ||a R - b||; R^T acts on column vectors.
    r, singular_sum = orthogonal_procrustes(a, b)
    scale = float(singular_sum) / norm_sq
    rotation = r.T
    translation = target_mean - scale * rotation @ source_mean
    residual = scale * a @ r - b
    rms = float(np.sqrt(np.sum(residual * residual) / source.n))
    logger.debug("Procrustes scale %.6g, residual RMS %.6g", scale, rms)
    return AlignmentResult(scale, rotation, translation, rms)


def recovery_error(zhat: PointCloud, z: PointCloud) -> float:
    """Per-point RMS distance between ``z`` and the best similarity image of ``zhat``."""
    return procrustes_align(zhat, z).residual_rms


def _as_vector(values: Union[PointCloud, ArrayLike], label: str) -> NDArray[np.float64]:
    if isinstance(values, PointCloud):
        if values.dim != 1:
            raise DimensionError(f"{label} must be one-dimensional, got dim={values.dim}")
        return values.coords[:, 0]
    vector = np.asarray(values, dtype=np.float64).reshape(-1)
    return vector


def monotonicity_diagnostic(
    zhat_1d: Union[PointCloud, ArrayLike], covariate: ArrayLike
) -> float:
    """Spearman rank correlation between a 1-D embedding and a covariate."""
    x = _as_vector(zhat_1d, "Embedding")
    y = _as_vector(covariate, "Covariate")
    if x.size != y.size:
        raise DimensionError(f"Embedding has {x.size} values but covariate has {y.size}")
    if x.size < 3:
        raise ValidationError("Rank correlation needs at least three points")
    for values, label in ((x, "embedding"), (y, "covariate")):
        if np.all(values == values[0]):
            raise ZeroVarianceError(f"The {label} is constant; correlation is undefined", label)
    rho = float(spearmanr(x, y).correlation)
    return float(np.clip(rho, -1.0, 1.0))


class RegressionResult(NamedTuple):
    slope: float
    r2: float
    pairs: int
    excluded: int


def geodesic_regression(dhat: DistanceMatrix, dz: DistanceMatrix) -> RegressionResult:
    """Least-squares slope through the origin of dhat against dz over i < j, with R^2."""
    if dhat.n != dz.n:
        raise DimensionError(f"Distance matrices differ in size: {dhat.n} vs {dz.n}")
    upper = np.triu_indices(dhat.n, k=1)
    y = dhat.entries[upper]
    x = dz.entries[upper]
    finite = np.isfinite(x) & np.isfinite(y)
    excluded = int(np.count_nonzero(~finite))
    x, y = x[finite], y[finite]
    if x.size < 2:
        raise DataConditionError(f"Regression needs at least two finite pairs, got {x.size}")
    sxx = float(x @ x)
    if sxx == 0.0:
        raise ZeroVarianceError("Latent distances are all zero", "dz")
    slope = float(x @ y) / sxx
    ss_res = float(np.sum((y - slope * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    if excluded:
        logger.info("Regression excluded %d non-finite pairs", excluded)
    return RegressionResult(slope, r2, int(x.size), excluded)


class PairSample(NamedTuple):
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    dz: NDArray[np.float64]
    dhat: NDArray[np.float64]


def sample_pairs(
    dhat: DistanceMatrix, dz: DistanceMatrix, max_pairs: int, seed: Seed
) -> PairSample:
    """Up to ``max_pairs`` (i < j) distance pairs, drawn without replacement, in index order."""
    if dhat.n != dz.n:
        raise DimensionError(f"Distance matrices differ in size: {dhat.n} vs {dz.n}")
    rows, cols = np.triu_indices(dhat.n, k=1)
    if rows.size > max_pairs:
        chosen = np.sort(seed.generator().choice(rows.size, size=max_pairs, replace=False))
        rows, cols = rows[chosen], cols[chosen]
    rows, cols = rows.astype(np.int64), cols.astype(np.int64)
    return PairSample(rows, cols, dz.entries[rows, cols], dhat.entries[rows, cols])


class EmdResult(NamedTuple):
    mean: float
    stderr: float
    values: NDArray[np.float64]


def assignment_cost(cost: ArrayLike) -> float:
    """Minimum total cost of a perfect matching on a square cost matrix."""
    matrix = np.asarray(cost, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"Assignment needs a square cost matrix, got {matrix.shape}")
    rows, cols = linear_sum_assignment(matrix)
    return float(matrix[rows, cols].sum())


def earth_mover_distance(
    d: DistanceMatrix,
    group_a: Sequence[int],
    group_b: Sequence[int],
    sample: int,
    seed: Seed,
    reps: int = 100,
) -> EmdResult:
    """Mean balanced transport cost between random equal-size samples of two groups.

    Each repetition draws ``sample`` indices without replacement from each
    group using a seed derived from the repetition number, solves the exact
    assignment problem and divides by ``sample``.
    """
    a = np.unique(np.asarray(group_a, dtype=np.int64))
    b = np.unique(np.asarray(group_b, dtype=np.int64))
    if sample < 1 or reps < 1:
        raise ValidationError(f"sample and reps must be positive, got {sample} and {reps}")
    if a.size < sample or b.size < sample:
        raise ValidationError(
            f"Groups of size {a.size} and {b.size} cannot supply {sample} points each"
        )
    for group in (a, b):
        if group.size and (group.min() < 0 or group.max() >= d.n):
            raise DimensionError(f"Group index out of range for n={d.n}")

    values = np.empty(reps)
    for rep in range(reps):
        rng = seed.spawn(rep).generator()
        picks_a = rng.choice(a, size=sample, replace=False)
        picks_b = rng.choice(b, size=sample, replace=False)
        cost = d.entries[np.ix_(picks_a, picks_b)]
        if not np.all(np.isfinite(cost)):
            raise DataConditionError(
                "Sampled points lie in different components; restrict to the largest component"
            )
        values[rep] = assignment_cost(cost) / sample
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    logger.info("Earth mover's distance %.6g +/- %.2g over %d repetitions", mean, stderr, reps)
    return EmdResult(mean, stderr, values)
