"""
Spectral embedding, rank selection and degree correction.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from scipy.stats import norm

from .core import PointCloud, Seed, SimilarityMatrix, symmetric_eigs
from .errors import ConfigError, DimensionError, ValidationError

logger = logging.getLogger(__name__)

AUTO = "auto"

# Rows with a smaller norm cannot be projected onto the sphere.
ZERO_ROW_NORM = 1e-12

# Matrix rows densified at a time while estimating embedding noise.
NOISE_CHUNK = 512


@dataclass(frozen=True)
class SpectralConfig:
    """Embedding dimension (an integer or ``"auto"``) and degree correction switch."""

    p: Union[int, str] = AUTO
    degree_correct: bool = False
    max_p: int = 20

    def __post_init__(self) -> None:
        if isinstance(self.p, str):
            valid = self.p == AUTO
        else:
            valid = isinstance(self.p, int) and not isinstance(self.p, bool) and self.p >= 1
        if not valid:
            raise ConfigError(f"spectral.p must be a positive integer or 'auto', got {self.p!r}")
        if isinstance(self.max_p, bool) or not isinstance(self.max_p, int) or self.max_p < 1:
            raise ConfigError(f"spectral.max_p must be a positive integer, got {self.max_p!r}")

    @property
    def is_auto(self) -> bool:
        return self.p == AUTO


def spectral_embed(a: SimilarityMatrix, p: int, seed: Optional[Seed] = None) -> PointCloud:
    """Return X = U |S|^(1/2) from the ``p`` largest-magnitude eigenpairs of ``a``."""
    eig = symmetric_eigs(a, p, seed=seed)
    return PointCloud(eig.vectors * np.sqrt(np.abs(eig.values)))


def select_rank(spectrum: Sequence[float], max_p: int) -> int:
    """Profile-likelihood elbow of a magnitude-sorted spectrum.

    Each split q models the first q magnitudes and the remainder as two
    Gaussian groups with separate means and one pooled variance; the split
    with the highest log-likelihood wins (lowest q on ties). A spectrum
    with no within-group spread at any split carries no rank signal and
    yields 1.
    """
    values = np.abs(np.asarray(spectrum, dtype=np.float64))
    if values.ndim != 1 or values.size < 2:
        raise ValidationError("Rank selection needs a spectrum of at least two values")
    if np.any(np.diff(values) > 0):
        raise ValidationError("Spectrum must be sorted by descending magnitude")
    if max_p < 1:
        raise ValidationError(f"max_p must be positive, got {max_p}")

    size = values.size
    scale = float(values.max()) or 1.0
    candidates = range(1, min(max_p, size - 1) + 1)
    loglik = np.full(len(candidates), -np.inf)
    degenerate = np.zeros(len(candidates), dtype=bool)
    for pos, q in enumerate(candidates):
        head, tail = values[:q], values[q:]
        pooled = (np.sum((head - head.mean()) ** 2) + np.sum((tail - tail.mean()) ** 2)) / size
        if pooled <= np.finfo(float).eps * scale**2:
            degenerate[pos] = True
            loglik[pos] = np.inf
            continue
        sigma = np.sqrt(pooled)
        loglik[pos] = norm.logpdf(head, head.mean(), sigma).sum() + norm.logpdf(
            tail, tail.mean(), sigma
        ).sum()

    if np.all(degenerate):
        logger.info("Flat spectrum; selecting rank 1")
        return 1
    rank = int(candidates[int(np.argmax(loglik))])
    logger.info("Profile likelihood selects rank %d of at most %d", rank, max_p)
    return rank


def embedding_noise(
    a: SimilarityMatrix, x: PointCloud, eigenvalues: Sequence[float]
) -> NDArray[np.float64]:
    """Per-row covariance of the embedding's sampling error, shape (n, p, p).

    To first order X_i moves by sum_j E_ij w_j with w_j = X_j / lambda, so row i
    has covariance sum_j Var(E_ij) w_j w_j^T. Each Var(E_ij) is estimated by the
    squared residual of the rank-p fit X S X^T, S holding the eigenvalue signs;
    the diagonal is left out.
    """
    values = np.asarray(eigenvalues, dtype=np.float64)[: x.dim]
    if values.size != x.dim or a.n != x.n:
        raise DimensionError(
            f"Noise estimate needs {x.dim} eigenvalues for {x.n} rows, "
            f"got {values.size} for a {a.n}-object matrix"
        )
    coords = x.coords
    n, p = coords.shape
    inverse = np.divide(1.0, values, out=np.zeros_like(values), where=values != 0.0)
    w = coords * inverse
    outer = np.einsum("jk,jl->jkl", w, w).reshape(n, p * p)
    signed = coords * np.sign(values)
    full = a.to_sparse() if a.is_sparse else None

    covariance = np.empty((n, p * p))
    for start in range(0, n, NOISE_CHUNK):
        stop = min(n, start + NOISE_CHUNK)
        if full is None:
            block = np.array(a.dense[start:stop])  # type: ignore[index]
        else:
            block = full[start:stop].toarray()
        residual = block - signed[start:stop] @ coords.T
        residual[np.arange(stop - start), np.arange(start, stop)] = 0.0
        covariance[start:stop] = (residual**2) @ outer
    logger.debug(
        "Mean embedding noise trace %.6g over %d rows", float(covariance[:, :: p + 1].sum() / n), n
    )
    return covariance.reshape(n, p, p)


class DegreeCorrection(NamedTuple):
    """Rows projected onto the unit sphere plus the bookkeeping of dropped rows."""

    cloud: PointCloud
    kept: NDArray[np.int64]
    dropped: NDArray[np.int64]


def degree_correct(x: PointCloud) -> DegreeCorrection:
    """Divide every row by its norm, dropping rows of (numerically) zero norm."""
    norms = np.linalg.norm(x.coords, axis=1)
    keep = norms >= ZERO_ROW_NORM
    kept = np.flatnonzero(keep).astype(np.int64)
    dropped = np.flatnonzero(~keep).astype(np.int64)
    if dropped.size:
        logger.info("Degree correction dropped %d zero rows", dropped.size)
    projected = x.coords[keep] / norms[keep, None]
    return DegreeCorrection(PointCloud(projected.reshape(-1, x.dim)), kept, dropped)


class EmbeddingResult(NamedTuple):
    cloud: PointCloud
    spectrum: NDArray[np.float64]
    rank: int
    rank_selected: bool
    kept: NDArray[np.int64]
    dropped: NDArray[np.int64]


class SpectralEmbedder:
    """Applies a :class:`SpectralConfig` to a similarity matrix."""

    def __init__(self, config: SpectralConfig, seed: Optional[Seed] = None) -> None:
        self.config = config
        self.seed = seed

    def fit(self, a: SimilarityMatrix) -> EmbeddingResult:
        """Embed ``a``, choosing the rank from the spectrum when configured."""
        config = self.config
        if config.is_auto:
            if a.n < 2:
                raise ValidationError("Automatic rank selection needs at least two objects")
            count = min(config.max_p + 1, a.n)
        else:
            count = int(config.p)
            if count > a.n:
                raise DimensionError(f"Requested p={count} exceeds the {a.n} objects to embed")
            count = max(count, min(config.max_p + 1, a.n))
        eig = symmetric_eigs(a, count, seed=self.seed)

        if config.is_auto:
            rank = select_rank(eig.values, min(config.max_p, a.n - 1))
        else:
            rank = int(config.p)
        coords = eig.vectors[:, :rank] * np.sqrt(np.abs(eig.values[:rank]))
        cloud = PointCloud(coords)
        kept = np.arange(a.n, dtype=np.int64)
        dropped = np.zeros(0, dtype=np.int64)
        if config.degree_correct:
            cloud, kept, dropped = degree_correct(cloud)
        logger.info("Spectral embedding of %d objects into %d dimensions", a.n, rank)
        return EmbeddingResult(cloud, eig.values, rank, config.is_auto, kept, dropped)
