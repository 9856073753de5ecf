"""
Shared numeric containers, deterministic seeds and matrix primitives.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import pdist, squareform

from .errors import ConvergenceError, DimensionError, DisconnectedGraphError, ValidationError

logger = logging.getLogger(__name__)

# Above this size symmetric_eigs switches to the iterative Lanczos path.
DENSE_THRESHOLD = 2048

DENSE_RESIDUAL_TOL = 1e-8
ITERATIVE_RESIDUAL_TOL = 1e-6

_TIE_TOL = 1e-12
_UINT64_LIMIT = 2**64


def _frozen(array: NDArray[np.float64]) -> NDArray[np.float64]:
    array.setflags(write=False)
    return array


class MatrixKind(str, Enum):
    """Interpretation of a similarity matrix."""

    ADJACENCY = "adjacency"
    CORRELATION = "correlation"
    GENERIC = "generic"


@dataclass(frozen=True)
class Seed:
    """64-bit seed from which every random stream in a run is derived."""

    value: int

    def __post_init__(self) -> None:
        if not isinstance(self.value, (int, np.integer)) or isinstance(self.value, bool):
            raise ValidationError(f"Seed must be an integer, got {self.value!r}")
        if not 0 <= int(self.value) < _UINT64_LIMIT:
            raise ValidationError(f"Seed {self.value} is outside the unsigned 64-bit range")
        object.__setattr__(self, "value", int(self.value))

    def generator(self) -> np.random.Generator:
        """Counter-based generator keyed by this seed."""
        return np.random.Generator(np.random.Philox(key=self.value))

    def stream(self, index: int) -> np.random.Generator:
        """Independent generator for work item ``index`` (row, repetition, ...).

        The item index occupies the top word of the Philox counter, so the
        draws for an item do not depend on which other items were drawn.
        """
        counter = np.array([0, 0, 0, index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self.value, counter=counter))

    def spawn(self, *keys: int) -> "Seed":
        """Derive a child seed deterministically from this one."""
        sequence = np.random.SeedSequence(entropy=self.value, spawn_key=tuple(keys))
        return Seed(int(sequence.generate_state(1, dtype=np.uint64)[0]))


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric n x n similarity matrix held densely or as an upper triangle.

    Use :meth:`from_dense` or :meth:`from_upper_triplets` rather than the
    constructor. Sparse storage keeps entries with i <= j only; reads mirror.
    """

    n: int
    kind: MatrixKind
    dense: Optional[NDArray[np.float64]] = None
    upper: Optional[scipy.sparse.csr_matrix] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError("A similarity matrix needs at least one object")
        if (self.dense is None) == (self.upper is None):
            raise ValidationError("Exactly one of dense or upper storage must be given")
        object.__setattr__(self, "kind", MatrixKind(self.kind))
        if self.dense is not None:
            values = self.dense
        else:
            values = self.upper.data  # type: ignore[union-attr]
        if not np.all(np.isfinite(values)):
            raise ValidationError("Similarity matrix contains non-finite entries")
        self._check_kind()

    @classmethod
    def from_dense(
        cls, values: ArrayLike, kind: MatrixKind = MatrixKind.GENERIC, tol: float = 0.0
    ) -> "SimilarityMatrix":
        """Build from a full square array, rejecting asymmetry beyond ``tol``."""
        array = np.array(values, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DimensionError(f"Similarity matrix must be square, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValidationError("Similarity matrix contains non-finite entries")
        gap = float(np.max(np.abs(array - array.T))) if array.size else 0.0
        if gap > tol:
            raise ValidationError(f"Matrix is not symmetric (max |A - A^T| = {gap:.3e})")
        array = (array + array.T) / 2.0
        return cls(n=array.shape[0], kind=kind, dense=_frozen(array))

    @classmethod
    def from_upper_triplets(
        cls,
        n: int,
        rows: ArrayLike,
        cols: ArrayLike,
        values: ArrayLike,
        kind: MatrixKind = MatrixKind.GENERIC,
    ) -> "SimilarityMatrix":
        """Build sparse storage from (i, j, value) triplets; (j, i) is folded onto (i, j)."""
        r = np.asarray(rows, dtype=np.int64)
        c = np.asarray(cols, dtype=np.int64)
        v = np.asarray(values, dtype=np.float64)
        if not (r.shape == c.shape == v.shape):
            raise DimensionError("Triplet arrays must have equal length")
        if r.size and (min(r.min(), c.min()) < 0 or max(r.max(), c.max()) >= n):
            raise DimensionError(f"Triplet index out of range for n={n}")
        lo, hi = np.minimum(r, c), np.maximum(r, c)
        upper = scipy.sparse.csr_matrix((v, (lo, hi)), shape=(n, n))
        upper.sum_duplicates()
        upper.eliminate_zeros()
        upper.sort_indices()
        return cls(n=n, kind=kind, upper=upper)

    def _check_kind(self) -> None:
        diagonal = self.diagonal()
        if self.dense is not None:
            values = self.dense
        else:
            values = self.upper.data  # type: ignore[union-attr]
        if self.kind is MatrixKind.ADJACENCY:
            if not np.all((values == 0.0) | (values == 1.0)):
                raise ValidationError("Adjacency matrices may only contain 0 and 1")
            if np.any(diagonal != 0.0):
                raise ValidationError("Adjacency matrices must have a zero diagonal")
        elif self.kind is MatrixKind.CORRELATION:
            if values.size and (values.min() < -1.0 or values.max() > 1.0):
                raise ValidationError("Correlation entries must lie in [-1, 1]")
            if np.any(diagonal != 1.0):
                raise ValidationError("Correlation matrices must have a unit diagonal")

    @property
    def is_sparse(self) -> bool:
        return self.upper is not None

    def entry(self, i: int, j: int) -> float:
        if self.dense is not None:
            return float(self.dense[i, j])
        lo, hi = min(i, j), max(i, j)
        return float(self.upper[lo, hi])  # type: ignore[index]

    def diagonal(self) -> NDArray[np.float64]:
        if self.dense is not None:
            return np.diag(self.dense).copy()
        return np.asarray(self.upper.diagonal(), dtype=np.float64)  # type: ignore[union-attr]

    def to_dense(self) -> NDArray[np.float64]:
        """Full symmetric array (a fresh copy)."""
        if self.dense is not None:
            return np.array(self.dense)
        upper = self.upper.toarray()  # type: ignore[union-attr]
        return upper + np.triu(upper, 1).T

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        """Full symmetric CSR matrix."""
        if self.dense is not None:
            return scipy.sparse.csr_matrix(self.dense)
        upper = self.upper
        strict = scipy.sparse.triu(upper, k=1)
        full = (upper + strict.T).tocsr()
        full.sort_indices()
        return full

    def upper_triplets(self) -> Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
        """Nonzero entries with i <= j in row-major order."""
        if self.dense is not None:
            rows, cols = np.nonzero(np.triu(self.dense))
            return rows.astype(np.int64), cols.astype(np.int64), self.dense[rows, cols].copy()
        coo = self.upper.tocoo()  # type: ignore[union-attr]
        order = np.lexsort((coo.col, coo.row))
        return (
            coo.row[order].astype(np.int64),
            coo.col[order].astype(np.int64),
            coo.data[order].astype(np.float64),
        )

    def frobenius_norm(self) -> float:
        if self.dense is not None:
            return float(np.linalg.norm(self.dense))
        return float(scipy.sparse.linalg.norm(self.to_sparse()))


@dataclass(frozen=True)
class PointCloud:
    """n points in R^dim, one per row."""

    coords: NDArray[np.float64]

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if coords.ndim != 2 or coords.shape[1] < 1:
            raise DimensionError(f"Point cloud must be an n x dim array, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("Point cloud contains non-finite coordinates")
        object.__setattr__(self, "coords", _frozen(coords))

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def dim(self) -> int:
        return int(self.coords.shape[1])

    def subset(self, indices: ArrayLike) -> "PointCloud":
        return PointCloud(self.coords[np.asarray(indices, dtype=np.int64)])


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distances with a zero diagonal.

    ``numpy.inf`` is the sentinel for pairs with no connecting path.
    """

    entries: NDArray[np.float64]

    DISCONNECTED = float("inf")

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError(f"Distance matrix must be square, got shape {entries.shape}")
        if np.any(np.isnan(entries)):
            raise ValidationError("Distance matrix contains NaN")
        if np.any(entries < 0):
            raise ValidationError("Distance matrix contains negative entries")
        if np.any(np.diag(entries) != 0):
            raise ValidationError("Distance matrix must have a zero diagonal")
        if not np.array_equal(entries, entries.T):
            raise ValidationError("Distance matrix must be symmetric")
        object.__setattr__(self, "entries", _frozen(entries))

    @classmethod
    def from_points(cls, cloud: PointCloud) -> "DistanceMatrix":
        """Euclidean distances between the rows of a point cloud."""
        if cloud.n == 1:
            return cls(np.zeros((1, 1)))
        return cls(squareform(pdist(cloud.coords)))

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def has_disconnected(self) -> bool:
        return bool(np.any(np.isinf(self.entries)))

    def submatrix(self, indices: ArrayLike) -> "DistanceMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return DistanceMatrix(self.entries[np.ix_(idx, idx)])


def normalize_signs(vectors: NDArray[np.float64]) -> NDArray[np.float64]:
    """Flip columns so their largest-magnitude component is positive (first index on ties)."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


class EigenResult(NamedTuple):
    """Eigenpairs ordered by descending magnitude."""

    values: NDArray[np.float64]
    vectors: NDArray[np.float64]


def _order_eigenpairs(
    values: NDArray[np.float64], vectors: NDArray[np.float64]
) -> EigenResult:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if scale == 0.0:
        scale = 1.0
    magnitude = np.round(np.abs(values) / (scale * _TIE_TOL))
    order = np.lexsort((np.arange(values.size), -values, -magnitude))
    return EigenResult(values[order], normalize_signs(vectors[:, order]))


def _check_residual(
    operator: object, result: EigenResult, norm: float, tol: float, path: str
) -> None:
    if result.values.size == 0:
        return
    product = operator @ result.vectors  # type: ignore[operator]
    residual = float(np.max(np.linalg.norm(product - result.vectors * result.values, axis=0)))
    logger.debug("%s eigensolver residual %.3e (norm %.3e)", path, residual, norm)
    if residual > tol * max(norm, np.finfo(float).tiny):
        raise ConvergenceError(f"{path} eigensolver did not reach tolerance {tol}", residual)


def symmetric_eigs(
    m: SimilarityMatrix,
    p: int,
    seed: Optional[Seed] = None,
    dense_threshold: int = DENSE_THRESHOLD,
    max_iter: Optional[int] = None,
) -> EigenResult:
    """Top-``p`` eigenpairs of a symmetric matrix by descending |eigenvalue|.

    Magnitude ties go to the positive eigenvalue, then to the lower index.
    Matrices with n <= ``dense_threshold`` use a full dense decomposition;
    larger ones use ARPACK's implicitly restarted Lanczos with a starting
    vector drawn from ``seed``.
    """
    if p < 1 or p > m.n:
        raise DimensionError(f"Requested {p} eigenpairs from a {m.n} x {m.n} matrix")

    norm = m.frobenius_norm()
    if m.n <= dense_threshold or p >= m.n - 1:
        dense = m.to_dense()
        values, vectors = scipy.linalg.eigh(dense)
        ordered = _order_eigenpairs(values, vectors)
        result = EigenResult(ordered.values[:p].copy(), ordered.vectors[:, :p].copy())
        _check_residual(dense, result, norm, DENSE_RESIDUAL_TOL, "Dense")
        return result

    operator = m.to_sparse() if m.is_sparse else m.to_dense()
    start = (seed or Seed(0)).generator().standard_normal(m.n)
    logger.info("Running Lanczos for %d eigenpairs of a %d x %d matrix", p, m.n, m.n)
    try:
        values, vectors = scipy.sparse.linalg.eigsh(
            operator, k=p, which="LM", v0=start, maxiter=max_iter, tol=0
        )
    except scipy.sparse.linalg.ArpackNoConvergence as e:
        residual = None
        if e.eigenvalues is not None and len(e.eigenvalues):
            partial = operator @ e.eigenvectors - e.eigenvectors * e.eigenvalues
            residual = float(np.max(np.linalg.norm(partial, axis=0)))
        raise ConvergenceError(
            f"Lanczos iteration stopped after max_iter={max_iter} with "
            f"{0 if e.eigenvalues is None else len(e.eigenvalues)} of {p} eigenpairs converged",
            residual,
        ) from e
    result = _order_eigenpairs(values, vectors)
    _check_residual(operator, result, norm, ITERATIVE_RESIDUAL_TOL, "Iterative")
    return result


def double_center(d: DistanceMatrix) -> NDArray[np.float64]:
    """Return B = -1/2 J D^(2) J with J the centering matrix."""
    if d.has_disconnected:
        raise DisconnectedGraphError(
            "Distance matrix has disconnected pairs; restrict to a connected component first"
        )
    squared = d.entries**2
    row_means = squared.mean(axis=1)
    col_means = squared.mean(axis=0)
    grand = squared.mean()
    centered = -0.5 * (squared - row_means[:, None] - col_means[None, :] + grand)
    return (centered + centered.T) / 2.0
