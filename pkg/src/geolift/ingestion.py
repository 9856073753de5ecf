"""
Loaders and writers for similarity matrices, point clouds and time-series tables.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from .core import DistanceMatrix, MatrixKind, PointCloud, SimilarityMatrix
from .errors import (
    ConfigError,
    DataConditionError,
    DimensionError,
    ValidationError,
    ZeroVarianceError,
)
from .utils import (
    PathLike,
    coordinate_columns,
    default_labels,
    format_float,
    read_frame,
    write_frame,
    write_text,
)

logger = logging.getLogger(__name__)

DENSE_SYMMETRY_TOL = 1e-9

LABEL_COLUMN = "label"


class DirectedPolicy(str, Enum):
    SYMMETRIZE_ERROR = "symmetrize_error"
    SYMMETRIZE_UNION = "symmetrize_union"


class LabeledMatrix(NamedTuple):
    matrix: SimilarityMatrix
    labels: List[str]
    self_loops: int


def _read_lines(path: PathLike) -> List[str]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return f.read().splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise ValidationError(f"Failed to read {path}: {e}") from e


def load_edge_list(
    path: PathLike, directed_policy: DirectedPolicy = DirectedPolicy.SYMMETRIZE_ERROR
) -> LabeledMatrix:
    """Read ``src<TAB>dst[<TAB>weight]`` lines into a symmetric matrix.

    Vertices are numbered by first appearance. Unweighted files give a binary
    adjacency matrix; weighted files give a generic similarity where repeats
    of a directed pair are summed and the two directions are combined by
    ``directed_policy``. Self-loops are dropped and counted.
    """
    policy = DirectedPolicy(directed_policy)
    index: Dict[str, int] = {}
    directed: Dict[Tuple[int, int], float] = {}
    weighted: Optional[bool] = None
    self_loops = 0

    for number, raw in enumerate(_read_lines(path), start=1):
        line = raw.strip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (2, 3) or not all(f.strip() for f in fields[:2]):
            raise ValidationError(f"{path}:{number}: expected 'src<TAB>dst[<TAB>weight]'")
        has_weight = len(fields) == 3
        if weighted is None:
            weighted = has_weight
        elif weighted != has_weight:
            raise ValidationError(f"{path}:{number}: mixes weighted and unweighted lines")
        weight = 1.0
        if has_weight:
            try:
                weight = float(fields[2])
            except ValueError as e:
                raise ValidationError(f"{path}:{number}: cannot parse weight {fields[2]!r}") from e
            if not np.isfinite(weight):
                raise ValidationError(f"{path}:{number}: weight must be finite")

        src, dst = fields[0].strip(), fields[1].strip()
        for label in (src, dst):
            if label not in index:
                index[label] = len(index)
        i, j = index[src], index[dst]
        if i == j:
            self_loops += 1
            continue
        if has_weight:
            directed[(i, j)] = directed.get((i, j), 0.0) + weight
        else:
            directed[(i, j)] = 1.0

    if not index:
        raise ValidationError(f"Edge list {path} contains no vertices")

    combined: Dict[Tuple[int, int], float] = {}
    for (i, j), w in directed.items():
        key = (min(i, j), max(i, j))
        if key in combined:
            if not weighted:
                continue
            if policy is DirectedPolicy.SYMMETRIZE_ERROR:
                if combined[key] != w:
                    labels = list(index)
                    raise ValidationError(
                        f"Edge {labels[i]}-{labels[j]} has different weights in each direction "
                        f"({combined[key]!r} vs {w!r})"
                    )
                continue
            combined[key] = combined[key] + w
        else:
            combined[key] = w

    keys = sorted(combined)
    rows = np.array([k[0] for k in keys], dtype=np.int64)
    cols = np.array([k[1] for k in keys], dtype=np.int64)
    values = np.array([combined[k] for k in keys], dtype=np.float64)
    kind = MatrixKind.GENERIC if weighted else MatrixKind.ADJACENCY
    if self_loops:
        logger.info("Dropped %d self-loops from %s", self_loops, path)
    logger.info("Loaded %d vertices and %d edges from %s", len(index), len(keys), path)
    matrix = SimilarityMatrix.from_upper_triplets(len(index), rows, cols, values, kind=kind)
    return LabeledMatrix(matrix, list(index), self_loops)


def infer_kind(values: NDArray[np.float64]) -> MatrixKind:
    """Adjacency for 0/1 entries with a zero diagonal, correlation for a unit diagonal."""
    diagonal = np.diag(values)
    if np.all((values == 0.0) | (values == 1.0)) and np.all(diagonal == 0.0):
        return MatrixKind.ADJACENCY
    if np.all(diagonal == 1.0) and values.min() >= -1.0 and values.max() <= 1.0:
        return MatrixKind.CORRELATION
    return MatrixKind.GENERIC


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_dense_matrix(path: PathLike, kind: Optional[MatrixKind] = None) -> LabeledMatrix:
    """Dense CSV matrix with an optional header row of labels."""
    try:
        raw = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError as e:
        raise ValidationError(f"Matrix file {path} is empty") from e
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        raise ValidationError(f"Failed to read matrix file {path}: {e}") from e

    labels: Optional[List[str]] = None
    first = [str(v).strip() for v in raw.iloc[0]]
    if not all(_is_number(v) for v in first):
        labels = first
    try:
        values = read_frame(path, header=None if labels is None else 0, dtype=np.float64)
    except ValueError as e:
        raise ValidationError(f"Matrix file {path} has a non-numeric entry: {e}") from e
    array = values.to_numpy(dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise DimensionError(f"Matrix file {path} is {array.shape[0]}x{array.shape[1]}, not square")
    inferred = infer_kind(array) if kind is None else MatrixKind(kind)
    matrix = SimilarityMatrix.from_dense(array, kind=inferred, tol=DENSE_SYMMETRY_TOL)
    logger.info("Loaded %dx%d %s matrix from %s", matrix.n, matrix.n, inferred.value, path)
    return LabeledMatrix(matrix, labels or default_labels(matrix.n), 0)


def load_dense_matrix(path: PathLike, kind: Optional[MatrixKind] = None) -> SimilarityMatrix:
    """Dense CSV similarity matrix; asymmetry beyond 1e-9 is an error."""
    return read_dense_matrix(path, kind).matrix


def save_dense_matrix(m: SimilarityMatrix, path: PathLike) -> Path:
    """Headerless CSV with 17 significant digits (reads back bit-exactly)."""
    return write_frame(pd.DataFrame(m.to_dense()), path, header=False)


def save_edge_list(
    m: SimilarityMatrix, path: PathLike, labels: Optional[Sequence[str]] = None
) -> Path:
    """Upper-triangle nonzero entries as TSV; weights are omitted for adjacency matrices."""
    names = list(labels) if labels is not None else default_labels(m.n)
    rows, cols, values = m.upper_triplets()
    binary = m.kind is MatrixKind.ADJACENCY
    lines = []
    for i, j, w in zip(rows, cols, values):
        if i == j:
            continue
        if binary:
            lines.append(f"{names[i]}\t{names[j]}")
        else:
            lines.append(f"{names[i]}\t{names[j]}\t{format_float(float(w))}")
    return write_text("".join(line + "\n" for line in lines), path)


def save_point_cloud(
    cloud: PointCloud, path: PathLike, labels: Optional[Sequence[str]] = None
) -> Path:
    """CSV with a ``label`` column followed by x1..x{dim}."""
    names = list(labels) if labels is not None else default_labels(cloud.n)
    if len(names) != cloud.n:
        raise DimensionError(f"{len(names)} labels for {cloud.n} points")
    frame = pd.DataFrame(cloud.coords, columns=coordinate_columns(cloud.dim))
    frame.insert(0, LABEL_COLUMN, names)
    return write_frame(frame, path)


def load_point_cloud(path: PathLike) -> Tuple[PointCloud, List[str]]:
    """Read a point-cloud CSV written by :func:`save_point_cloud`."""
    try:
        frame = read_frame(path, dtype={LABEL_COLUMN: str}, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"Failed to read point cloud {path}: {e}") from e
    if LABEL_COLUMN not in frame.columns:
        raise ValidationError(f"Point cloud {path} has no '{LABEL_COLUMN}' column")
    coords = frame.drop(columns=[LABEL_COLUMN])
    try:
        array = coords.apply(pd.to_numeric, errors="raise").to_numpy(dtype=np.float64)
    except ValueError as e:
        raise ValidationError(f"Point cloud {path} has a non-numeric coordinate: {e}") from e
    return PointCloud(array.reshape(len(frame), -1)), frame[LABEL_COLUMN].tolist()


def save_noise_covariances(
    noise: NDArray[np.float64], path: PathLike, labels: Sequence[str]
) -> Path:
    """CSV with a ``label`` column and the flattened p x p covariance of each row (c1_1..cp_p)."""
    n, p, _ = noise.shape
    if len(labels) != n:
        raise DimensionError(f"{len(labels)} labels for {n} covariances")
    columns = [f"c{k}_{m}" for k in range(1, p + 1) for m in range(1, p + 1)]
    frame = pd.DataFrame(noise.reshape(n, p * p), columns=columns)
    frame.insert(0, LABEL_COLUMN, list(labels))
    return write_frame(frame, path)


def load_noise_covariances(path: PathLike, labels: Sequence[str]) -> NDArray[np.float64]:
    """Read covariances written by :func:`save_noise_covariances`, in the order of ``labels``."""
    try:
        frame = read_frame(path, dtype={LABEL_COLUMN: str}, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"Failed to read noise covariances {path}: {e}") from e
    if LABEL_COLUMN not in frame.columns:
        raise ValidationError(f"Noise covariances {path} have no '{LABEL_COLUMN}' column")
    values = frame.drop(columns=[LABEL_COLUMN]).to_numpy(dtype=np.float64)
    p = int(round(np.sqrt(values.shape[1])))
    if p * p != values.shape[1]:
        raise DimensionError(f"Noise covariances {path} have {values.shape[1]} value columns")
    order = label_positions(frame[LABEL_COLUMN].tolist(), labels, "noise")
    return values[order].reshape(len(order), p, p)


def save_distance_matrix(d: DistanceMatrix, path: PathLike, labels: Sequence[str]) -> Path:
    """Square CSV with a label column and one column per label; +inf written as ``inf``."""
    frame = pd.DataFrame(d.entries, columns=list(labels))
    frame.insert(0, LABEL_COLUMN, list(labels))
    return write_frame(frame, path)


def load_distance_matrix(path: PathLike) -> Tuple[DistanceMatrix, List[str]]:
    frame = read_frame(path, dtype={LABEL_COLUMN: str}, keep_default_na=False)
    if LABEL_COLUMN not in frame.columns:
        raise ValidationError(f"Distance matrix {path} has no '{LABEL_COLUMN}' column")
    labels = frame[LABEL_COLUMN].tolist()
    values = frame.drop(columns=[LABEL_COLUMN]).to_numpy(dtype=np.float64)
    return DistanceMatrix(values), labels


def label_positions(labels: Sequence[str], wanted: Sequence[str], what: str) -> NDArray[np.int64]:
    """Positions of ``wanted`` labels inside ``labels``; unknown labels are an error."""
    lookup = {label: i for i, label in enumerate(labels)}
    missing = [w for w in wanted if w not in lookup]
    if missing:
        preview = ", ".join(missing[:5])
        raise ValidationError(f"{len(missing)} {what} label(s) not found, e.g. {preview}")
    return np.array([lookup[w] for w in wanted], dtype=np.int64)


def load_covariate(path: PathLike, column: str, labels: Sequence[str]) -> NDArray[np.float64]:
    """Values of ``column`` from a labelled CSV, ordered to match ``labels``."""
    try:
        frame = read_frame(path, dtype={LABEL_COLUMN: str}, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"Failed to load covariate file {path}: {e}") from e
    for name in (LABEL_COLUMN, column):
        if name not in frame.columns:
            raise ValidationError(f"Covariate file {path} has no {name!r} column")
    positions = label_positions(frame[LABEL_COLUMN].tolist(), labels, "covariate")
    try:
        values = pd.to_numeric(frame[column], errors="raise").to_numpy(dtype=np.float64)
    except ValueError as e:
        raise ValidationError(f"Covariate {column!r} has a non-numeric value: {e}") from e
    return values[positions]


def load_index_group(path: PathLike) -> List[str]:
    """Vertex labels listed one per line (blank and ``#`` lines ignored)."""
    labels = []
    for raw in _read_lines(path):
        line = raw.strip()
        if line and not line.startswith("#"):
            labels.append(line)
    if not labels:
        raise ValidationError(f"Group file {path} lists no vertices")
    return labels


@dataclass(frozen=True)
class TimeSeriesTable:
    """Entity-by-timestamp values with NaN marking missing observations."""

    entities: Tuple[str, ...]
    timestamps: Tuple[str, ...]
    values: NDArray[np.float64]
    dropped_entities: Tuple[str, ...] = field(default=())
    dropped_timestamps: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "entities", tuple(str(e) for e in self.entities))
        object.__setattr__(self, "timestamps", tuple(str(t) for t in self.timestamps))
        if values.shape != (len(self.entities), len(self.timestamps)):
            raise DimensionError(
                f"Values of shape {values.shape} do not match "
                f"{len(self.entities)} entities x {len(self.timestamps)} timestamps"
            )
        if len(self.entities) < 2:
            raise ValidationError("A time-series table needs at least two entities")
        if np.any(np.isinf(values)):
            raise ValidationError("Time-series values must be finite or missing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def missing(self) -> NDArray[np.bool_]:
        return np.isnan(self.values)


def load_time_series(path: PathLike) -> TimeSeriesTable:
    """CSV with entity labels in the first column, timestamps in the header, blanks missing."""
    try:
        frame = read_frame(
            path, index_col=0, dtype=str, keep_default_na=False, header=0
        )
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"Failed to read time series {path}: {e}") from e
    cleaned = frame.apply(lambda col: col.str.strip()).replace("", np.nan)
    try:
        numeric = cleaned.apply(pd.to_numeric, errors="raise")
    except ValueError as e:
        raise ValidationError(f"Time series {path} has a non-numeric value: {e}") from e
    return TimeSeriesTable(
        tuple(str(e) for e in frame.index),
        tuple(str(t) for t in frame.columns),
        numeric.to_numpy(dtype=np.float64),
    )


def drop_incomplete(t: TimeSeriesTable) -> TimeSeriesTable:
    """Greedily drop the entity or timestamp with the highest missing fraction.

    Ties go to entities before timestamps, then to the lowest index. Stops
    once nothing is missing.
    """
    missing = t.missing
    rows = np.ones(missing.shape[0], dtype=bool)
    cols = np.ones(missing.shape[1], dtype=bool)
    row_counts = missing.sum(axis=1).astype(np.int64)
    col_counts = missing.sum(axis=0).astype(np.int64)

    while row_counts[rows].sum() > 0:
        n_rows, n_cols = int(rows.sum()), int(cols.sum())
        row_frac = np.where(rows, row_counts / n_cols, -1.0)
        col_frac = np.where(cols, col_counts / n_rows, -1.0)
        worst_row = int(np.argmax(row_frac))
        worst_col = int(np.argmax(col_frac))
        if row_frac[worst_row] >= col_frac[worst_col]:
            rows[worst_row] = False
            col_counts -= missing[worst_row] & cols
        else:
            cols[worst_col] = False
            row_counts -= missing[:, worst_col] & rows
        if rows.sum() < 2 or cols.sum() < 1:
            raise DataConditionError(
                "Removing incomplete entities and timestamps leaves fewer than two complete series"
            )

    dropped_entities = tuple(e for e, keep in zip(t.entities, rows) if not keep)
    dropped_timestamps = tuple(s for s, keep in zip(t.timestamps, cols) if not keep)
    if dropped_entities or dropped_timestamps:
        logger.info(
            "Dropped %d entities and %d timestamps with missing values",
            len(dropped_entities),
            len(dropped_timestamps),
        )
    return TimeSeriesTable(
        tuple(e for e, keep in zip(t.entities, rows) if keep),
        tuple(s for s, keep in zip(t.timestamps, cols) if keep),
        t.values[np.ix_(rows, cols)],
        t.dropped_entities + dropped_entities,
        t.dropped_timestamps + dropped_timestamps,
    )


def correlation_matrix(t: TimeSeriesTable) -> SimilarityMatrix:
    """Pearson correlations between complete entity series, unit diagonal."""
    if np.any(t.missing):
        raise ValidationError("Time series has missing values; run drop_incomplete first")
    if len(t.timestamps) < 2:
        raise DataConditionError("Correlation needs at least two common timestamps")
    centered = t.values - t.values.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    for entity, row, norm in zip(t.entities, t.values, norms):
        if norm == 0.0 or np.all(row == row[0]):
            raise ZeroVarianceError(f"Series for entity {entity!r} is constant", entity)
    unit = centered / norms[:, None]
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    corr = np.triu(corr, 1)
    corr = corr + corr.T
    np.fill_diagonal(corr, 1.0)
    logger.info("Correlation matrix over %d entities and %d timestamps", *t.values.shape)
    return SimilarityMatrix.from_dense(corr, kind=MatrixKind.CORRELATION)
