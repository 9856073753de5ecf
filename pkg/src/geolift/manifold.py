"""
Neighborhood graphs, graph geodesics, classical MDS and the Isomap composition.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
from numpy.typing import NDArray
from scipy.sparse import csgraph
from scipy.spatial.distance import pdist
from sklearn.neighbors import NearestNeighbors

from .core import DistanceMatrix, PointCloud, double_center, normalize_signs
from .errors import ConfigError, DimensionError, DisconnectedGraphError, ValidationError
from .spectral import AUTO, select_rank

logger = logging.getLogger(__name__)

# Weight given to edges between coincident points.
COINCIDENT_WEIGHT = float(np.finfo(float).tiny)

GEODESIC_QUANTILES = (0.0, 0.05, 0.5, 0.95, 1.0)

# Relative slack on the radius handed to the neighbor index; candidates are re-filtered exactly.
_RADIUS_SLACK = 1e-9

# Share of an edge's squared length that noise correction always keeps.
MIN_RETAINED_SQUARE = 0.25

_EDGE_CHUNK = 65536


def _pair_distances(
    coords: NDArray[np.float64], rows: NDArray[np.int64], cols: NDArray[np.int64]
) -> NDArray[np.float64]:
    """Euclidean distances between coords[rows] and coords[cols].

    Every distance that decides graph membership goes through here so that the
    spanning-tree threshold and the graph filter agree bit for bit.
    """
    return np.asarray(np.sqrt(np.sum((coords[rows] - coords[cols]) ** 2, axis=1)))


class RuleKind(str, Enum):
    EPSILON_AUTO = "epsilon_auto"
    EPSILON = "epsilon"
    EPSILON_QUANTILE = "epsilon_quantile"
    KNN = "knn"


@dataclass(frozen=True)
class GraphRule:
    """How the neighborhood graph is built: a radius (fixed, automatic or quantile) or k."""

    kind: RuleKind
    value: Optional[float] = None

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", RuleKind(self.kind))
        except ValueError as e:
            names = ", ".join(k.value for k in RuleKind)
            raise ConfigError(f"Unknown graph rule {self.kind!r}; expected one of {names}") from e

        value = self.value
        if self.kind is RuleKind.EPSILON_AUTO:
            if value is not None:
                raise ConfigError("epsilon_auto takes no value")
            return
        if not isinstance(value, (int, float, np.integer, np.floating)) or isinstance(value, bool):
            raise ConfigError(f"Graph rule {self.kind.value} needs a numeric value")
        if self.kind is RuleKind.EPSILON:
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"epsilon must be finite and nonnegative, got {value!r}")
        elif self.kind is RuleKind.EPSILON_QUANTILE:
            if not 0.0 < value < 1.0:
                raise ConfigError(f"epsilon_quantile must lie in (0, 1), got {value!r}")
        elif int(value) != value or value < 1:
            raise ConfigError(f"knn needs an integer k >= 1, got {value!r}")

    @classmethod
    def epsilon_auto(cls) -> "GraphRule":
        return cls(RuleKind.EPSILON_AUTO)

    @classmethod
    def epsilon(cls, value: float) -> "GraphRule":
        return cls(RuleKind.EPSILON, float(value))

    @classmethod
    def epsilon_quantile(cls, q: float) -> "GraphRule":
        return cls(RuleKind.EPSILON_QUANTILE, float(q))

    @classmethod
    def knn(cls, k: int) -> "GraphRule":
        return cls(RuleKind.KNN, k)

    @property
    def is_radius(self) -> bool:
        return self.kind is not RuleKind.KNN


class ComponentPolicy(str, Enum):
    REQUIRE_CONNECTED = "require_connected"
    LARGEST_COMPONENT = "largest_component"


@dataclass(frozen=True)
class IsomapConfig:
    """Graph rule, output dimension (integer or ``"auto"``) and disconnection policy."""

    rule: GraphRule = field(default_factory=GraphRule.epsilon_auto)
    d: Union[int, str] = 2
    max_d: int = 10
    component_policy: ComponentPolicy = ComponentPolicy.REQUIRE_CONNECTED
    noise_correction: bool = True

    def __post_init__(self) -> None:
        if isinstance(self.d, str):
            if self.d != AUTO:
                raise ConfigError(f"isomap.d must be a positive integer or 'auto', got {self.d!r}")
        elif isinstance(self.d, bool) or not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"isomap.d must be a positive integer or 'auto', got {self.d!r}")
        if isinstance(self.max_d, bool) or not isinstance(self.max_d, int) or self.max_d < 1:
            raise ConfigError(f"isomap.max_d must be a positive integer, got {self.max_d!r}")
        try:
            object.__setattr__(self, "component_policy", ComponentPolicy(self.component_policy))
        except ValueError as e:
            raise ConfigError(f"Unknown component policy {self.component_policy!r}") from e
        if not isinstance(self.noise_correction, bool):
            raise ConfigError(
                f"isomap.noise_correction must be true or false, got {self.noise_correction!r}"
            )

    @property
    def is_auto(self) -> bool:
        return self.d == AUTO


@dataclass(frozen=True)
class NeighborhoodGraph:
    """Undirected weighted graph stored as upper-triangle edge arrays (i < j, sorted)."""

    n: int
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    weights: NDArray[np.float64]
    rule: GraphRule
    epsilon: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (rows.shape == cols.shape == weights.shape):
            raise ValidationError("Edge arrays must have equal length")
        if rows.size:
            if np.any(rows >= cols):
                raise ValidationError("Edges must satisfy i < j (no self-loops)")
            if rows.min() < 0 or cols.max() >= self.n:
                raise ValidationError(f"Edge index out of range for n={self.n}")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValidationError("Edge weights must be finite and strictly positive")
            keys = rows * self.n + cols
            if np.unique(keys).size != keys.size:
                raise ValidationError("Duplicate edges")
        order = np.lexsort((cols, rows))
        for name, array in (("rows", rows), ("cols", cols), ("weights", weights)):
            array = array[order]
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def edge_count(self) -> int:
        return int(self.rows.size)

    def edges(self) -> List[Tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.rows, self.cols, self.weights)]

    def to_csr(self) -> scipy.sparse.csr_matrix:
        """Symmetric weighted adjacency in CSR form."""
        rows = np.concatenate([self.rows, self.cols])
        cols = np.concatenate([self.cols, self.rows])
        data = np.concatenate([self.weights, self.weights])
        return scipy.sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def restrict(self, vertices: NDArray[np.int64]) -> "NeighborhoodGraph":
        """Induced subgraph on ``vertices`` (ascending), renumbered 0..len-1."""
        vertices = np.asarray(vertices, dtype=np.int64)
        position = np.full(self.n, -1, dtype=np.int64)
        position[vertices] = np.arange(vertices.size)
        keep = (position[self.rows] >= 0) & (position[self.cols] >= 0)
        return NeighborhoodGraph(
            n=int(vertices.size),
            rows=position[self.rows[keep]],
            cols=position[self.cols[keep]],
            weights=self.weights[keep],
            rule=self.rule,
            epsilon=self.epsilon,
            k=self.k,
        )


def min_connecting_epsilon(x: PointCloud) -> float:
    """Smallest radius whose epsilon-graph is connected.

    This is the longest edge of a Euclidean minimum spanning tree, grown with
    Prim's algorithm over the implicit complete graph (O(n) memory).
    """
    if x.n < 2:
        raise ValidationError("min_connecting_epsilon needs at least two points")
    coords = x.coords
    n = x.n
    everyone = np.arange(n, dtype=np.int64)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = _pair_distances(coords, everyone, np.zeros(n, dtype=np.int64))
    longest = 0.0
    for _ in range(n - 1):
        candidates = np.where(in_tree, np.inf, best)
        j = int(np.argmin(candidates))
        longest = max(longest, float(candidates[j]))
        in_tree[j] = True
        best = np.minimum(best, _pair_distances(coords, everyone, np.full(n, j, dtype=np.int64)))
    logger.debug("Minimum connecting epsilon %.17g over %d points", longest, n)
    return longest


def _resolve_epsilon(x: PointCloud, rule: GraphRule) -> float:
    if rule.kind is RuleKind.EPSILON:
        return float(rule.value)  # type: ignore[arg-type]
    if x.n < 2:
        return 0.0
    if rule.kind is RuleKind.EPSILON_AUTO:
        return min_connecting_epsilon(x)
    return float(np.quantile(pdist(x.coords), rule.value))


def _epsilon_edges(
    x: PointCloud, epsilon: float
) -> Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    radius = epsilon * (1.0 + _RADIUS_SLACK) + np.finfo(float).tiny
    index = NearestNeighbors(radius=radius).fit(x.coords)
    neighborhoods = index.radius_neighbors(x.coords, return_distance=False)
    counts = np.array([len(nb) for nb in neighborhoods], dtype=np.int64)
    rows = np.repeat(np.arange(x.n, dtype=np.int64), counts)
    cols = np.concatenate(neighborhoods).astype(np.int64) if rows.size else rows.copy()
    upper = rows < cols
    rows, cols = rows[upper], cols[upper]
    weights = _pair_distances(x.coords, rows, cols)
    keep = weights <= epsilon
    return rows[keep], cols[keep], weights[keep]


def _knn_edges(
    x: PointCloud, k: int
) -> Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    neighbors = min(k, x.n - 1)
    if neighbors < 1:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0)
    if neighbors < k:
        logger.warning("k=%d exceeds the %d other points; using all of them", k, x.n - 1)
    index = NearestNeighbors(n_neighbors=neighbors).fit(x.coords)
    # Querying the fitted data itself excludes each point from its own neighbor list.
    found = index.kneighbors(return_distance=False)
    rows = np.repeat(np.arange(x.n, dtype=np.int64), neighbors)
    cols = found.reshape(-1).astype(np.int64)
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    keys = np.unique(lo * x.n + hi)
    rows, cols = keys // x.n, keys % x.n
    return rows, cols, _pair_distances(x.coords, rows, cols)


def build_neighborhood_graph(x: PointCloud, rule: GraphRule) -> NeighborhoodGraph:
    """Epsilon-ball or union-symmetrized k-nearest-neighbor graph weighted by Euclidean length."""
    epsilon: Optional[float] = None
    k: Optional[int] = None
    if rule.is_radius:
        epsilon = _resolve_epsilon(x, rule)
        rows, cols, weights = _epsilon_edges(x, epsilon)
        logger.info(
            "Epsilon graph (%s): epsilon=%.6g, %d edges", rule.kind.value, epsilon, rows.size
        )
    else:
        k = int(rule.value)  # type: ignore[arg-type]
        rows, cols, weights = _knn_edges(x, k)
        logger.info("kNN graph: k=%d, %d edges", k, rows.size)
    weights = np.where(weights > 0, weights, COINCIDENT_WEIGHT)
    return NeighborhoodGraph(x.n, rows, cols, weights, rule, epsilon=epsilon, k=k)


def connected_components(g: NeighborhoodGraph) -> Tuple[NDArray[np.int64], List[int]]:
    """Component labels numbered by lowest member vertex, and the size of each component."""
    if g.n == 0:
        return np.zeros(0, dtype=np.int64), []
    _, raw = csgraph.connected_components(g.to_csr(), directed=False)
    _, first = np.unique(raw, return_index=True)
    relabel = np.empty(first.size, dtype=np.int64)
    relabel[np.argsort(first)] = np.arange(first.size)
    labels = relabel[raw]
    sizes = np.bincount(labels).tolist()
    return labels, [int(s) for s in sizes]


def correct_for_noise(
    g: NeighborhoodGraph, x: PointCloud, noise: NDArray[np.float64]
) -> NeighborhoodGraph:
    """Remove the expected sideways noise from every edge length.

    With C the summed covariance of an edge's endpoints and u its direction,
    noise perpendicular to u adds tr(C) - u^T C u to the squared length on
    average, and paths built from such edges zigzag. That amount is subtracted,
    keeping at least MIN_RETAINED_SQUARE of the squared length. Which edges exist
    does not change.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (x.n, x.dim, x.dim):
        raise DimensionError(
            f"Noise covariances must have shape {(x.n, x.dim, x.dim)}, got {noise.shape}"
        )
    weights = np.array(g.weights)
    real = np.flatnonzero(weights > COINCIDENT_WEIGHT)
    trace = np.trace(noise, axis1=1, axis2=2)
    for start in range(0, real.size, _EDGE_CHUNK):
        edges = real[start : start + _EDGE_CHUNK]
        rows, cols, length = g.rows[edges], g.cols[edges], weights[edges]
        unit = (x.coords[cols] - x.coords[rows]) / length[:, None]
        along = np.einsum("mk,mkl,ml->m", unit, noise[rows] + noise[cols], unit)
        sideways = trace[rows] + trace[cols] - along
        squared = length**2
        weights[edges] = np.sqrt(np.maximum(squared - sideways, MIN_RETAINED_SQUARE * squared))
    weights = np.where(weights > 0, weights, COINCIDENT_WEIGHT)
    if real.size:
        logger.info(
            "Noise correction shortened edges by %.3g%% in total",
            100.0 * (1.0 - weights[real].sum() / g.weights[real].sum()),
        )
    return NeighborhoodGraph(g.n, g.rows, g.cols, weights, g.rule, epsilon=g.epsilon, k=g.k)


def shortest_paths(g: NeighborhoodGraph, threads: int = 1) -> DistanceMatrix:
    """All-pairs weighted shortest paths by repeated Dijkstra; +inf between components."""
    if g.n == 0:
        return DistanceMatrix(np.zeros((0, 0)))
    graph = g.to_csr()
    workers = max(1, min(int(threads), g.n))
    chunks = np.array_split(np.arange(g.n), workers)

    def run(sources: NDArray[np.int64]) -> NDArray[np.float64]:
        return np.asarray(csgraph.dijkstra(graph, directed=False, indices=sources))

    if workers == 1:
        blocks = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, chunks))
    distances = np.vstack(blocks)
    # Path sums may round differently from each end.
    distances = np.minimum(distances, distances.T)
    np.fill_diagonal(distances, 0.0)
    return DistanceMatrix(distances)


class CmdsResult(NamedTuple):
    cloud: PointCloud
    spectrum: NDArray[np.float64]
    deficiency: int


def cmds_decompose(d: DistanceMatrix, dim: int, spectrum_size: int = 0) -> CmdsResult:
    """Classical MDS plus the leading ``max(dim, spectrum_size)`` eigenvalues of B.

    Only eigenvalues above n * machine-epsilon * lambda_max count as positive;
    missing dimensions are returned as zero columns and counted in ``deficiency``.
    """
    if dim < 1:
        raise ValidationError(f"CMDS dimension must be positive, got {dim}")
    b = double_center(d)
    n = d.n
    if n == 0:
        return CmdsResult(PointCloud(np.zeros((0, dim))), np.zeros(0), dim)

    count = min(max(dim, spectrum_size), n)
    values, vectors = scipy.linalg.eigh(b, subset_by_index=[n - count, n - 1])
    values, vectors = values[::-1], vectors[:, ::-1]

    top = max(float(values[0]), 0.0)
    usable = min(dim, count)
    positive = values[:usable] > n * np.finfo(float).eps * top
    kept = int(np.count_nonzero(positive))
    coords = np.zeros((n, dim))
    if kept:
        block = normalize_signs(vectors[:, :kept]) * np.sqrt(values[:kept])
        coords[:, :kept] = block - block.mean(axis=0)
    deficiency = dim - kept
    if deficiency:
        logger.warning(
            "Only %d of %d requested CMDS dimensions have positive eigenvalues", kept, dim
        )
    return CmdsResult(PointCloud(coords), values.copy(), deficiency)


def cmds(d: DistanceMatrix, dim: int) -> PointCloud:
    """Classical (Torgerson) multidimensional scaling of a finite distance matrix."""
    return cmds_decompose(d, dim).cloud


@dataclass
class IsomapDiagnostics:
    """What an Isomap run decided, in a JSON-ready shape."""

    rule: str
    epsilon: Optional[float]
    k: Optional[int]
    quantile: Optional[float]
    edge_count: int
    component_sizes: List[int]
    dropped: List[int]
    spectrum: List[float]
    dimension: int
    dimension_selected: bool
    deficiency: int
    geodesic_quantiles: Dict[str, float]
    noise_corrected: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rule": self.rule,
            "epsilon": self.epsilon,
            "k": self.k,
            "quantile": self.quantile,
            "edge_count": self.edge_count,
            "component_sizes": list(self.component_sizes),
            "dropped": list(self.dropped),
            "spectrum": list(self.spectrum),
            "dimension": self.dimension,
            "dimension_selected": self.dimension_selected,
            "deficiency": self.deficiency,
            "geodesic_quantiles": dict(self.geodesic_quantiles),
            "noise_corrected": self.noise_corrected,
        }


class IsomapResult(NamedTuple):
    cloud: PointCloud
    kept: NDArray[np.int64]
    diagnostics: IsomapDiagnostics
    geodesics: DistanceMatrix


def _choose_component(
    labels: NDArray[np.int64], sizes: List[int], policy: ComponentPolicy
) -> NDArray[np.int64]:
    if len(sizes) <= 1:
        return np.arange(labels.size, dtype=np.int64)
    if policy is ComponentPolicy.REQUIRE_CONNECTED:
        raise DisconnectedGraphError(
            f"Neighborhood graph has {len(sizes)} connected components", sizes
        )
    # Labels are ordered by lowest vertex, so argmax breaks size ties toward it.
    chosen = int(np.argmax(sizes))
    logger.info(
        "Keeping component of size %d; dropping %d vertices",
        sizes[chosen],
        labels.size - sizes[chosen],
    )
    return np.flatnonzero(labels == chosen).astype(np.int64)


def _geodesic_quantiles(d: DistanceMatrix) -> Dict[str, float]:
    if d.n < 2:
        return {}
    upper = d.entries[np.triu_indices(d.n, k=1)]
    values = np.quantile(upper, GEODESIC_QUANTILES)
    return {f"{q:g}": float(v) for q, v in zip(GEODESIC_QUANTILES, values)}


def isomap(
    x: PointCloud,
    cfg: IsomapConfig,
    threads: int = 1,
    noise: Optional[NDArray[np.float64]] = None,
) -> IsomapResult:
    """Neighborhood graph, graph geodesics and CMDS on the retained component.

    ``noise`` holds per-point embedding covariances; when given and
    ``cfg.noise_correction`` is set, edge lengths go through :func:`correct_for_noise`.
    """
    graph = build_neighborhood_graph(x, cfg.rule)
    corrected = False
    if noise is not None and cfg.noise_correction:
        graph = correct_for_noise(graph, x, noise)
        corrected = True
    labels, sizes = connected_components(graph)
    logger.info("Neighborhood graph components: %s", sizes)
    kept = _choose_component(labels, sizes, cfg.component_policy)
    dropped = np.setdiff1d(np.arange(x.n, dtype=np.int64), kept)
    if kept.size < x.n:
        graph = graph.restrict(kept)

    geodesics = shortest_paths(graph, threads=threads)
    n = geodesics.n
    spectrum_size = cfg.max_d + 1
    if cfg.is_auto:
        if n < 2:
            raise ValidationError("Automatic dimension selection needs at least two points")
        preview = cmds_decompose(geodesics, 1, spectrum_size)
        magnitudes = np.clip(preview.spectrum, 0.0, None)
        dim = select_rank(magnitudes, min(cfg.max_d, magnitudes.size - 1))
    else:
        dim = int(cfg.d)
    result = cmds_decompose(geodesics, dim, spectrum_size)

    diagnostics = IsomapDiagnostics(
        rule=cfg.rule.kind.value,
        epsilon=graph.epsilon,
        k=graph.k,
        quantile=cfg.rule.value if cfg.rule.kind is RuleKind.EPSILON_QUANTILE else None,
        edge_count=graph.edge_count,
        component_sizes=sizes,
        dropped=[int(i) for i in dropped],
        spectrum=[float(v) for v in result.spectrum],
        dimension=dim,
        dimension_selected=cfg.is_auto,
        deficiency=result.deficiency,
        geodesic_quantiles=_geodesic_quantiles(geodesics),
        noise_corrected=corrected,
    )
    logger.info("Isomap embedded %d of %d points into %d dimensions", n, x.n, dim)
    return IsomapResult(result.cloud, kept, diagnostics, geodesics)
