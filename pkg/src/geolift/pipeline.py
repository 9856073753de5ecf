"""
Main pipeline orchestrator: simulate or load, embed, isomap, evaluate.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from . import __version__
from .base_kernel import KernelModel
from .config import PipelineConfig
from .core import DistanceMatrix, PointCloud, SimilarityMatrix
from .errors import DimensionError, ValidationError
from .evaluation import (
    earth_mover_distance,
    geodesic_regression,
    monotonicity_diagnostic,
    recovery_error,
    sample_pairs,
)
from .ingestion import (
    correlation_matrix,
    drop_incomplete,
    label_positions,
    load_covariate,
    load_edge_list,
    load_index_group,
    load_noise_covariances,
    load_point_cloud,
    load_time_series,
    read_dense_matrix,
    save_dense_matrix,
    save_distance_matrix,
    save_edge_list,
    save_noise_covariances,
    save_point_cloud,
)
from .kernel_catalog import KernelLoader
from .manifold import IsomapResult, isomap
from .sampling import (
    noiseless_similarity,
    sample_adjacency,
    sample_latent_grid,
    sample_latent_uniform,
    sparsity_schedule,
)
from .spectral import EmbeddingResult, SpectralEmbedder, embedding_noise
from .svg import save_scatter
from .utils import default_labels, hash_artifacts, write_frame, write_json

logger = logging.getLogger(__name__)

# Child seeds for each random consumer in a run.
STREAM_DESIGN = 0
STREAM_EDGES = 1
STREAM_EIGS = 2
STREAM_PAIRS = 3
STREAM_EMD = 4

TRUTH_FILE = "Z.csv"
EDGES_FILE = "A.edges"
DENSE_FILE = "A.csv"
EMBEDDING_FILE = "X.csv"
NOISE_FILE = "X_noise.csv"
ESTIMATE_FILE = "Zhat.csv"


class Simulation(NamedTuple):
    kernel: KernelModel
    latent: PointCloud
    similarity: SimilarityMatrix
    labels: List[str]


class Embedding(NamedTuple):
    cloud: PointCloud
    labels: List[str]
    result: Optional[EmbeddingResult]
    noise: Optional[NDArray[np.float64]] = None


class Recovery(NamedTuple):
    result: IsomapResult
    labels: List[str]


class GeoliftPipeline:
    """Runs the pipeline stages for one configuration, writing artifacts to ``output_dir``."""

    def __init__(self, config: PipelineConfig) -> None:
        """Initialize the pipeline."""
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.artifacts: List[Path] = []
        self._simulation: Optional[Simulation] = None
        self._embedding: Optional[Embedding] = None
        self._recovery: Optional[Recovery] = None

    def _record(self, path: Path) -> Path:
        if path not in self.artifacts:
            self.artifacts.append(path)
        logger.debug("Wrote %s", path)
        return path

    def _kernel(self) -> KernelModel:
        simulation = self.config.input.simulation
        assert simulation is not None
        description = dict(simulation.kernel)
        rho = description.get("rho", 1.0)
        if isinstance(rho, dict):
            description["rho"] = sparsity_schedule(simulation.n, rho["scale"], rho["exponent"])
        return KernelLoader(description).kernel

    def simulate(self) -> Simulation:
        """Sample latent positions and a similarity matrix from the configured kernel."""
        simulation = self.config.input.simulation
        if simulation is None:
            raise ValidationError("simulate needs an 'input.simulation' section")
        seed = self.config.seed
        kernel = self._kernel()
        print(f"Simulating {kernel.name} with n={simulation.n}, rho={kernel.rho:g}...")
        if simulation.design == "grid":
            latent = sample_latent_grid(kernel.domain, simulation.n)
        else:
            latent = sample_latent_uniform(kernel.domain, simulation.n, seed.spawn(STREAM_DESIGN))
        labels = default_labels(simulation.n)

        self._record(save_point_cloud(latent, self.output_dir / TRUTH_FILE, labels))
        if simulation.noiseless:
            similarity = noiseless_similarity(kernel, latent)
            # The diagonal f(z, z) matters here, so keep the full matrix.
            self._record(save_dense_matrix(similarity, self.output_dir / DENSE_FILE))
        else:
            similarity = sample_adjacency(kernel, latent, seed.spawn(STREAM_EDGES))
            self._record(save_edge_list(similarity, self.output_dir / EDGES_FILE, labels))
        edges = int(similarity.upper_triplets()[0].size)
        meta = {
            "kernel": kernel.describe(),
            "n": simulation.n,
            "rho": kernel.rho,
            "seed": seed.value,
            "design": simulation.design,
            "noiseless": simulation.noiseless,
            "nonzero_pairs": edges,
        }
        self._record(write_json(meta, self.output_dir / "meta.json"))
        self._simulation = Simulation(kernel, latent, similarity, labels)
        return self._simulation

    def _similarity(self) -> Tuple[SimilarityMatrix, List[str]]:
        source = self.config.input
        if source.source == "simulation":
            simulation = self._simulation or self.simulate()
            return simulation.similarity, simulation.labels
        assert source.path is not None
        if source.source == "edge_list":
            loaded = load_edge_list(source.path, source.directed_policy)
            return loaded.matrix, loaded.labels
        if source.source == "dense_matrix":
            loaded = read_dense_matrix(source.path, source.kind)
            return loaded.matrix, loaded.labels
        table = drop_incomplete(load_time_series(source.path))
        if table.dropped_entities or table.dropped_timestamps:
            print(
                f"Removed {len(table.dropped_entities)} entities and "
                f"{len(table.dropped_timestamps)} timestamps with missing values"
            )
        return correlation_matrix(table), list(table.entities)

    def embed(self) -> Embedding:
        """Spectral embedding of the input similarity matrix."""
        matrix, labels = self._similarity()
        seed = self.config.seed.spawn(STREAM_EIGS)
        print(f"Embedding {matrix.n} objects...")
        result = SpectralEmbedder(self.config.spectral, seed).fit(matrix)
        kept = [labels[i] for i in result.kept]

        self._record(save_point_cloud(result.cloud, self.output_dir / EMBEDDING_FILE, kept))
        spectrum = pd.DataFrame(
            {"index": np.arange(1, result.spectrum.size + 1), "eigenvalue": result.spectrum}
        )
        self._record(write_frame(spectrum, self.output_dir / "spectrum.csv"))
        rank = {
            "p": result.rank,
            "selected": result.rank_selected,
            "max_p": self.config.spectral.max_p,
            "degree_corrected": self.config.spectral.degree_correct,
            "dropped": [labels[i] for i in result.dropped],
        }
        self._record(write_json(rank, self.output_dir / "rank.json"))

        noise: Optional[NDArray[np.float64]] = None
        if self.config.isomap.noise_correction:
            if self.config.spectral.degree_correct:
                logger.info("Noise correction does not apply to degree-corrected embeddings")
            else:
                noise = embedding_noise(matrix, result.cloud, result.spectrum[: result.rank])
                path = self.output_dir / NOISE_FILE
                self._record(save_noise_covariances(noise, path, kept))
        self._embedding = Embedding(result.cloud, kept, result, noise)
        return self._embedding

    def _load_embedding(self) -> Embedding:
        if self._embedding is not None:
            return self._embedding
        stored = self.output_dir / EMBEDDING_FILE
        if stored.exists():
            logger.info("Using existing embedding %s", stored)
            cloud, labels = load_point_cloud(stored)
            noise: Optional[NDArray[np.float64]] = None
            noise_file = self.output_dir / NOISE_FILE
            if self.config.isomap.noise_correction and noise_file.exists():
                noise = load_noise_covariances(noise_file, labels)
            self._embedding = Embedding(cloud, labels, None, noise)
            return self._embedding
        return self.embed()

    def _truth_file(self) -> Optional[Path]:
        if self.config.evaluation.truth is not None:
            return Path(self.config.evaluation.truth)
        if self.config.input.source != "simulation":
            return None
        stored = self.output_dir / TRUTH_FILE
        if self._simulation is None and not stored.exists():
            self.simulate()
        return stored

    def _covariate(
        self, ref_path: Optional[str], column: str, labels: List[str]
    ) -> NDArray[np.float64]:
        path = Path(ref_path) if ref_path is not None else self._truth_file()
        if path is None:
            raise ValidationError(f"Covariate {column!r} needs a path when no truth file exists")
        return load_covariate(path, column, labels)

    def run_isomap(self) -> Recovery:
        """Isomap on the stored or freshly computed embedding."""
        embedding = self._load_embedding()
        cfg = self.config.isomap
        print(f"Running Isomap on {embedding.cloud.n} points ({cfg.rule.kind.value})...")
        result = isomap(embedding.cloud, cfg, threads=self.config.threads, noise=embedding.noise)
        labels = [embedding.labels[i] for i in result.kept]

        self._record(save_point_cloud(result.cloud, self.output_dir / ESTIMATE_FILE, labels))
        diagnostics = result.diagnostics.to_dict()
        diagnostics["dropped_labels"] = [embedding.labels[i] for i in result.diagnostics.dropped]
        diagnostics["n_input"] = embedding.cloud.n
        self._record(write_json(diagnostics, self.output_dir / "diagnostics.json"))

        output = self.config.isomap_output
        if output.geodesics:
            path = self.output_dir / "geodesics.csv"
            self._record(save_distance_matrix(result.geodesics, path, labels))
        if output.scatter:
            color = None
            if output.color_by is not None:
                ref = output.color_by
                color = self._covariate(ref.path, ref.column, labels)
            title = f"Isomap estimate (n={result.cloud.n}, d={result.cloud.dim})"
            cloud = result.cloud
            if cloud.dim > 2:
                cloud = PointCloud(cloud.coords[:, :2])
            self._record(save_scatter(cloud, self.output_dir / "scatter.svg", color, title))
        self._recovery = Recovery(result, labels)
        return self._recovery

    def evaluate(self) -> Dict[str, Any]:
        """Compute the requested diagnostics and write ``metrics.json``."""
        recovery = self._recovery or self.run_isomap()
        zhat, labels = recovery.result.cloud, recovery.labels
        geodesics = recovery.result.geodesics
        request = self.config.evaluation
        metrics: Dict[str, Any] = {"n": zhat.n, "dimension": zhat.dim}

        truth_path = self._truth_file()
        wants_truth = request.recovery is True or request.regression is True
        if truth_path is None and wants_truth:
            raise ValidationError("Recovery or regression requested but no truth file is set")
        truth: Optional[PointCloud] = None
        needs_truth = request.recovery is not False or request.regression is not False
        if truth_path is not None and needs_truth:
            cloud, truth_labels = load_point_cloud(truth_path)
            truth = cloud.subset(label_positions(truth_labels, labels, "truth"))

        if truth is not None and request.recovery is not False:
            if truth.dim == zhat.dim:
                metrics["recovery_error"] = recovery_error(zhat, truth)
            elif request.recovery:
                raise DimensionError(
                    f"Estimate has dimension {zhat.dim} but the truth has {truth.dim}"
                )
            else:
                logger.warning("Skipping recovery error: dimension %d vs %d", zhat.dim, truth.dim)

        if truth is not None and request.regression is not False:
            dz = DistanceMatrix.from_points(truth)
            fit = geodesic_regression(geodesics, dz)
            metrics["regression"] = fit._asdict()
            pairs = sample_pairs(
                geodesics, dz, request.max_pairs, self.config.seed.spawn(STREAM_PAIRS)
            )
            frame = pd.DataFrame(
                {
                    "label_i": [labels[i] for i in pairs.rows],
                    "label_j": [labels[j] for j in pairs.cols],
                    "dz": pairs.dz,
                    "dhat": pairs.dhat,
                }
            )
            self._record(write_frame(frame, self.output_dir / "pairs.csv"))

        if request.monotonicity is not None:
            ref = request.monotonicity
            covariate = self._covariate(ref.path, ref.column, labels)
            metrics["spearman"] = monotonicity_diagnostic(zhat, covariate)

        if request.emd is not None:
            emd = request.emd
            group_a = label_positions(labels, load_index_group(emd.group_a), "group_a")
            group_b = label_positions(labels, load_index_group(emd.group_b), "group_b")
            result = earth_mover_distance(
                geodesics,
                group_a,
                group_b,
                emd.sample,
                self.config.seed.spawn(STREAM_EMD),
                reps=emd.reps,
            )
            metrics["emd"] = {
                "mean": result.mean,
                "stderr": result.stderr,
                "sample": emd.sample,
                "reps": emd.reps,
            }

        self._record(write_json(metrics, self.output_dir / "metrics.json"))
        print(f"Wrote {len(metrics) - 2} metric(s) to {self.output_dir / 'metrics.json'}")
        return metrics

    def run(self) -> Dict[str, Any]:
        """All stages in order, followed by a ``run.json`` manifest of artifact hashes."""
        if self.config.input.source == "simulation":
            self.simulate()
        self.embed()
        self.run_isomap()
        metrics = self.evaluate()
        manifest = {
            "version": __version__,
            "config": self.config.to_dict(),
            "artifacts": hash_artifacts(self.artifacts, self.output_dir),
        }
        write_json(manifest, self.output_dir / "run.json")
        return metrics
