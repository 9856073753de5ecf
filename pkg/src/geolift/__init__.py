"""
geolift: latent position recovery from similarity matrices

Spectral embedding followed by Isomap, with kernel-geometry oracles that make every step
verifiable against exact ground truth.
"""

# Defined before the submodule imports: the pipeline records it in run.json.
__version__ = "0.1.0"

from .config import ConfigLoader, PipelineConfig  # noqa: E402
from .core import DistanceMatrix, PointCloud, Seed, SimilarityMatrix, symmetric_eigs  # noqa: E402
from .errors import GeoliftError, exit_code_for  # noqa: E402
from .evaluation import procrustes_align, recovery_error  # noqa: E402
from .kernel_catalog import KernelLoader, build_kernel  # noqa: E402
from .manifold import GraphRule, IsomapConfig, cmds, isomap  # noqa: E402
from .pipeline import GeoliftPipeline  # noqa: E402
from .spectral import SpectralConfig, SpectralEmbedder, spectral_embed  # noqa: E402

__all__ = [
    "ConfigLoader",
    "DistanceMatrix",
    "GeoliftError",
    "GeoliftPipeline",
    "GraphRule",
    "IsomapConfig",
    "KernelLoader",
    "PipelineConfig",
    "PointCloud",
    "Seed",
    "SimilarityMatrix",
    "SpectralConfig",
    "SpectralEmbedder",
    "build_kernel",
    "cmds",
    "exit_code_for",
    "isomap",
    "procrustes_align",
    "recovery_error",
    "spectral_embed",
    "symmetric_eigs",
]
