"""
Built-in kernel catalog and the JSON kernel loader.
"""

import inspect
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union, cast

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln

from .base_kernel import Box, KernelModel
from .errors import ConfigError, GeoliftError
from .kernel_variants import (
    AdditiveComponent,
    AdditiveKernel,
    FiniteRankKernel,
    InnerProductKernel,
    RadialKernel,
    TranslationInvariantKernel,
)

logger = logging.getLogger(__name__)

# Margin that keeps the cosine grid away from the wrap-around at +/- pi.
COSINE_GRID_MARGIN = 0.25


def _tensor_product(blocks: Sequence[NDArray[np.float64]]) -> NDArray[np.float64]:
    """Row-wise Kronecker product of per-row feature blocks."""
    result = blocks[0]
    for block in blocks[1:]:
        result = (result[:, :, None] * block[:, None, :]).reshape(result.shape[0], -1)
    return result


def cosine_grid(rho: float = 1.0, margin: float = COSINE_GRID_MARGIN) -> KernelModel:
    """f(x, y) = rho (cos(x1 - y1) + cos(x2 - y2) + 2) / 4 on [-pi + m, pi - m]^2."""
    if not 0 < margin < np.pi:
        raise ConfigError(f"cosine-grid margin must lie in (0, pi), got {margin}")

    def g(u: NDArray[np.float64]) -> NDArray[np.float64]:
        return (np.cos(u[:, 0]) + np.cos(u[:, 1]) + 2.0) / 4.0

    def phi(z: NDArray[np.float64]) -> NDArray[np.float64]:
        ones = np.full(z.shape[0], np.sqrt(2.0))
        stacked = [np.cos(z[:, 0]), np.sin(z[:, 0]), np.cos(z[:, 1]), np.sin(z[:, 1]), ones]
        return 0.5 * np.column_stack(stacked)

    domain = Box.cube(-np.pi + margin, np.pi - margin, 2)
    return TranslationInvariantKernel(
        g, domain, neg_hessian=0.25 * np.eye(2), rho=rho, feature_map=phi, name="cosine-grid"
    )


def radial_exponential(
    rho: float = 1.0, dim: int = 2, lower: float = 0.0, upper: float = 1.0
) -> KernelModel:
    """f(x, y) = rho exp(-||x - y||^2) on a cube."""
    return RadialKernel(
        lambda s: np.exp(-s),
        -1.0,
        Box.cube(lower, upper, int(dim)),
        rho=rho,
        name="radial-exponential",
    )


def radial_exponential_taylor(
    rho: float = 1.0, dim: int = 2, degree: int = 20, lower: float = 0.0, upper: float = 1.0
) -> KernelModel:
    """Finite-rank truncation of exp(-||x - y||^2) via its Taylor expansion.

    Per coordinate, exp(-(x - y)^2) = sum_k phi_k(x) phi_k(y) with
    phi_k(x) = exp(-x^2) (2^k / k!)^(1/2) x^k; coordinates combine by tensor product.
    """
    if int(degree) < 1:
        raise ConfigError(f"Taylor degree must be at least 1, got {degree}")
    orders = np.arange(int(degree) + 1)
    coefficients = np.exp(0.5 * (orders * np.log(2.0) - gammaln(orders + 1)))

    def phi(z: NDArray[np.float64]) -> NDArray[np.float64]:
        blocks = [
            np.exp(-z[:, [i]] ** 2) * coefficients * z[:, [i]] ** orders for i in range(z.shape[1])
        ]
        return _tensor_product(blocks)

    return FiniteRankKernel(
        phi, Box.cube(lower, upper, int(dim)), rho=rho, name="radial-exponential-taylor"
    )


def linear_inner_product(rho: float = 1.0, dim: int = 3) -> KernelModel:
    """f(x, y) = rho <x, y> on the unit sphere."""
    return InnerProductKernel(
        lambda t: t,
        1.0,
        0.0,
        int(dim),
        rho=rho,
        feature_map=lambda z: z,
        name="linear-inner-product",
    )


def polynomial_inner_product(rho: float = 1.0, dim: int = 3, degree: int = 2) -> KernelModel:
    """f(x, y) = rho ((1 + <x, y>) / 2)^degree on the unit sphere."""
    q = int(degree)
    if q < 1:
        raise ConfigError(f"Polynomial degree must be at least 1, got {degree}")

    def phi(z: NDArray[np.float64]) -> NDArray[np.float64]:
        lifted = np.hstack([np.ones((z.shape[0], 1)), z]) / np.sqrt(2.0)
        return _tensor_product([lifted] * q)

    return InnerProductKernel(
        lambda t: ((1.0 + t) / 2.0) ** q,
        q / 2.0,
        q * (q - 1) / 4.0,
        int(dim),
        rho=rho,
        feature_map=phi,
        name="polynomial-inner-product",
    )


def _cosine_component() -> AdditiveComponent:
    return AdditiveComponent(
        f=lambda x, y: np.cos(x - y),
        mixed_partial=lambda xi: np.ones_like(xi, dtype=np.float64),
        feature_map=lambda x: np.column_stack([np.cos(x), np.sin(x)]),
    )


def additive_cosine(
    rho: float = 1.0,
    weights: Sequence[float] = (0.5, 0.5),
    lower: float = 0.0,
    upper: float = 1.0,
) -> KernelModel:
    """f(x, y) = rho sum_i alpha_i cos(x_i - y_i) on a cube."""
    alphas = [float(w) for w in weights]
    domain = Box.cube(lower, upper, len(alphas))
    components = [_cosine_component() for _ in alphas]
    return AdditiveKernel(components, alphas, domain, rho=rho, name="additive-cosine")


def warped_cosine_1d(
    rho: float = 1.0, weight: float = 1.0, lower: float = 0.5, upper: float = 1.4
) -> KernelModel:
    """f(x, y) = rho alpha (1 + cos(x^3 - y^3)) / 2 on an interval."""

    def phi(x: NDArray[np.float64]) -> NDArray[np.float64]:
        warped = x**3
        return np.column_stack([np.ones_like(x), np.cos(warped), np.sin(warped)]) / np.sqrt(2.0)

    # d^2/dx dy of (1 + cos(w(x) - w(y))) / 2 at (xi, xi) is w'(xi)^2 / 2 with w(x) = x^3.
    component = AdditiveComponent(
        f=lambda x, y: 0.5 * (1.0 + np.cos(x**3 - y**3)),
        mixed_partial=lambda xi: 4.5 * np.asarray(xi, dtype=np.float64) ** 4,
        feature_map=phi,
    )
    return AdditiveKernel(
        [component], [float(weight)], Box((lower,), (upper,)), rho=rho, name="warped-cosine-1d"
    )


CATALOG: Dict[str, Callable[..., KernelModel]] = {
    "cosine-grid": cosine_grid,
    "radial-exponential": radial_exponential,
    "radial-exponential-taylor": radial_exponential_taylor,
    "linear-inner-product": linear_inner_product,
    "polynomial-inner-product": polynomial_inner_product,
    "additive-cosine": additive_cosine,
    "warped-cosine-1d": warped_cosine_1d,
}


def catalog_names() -> List[str]:
    return sorted(CATALOG)


def build_kernel(
    name: str, rho: float = 1.0, params: Optional[Dict[str, Any]] = None
) -> KernelModel:
    """Instantiate a catalog kernel, rejecting unknown names and parameters."""
    if name not in CATALOG:
        available = ", ".join(catalog_names())
        raise ConfigError(f"Unknown kernel {name!r}; available kernels: {available}")
    builder = CATALOG[name]
    params = dict(params or {})
    accepted = set(inspect.signature(builder).parameters) - {"rho"}
    unknown = sorted(set(params) - accepted)
    if unknown:
        raise ConfigError(
            f"Unknown parameter(s) {unknown} for kernel {name!r}; accepted: {sorted(accepted)}"
        )
    if isinstance(rho, bool) or not isinstance(rho, (int, float)):
        raise ConfigError(f"Kernel rho must be a number, got {rho!r}")
    try:
        kernel = builder(rho=float(rho), **params)
    except GeoliftError as e:
        raise ConfigError(f"Invalid kernel {name!r}: {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid parameters for kernel {name!r}: {e}") from e
    logger.info("Built kernel %s (rho=%g, params=%s)", name, kernel.rho, params)
    return kernel


class KernelLoader:
    """Loads a kernel description ``{"name", "rho", "params"}`` from JSON."""

    ALLOWED_KEYS = {"name", "rho", "params"}

    def __init__(self, source: Union[str, Path, Dict[str, Any]]) -> None:
        """Initialize with a JSON file path or an already parsed mapping."""
        self.source = source
        self.spec_data = self._load(source)
        self.kernel = self._build()

    def _load(self, source: Union[str, Path, Dict[str, Any]]) -> Dict[str, Any]:
        if isinstance(source, dict):
            return source
        try:
            with open(source, "r", encoding="utf-8") as f:
                return cast(Dict[str, Any], json.load(f))
        except Exception as e:
            raise ConfigError(f"Failed to load kernel file {source}: {e}") from e

    def _build(self) -> KernelModel:
        data = self.spec_data
        if not isinstance(data, dict):
            raise ConfigError("Kernel description must be a JSON object")
        unknown = sorted(set(data) - self.ALLOWED_KEYS)
        if unknown:
            raise ConfigError(f"Unknown kernel key(s): {unknown}")
        if "name" not in data:
            raise ConfigError("Kernel description needs a 'name'")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("Kernel 'params' must be a JSON object")
        return build_kernel(data["name"], data.get("rho", 1.0), params)
