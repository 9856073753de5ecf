"""
Deterministic SVG 1.1 scatter plots of 2-D embeddings.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .core import PointCloud
from .errors import DimensionError
from .utils import PathLike, write_text

logger = logging.getLogger(__name__)

WIDTH = 480
HEIGHT = 480
MARGIN = 40
RADIUS = 2.5
DEFAULT_FILL = "#1f77b4"

# Endpoints of the covariate color ramp (low -> high).
_LOW = (49, 54, 149)
_HIGH = (215, 48, 39)


def _fmt(value: float) -> str:
    # Fixed precision keeps the output byte-identical across platforms.
    return f"{value:.3f}"


def _ramp(values: np.ndarray) -> List[str]:
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    colors = []
    for v in values:
        t = 0.0 if span == 0.0 else (float(v) - lo) / span
        rgb = [round(a + t * (b - a)) for a, b in zip(_LOW, _HIGH)]
        colors.append("#{:02x}{:02x}{:02x}".format(*rgb))
    return colors


def _scale(values: np.ndarray, start: float, stop: float) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape, (start + stop) / 2.0)
    return start + (values - lo) * (stop - start) / (hi - lo)


def render_scatter(
    cloud: PointCloud,
    color: Optional[ArrayLike] = None,
    title: Optional[str] = None,
) -> str:
    """SVG document with one circle per point and a pair of axes.

    One-dimensional clouds are drawn along the horizontal axis.
    """
    if cloud.dim not in (1, 2):
        raise DimensionError(f"Scatter plots need a 1-D or 2-D cloud, got dim={cloud.dim}")
    coords = cloud.coords
    xs = _scale(coords[:, 0], MARGIN, WIDTH - MARGIN)
    if cloud.dim == 2:
        ys = _scale(coords[:, 1], HEIGHT - MARGIN, MARGIN)
    else:
        ys = np.full(cloud.n, HEIGHT / 2.0)

    fills: Sequence[str]
    if color is None:
        fills = [DEFAULT_FILL] * cloud.n
    else:
        values = np.asarray(color, dtype=np.float64).reshape(-1)
        if values.size != cloud.n:
            raise DimensionError(f"{values.size} color values for {cloud.n} points")
        fills = _ramp(values) if cloud.n else []

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="#000000" stroke-width="1"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" '
        f'stroke="#000000" stroke-width="1"/>',
    ]
    if title:
        escaped = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        lines.append(
            f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{escaped}</text>'
        )
    lines.append('<g stroke="none">')
    for x, y, fill in zip(xs, ys, fills):
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{RADIUS}" fill="{fill}"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_scatter(
    cloud: PointCloud,
    path: PathLike,
    color: Optional[ArrayLike] = None,
    title: Optional[str] = None,
) -> Path:
    target = write_text(render_scatter(cloud, color, title), path)
    logger.info("Wrote scatter plot of %d points to %s", cloud.n, target)
    return target
