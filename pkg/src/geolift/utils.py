"""
Utility functions for artifact files: number formatting, CSV/JSON writing and hashing.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np
import pandas as pd

# Shortest-round-trip is not guaranteed by %.17g, but 17 significant digits always round-trip.
FLOAT_FORMAT = "%.17g"

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    """Format a float with 17 significant digits (``inf``/``nan`` spelled out)."""
    if np.isnan(value):
        return "nan"
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return FLOAT_FORMAT % value


def coordinate_columns(dim: int) -> List[str]:
    """Column names x1..x{dim} used for point clouds."""
    return [f"x{i + 1}" for i in range(dim)]


def default_labels(n: int) -> List[str]:
    return [str(i) for i in range(n)]


def write_frame(frame: pd.DataFrame, path: PathLike, header: bool = True) -> Path:
    """Write a table as UTF-8 CSV with LF line endings and 17-digit floats."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        target,
        index=False,
        header=header,
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
        encoding="utf-8",
    )
    return target


def read_frame(path: PathLike, **kwargs: Any) -> pd.DataFrame:
    """Read a CSV written by :func:`write_frame` back without precision loss."""
    return pd.read_csv(path, float_precision="round_trip", encoding="utf-8", **kwargs)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        # JSON has no infinities; spell them like the CSV files do.
        return number if np.isfinite(number) else format_float(number)
    return value


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    """Write a JSON document with sorted keys and a trailing newline."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(data), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return target


def write_text(text: str, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return target


def file_sha256(path: PathLike) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_artifacts(paths: Iterable[PathLike], root: PathLike) -> Dict[str, str]:
    """Map each artifact's path relative to ``root`` to its SHA-256 digest."""
    base = Path(root)
    return {
        Path(p).relative_to(base).as_posix(): file_sha256(p)
        for p in sorted(Path(p) for p in paths)
    }
