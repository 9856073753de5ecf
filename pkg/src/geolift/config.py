"""
Pipeline configuration: a single JSON document parsed into frozen dataclasses.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, TypeVar, Union, cast

from .core import MatrixKind, Seed
from .errors import ConfigError, GeoliftError
from .ingestion import DirectedPolicy
from .manifold import GraphRule, IsomapConfig, RuleKind
from .spectral import SpectralConfig

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "geolift-out"
DEFAULT_MAX_PAIRS = 100_000
DEFAULT_EMD_REPS = 100

SOURCES = ("simulation", "edge_list", "dense_matrix", "time_series")
DESIGNS = ("grid", "uniform")


def _check_keys(data: Any, allowed: set, where: str) -> Dict[str, Any]:
    """Reject non-objects and unknown keys, naming the dotted path."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        dotted = ", ".join(f"{where}.{k}" if where else k for k in unknown)
        raise ConfigError(f"Unknown config key(s): {dotted}")
    return cast(Dict[str, Any], data)


def _int(value: Any, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where} must be an integer >= {minimum}, got {value!r}")
    return value


def _flag(value: Any, where: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{where} must be true or false, got {value!r}")
    return value


def _path(value: Any, where: str, base_dir: Optional[Path]) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{where} must be a non-empty path string")
    path = Path(value)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return str(path)


_T = TypeVar("_T")


def _wrap(where: str, build: Callable[[], _T]) -> _T:
    """Run a constructor, re-labelling its validation errors with the config path."""
    try:
        return build()
    except (GeoliftError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


@dataclass(frozen=True)
class SimulationConfig:
    """A catalog kernel sampled at ``n`` latent positions."""

    kernel: Dict[str, Any]
    n: int
    design: str = "grid"
    noiseless: bool = False

    @classmethod
    def from_dict(cls, data: Any, where: str = "input.simulation") -> "SimulationConfig":
        data = _check_keys(data, {"kernel", "n", "design", "noiseless"}, where)
        if "kernel" not in data or "n" not in data:
            raise ConfigError(f"{where} needs 'kernel' and 'n'")
        kernel = _check_keys(data["kernel"], {"name", "rho", "params"}, f"{where}.kernel")
        rho = kernel.get("rho", 1.0)
        if isinstance(rho, dict):
            _check_keys(rho, {"scale", "exponent"}, f"{where}.kernel.rho")
            if set(rho) != {"scale", "exponent"}:
                raise ConfigError(f"{where}.kernel.rho schedule needs 'scale' and 'exponent'")
        design = data.get("design", "grid")
        if design not in DESIGNS:
            raise ConfigError(f"{where}.design must be one of {', '.join(DESIGNS)}")
        return cls(
            kernel=dict(kernel),
            n=_int(data["n"], f"{where}.n", minimum=1),
            design=design,
            noiseless=_flag(data.get("noiseless", False), f"{where}.noiseless"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kernel": dict(self.kernel),
            "n": self.n,
            "design": self.design,
            "noiseless": self.noiseless,
        }


@dataclass(frozen=True)
class InputConfig:
    """Where the similarity matrix comes from: a simulation or one input file."""

    source: str
    simulation: Optional[SimulationConfig] = None
    path: Optional[str] = None
    directed_policy: DirectedPolicy = DirectedPolicy.SYMMETRIZE_ERROR
    kind: Optional[MatrixKind] = None

    @classmethod
    def from_dict(cls, data: Any, base_dir: Optional[Path] = None) -> "InputConfig":
        data = _check_keys(data, set(SOURCES), "input")
        if len(data) != 1:
            raise ConfigError(f"input must name exactly one of {', '.join(SOURCES)}")
        source, body = next(iter(data.items()))
        where = f"input.{source}"
        if source == "simulation":
            return cls(source, simulation=SimulationConfig.from_dict(body, where))

        allowed = {"path"}
        if source == "edge_list":
            allowed.add("directed_policy")
        elif source == "dense_matrix":
            allowed.add("kind")
        body = _check_keys(body, allowed, where)
        if "path" not in body:
            raise ConfigError(f"{where} needs a 'path'")
        policy = _wrap(
            f"{where}.directed_policy",
            lambda: DirectedPolicy(body.get("directed_policy", "symmetrize_error")),
        )
        kind = body.get("kind")
        if kind is not None:
            kind = _wrap(f"{where}.kind", lambda: MatrixKind(kind))
        return cls(
            source,
            path=_path(body["path"], f"{where}.path", base_dir),
            directed_policy=policy,
            kind=kind,
        )

    def to_dict(self) -> Dict[str, Any]:
        if self.simulation is not None:
            return {"simulation": self.simulation.to_dict()}
        body: Dict[str, Any] = {"path": self.path}
        if self.source == "edge_list":
            body["directed_policy"] = self.directed_policy.value
        if self.source == "dense_matrix" and self.kind is not None:
            body["kind"] = self.kind.value
        return {self.source: body}


@dataclass(frozen=True)
class CovariateRef:
    """A named column of a labelled CSV; ``path=None`` means the truth file."""

    column: str
    path: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Any, where: str, base_dir: Optional[Path]) -> "CovariateRef":
        data = _check_keys(data, {"path", "column"}, where)
        column = data.get("column")
        if not isinstance(column, str) or not column:
            raise ConfigError(f"{where}.column must be a non-empty string")
        path = data.get("path")
        return cls(column, None if path is None else _path(path, f"{where}.path", base_dir))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"column": self.column}
        if self.path is not None:
            data["path"] = self.path
        return data


@dataclass(frozen=True)
class IsomapOutput:
    """Optional Isomap artifacts."""

    geodesics: bool = False
    scatter: bool = False
    color_by: Optional[CovariateRef] = None


@dataclass(frozen=True)
class EmdRequest:
    group_a: str
    group_b: str
    sample: int
    reps: int = DEFAULT_EMD_REPS


@dataclass(frozen=True)
class EvaluationConfig:
    """Requested diagnostics.

    ``recovery`` and ``regression`` default to ``None``: run them when a
    truth file is available and skip them otherwise. ``True`` makes a
    missing truth file an error.
    """

    truth: Optional[str] = None
    recovery: Optional[bool] = None
    regression: Optional[bool] = None
    max_pairs: int = DEFAULT_MAX_PAIRS
    monotonicity: Optional[CovariateRef] = None
    emd: Optional[EmdRequest] = None

    @classmethod
    def from_dict(cls, data: Any, base_dir: Optional[Path] = None) -> "EvaluationConfig":
        where = "evaluation"
        allowed = {"truth", "recovery", "regression", "max_pairs", "monotonicity", "emd"}
        data = _check_keys(data, allowed, where)
        truth = data.get("truth")
        emd = None
        if "emd" in data:
            emd_keys = {"group_a", "group_b", "sample", "reps"}
            body = _check_keys(data["emd"], emd_keys, "evaluation.emd")
            missing = {"group_a", "group_b", "sample"} - set(body)
            if missing:
                raise ConfigError(f"evaluation.emd needs {sorted(missing)}")
            emd = EmdRequest(
                group_a=_path(body["group_a"], "evaluation.emd.group_a", base_dir),
                group_b=_path(body["group_b"], "evaluation.emd.group_b", base_dir),
                sample=_int(body["sample"], "evaluation.emd.sample", minimum=1),
                reps=_int(body.get("reps", DEFAULT_EMD_REPS), "evaluation.emd.reps", minimum=1),
            )
        monotonicity = None
        if "monotonicity" in data:
            monotonicity = CovariateRef.from_dict(
                data["monotonicity"], "evaluation.monotonicity", base_dir
            )
        recovery = data.get("recovery")
        regression = data.get("regression")
        return cls(
            truth=None if truth is None else _path(truth, "evaluation.truth", base_dir),
            recovery=None if recovery is None else _flag(recovery, "evaluation.recovery"),
            regression=None if regression is None else _flag(regression, "evaluation.regression"),
            max_pairs=_int(data.get("max_pairs", DEFAULT_MAX_PAIRS), "evaluation.max_pairs", 1),
            monotonicity=monotonicity,
            emd=emd,
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"max_pairs": self.max_pairs}
        if self.truth is not None:
            data["truth"] = self.truth
        if self.recovery is not None:
            data["recovery"] = self.recovery
        if self.regression is not None:
            data["regression"] = self.regression
        if self.monotonicity is not None:
            data["monotonicity"] = self.monotonicity.to_dict()
        if self.emd is not None:
            data["emd"] = {
                "group_a": self.emd.group_a,
                "group_b": self.emd.group_b,
                "sample": self.emd.sample,
                "reps": self.emd.reps,
            }
        return data


def _spectral_from_dict(data: Any) -> SpectralConfig:
    data = _check_keys(data, {"p", "degree_correct", "max_p"}, "spectral")
    return _wrap("spectral", lambda: SpectralConfig(**data))


def _spectral_to_dict(cfg: SpectralConfig) -> Dict[str, Any]:
    return {"p": cfg.p, "degree_correct": cfg.degree_correct, "max_p": cfg.max_p}


def _rule_from_dict(data: Any) -> GraphRule:
    data = _check_keys(data, {"kind", "value"}, "isomap.rule")
    if "kind" not in data:
        raise ConfigError("isomap.rule needs a 'kind'")
    return _wrap("isomap.rule", lambda: GraphRule(data["kind"], data.get("value")))


def _rule_to_dict(rule: GraphRule) -> Dict[str, Any]:
    data: Dict[str, Any] = {"kind": rule.kind.value}
    if rule.kind is not RuleKind.EPSILON_AUTO:
        data["value"] = int(rule.value) if rule.kind is RuleKind.KNN else rule.value
    return data


def _isomap_from_dict(data: Any, base_dir: Optional[Path]) -> Tuple[IsomapConfig, IsomapOutput]:
    allowed = {
        "rule",
        "d",
        "max_d",
        "component_policy",
        "noise_correction",
        "geodesics",
        "scatter",
        "color_by",
    }
    data = _check_keys(data, allowed, "isomap")
    kwargs: Dict[str, Any] = {}
    if "rule" in data:
        kwargs["rule"] = _rule_from_dict(data["rule"])
    for key in ("d", "max_d", "component_policy", "noise_correction"):
        if key in data:
            kwargs[key] = data[key]
    algorithm = _wrap("isomap", lambda: IsomapConfig(**kwargs))
    color_by = None
    if "color_by" in data:
        color_by = CovariateRef.from_dict(data["color_by"], "isomap.color_by", base_dir)
    output = IsomapOutput(
        geodesics=_flag(data.get("geodesics", False), "isomap.geodesics"),
        scatter=_flag(data.get("scatter", False), "isomap.scatter"),
        color_by=color_by,
    )
    return algorithm, output


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one run needs; serializes to and from one JSON document."""

    input: InputConfig
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    isomap: IsomapConfig = field(default_factory=IsomapConfig)
    isomap_output: IsomapOutput = field(default_factory=IsomapOutput)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    seed: Seed = field(default_factory=lambda: Seed(0))
    output_dir: str = DEFAULT_OUTPUT_DIR
    threads: int = 1

    @classmethod
    def from_dict(cls, data: Any, base_dir: Optional[Path] = None) -> "PipelineConfig":
        """Build a config, resolving relative paths against ``base_dir``."""
        allowed = {"input", "spectral", "isomap", "evaluation", "seed", "output_dir", "threads"}
        data = _check_keys(data, allowed, "")
        if "input" not in data:
            raise ConfigError("config needs an 'input' section")
        isomap, isomap_output = _isomap_from_dict(data.get("isomap", {}), base_dir)
        seed = _wrap("seed", lambda: Seed(_int(data.get("seed", 0), "seed")))
        output_dir = data.get("output_dir", DEFAULT_OUTPUT_DIR)
        return cls(
            input=InputConfig.from_dict(data["input"], base_dir),
            spectral=_spectral_from_dict(data.get("spectral", {})),
            isomap=isomap,
            isomap_output=isomap_output,
            evaluation=EvaluationConfig.from_dict(data.get("evaluation", {}), base_dir),
            seed=seed,
            output_dir=_path(output_dir, "output_dir", base_dir),
            threads=_int(data.get("threads", 1), "threads", minimum=1),
        )

    def to_dict(self) -> Dict[str, Any]:
        isomap: Dict[str, Any] = {
            "rule": _rule_to_dict(self.isomap.rule),
            "d": self.isomap.d,
            "max_d": self.isomap.max_d,
            "component_policy": self.isomap.component_policy.value,
            "noise_correction": self.isomap.noise_correction,
            "geodesics": self.isomap_output.geodesics,
            "scatter": self.isomap_output.scatter,
        }
        if self.isomap_output.color_by is not None:
            isomap["color_by"] = self.isomap_output.color_by.to_dict()
        return {
            "input": self.input.to_dict(),
            "spectral": _spectral_to_dict(self.spectral),
            "isomap": isomap,
            "evaluation": self.evaluation.to_dict(),
            "seed": self.seed.value,
            "output_dir": self.output_dir,
            "threads": self.threads,
        }

    def with_overrides(
        self,
        output_dir: Optional[str] = None,
        threads: Optional[int] = None,
        rule: Optional[GraphRule] = None,
    ) -> "PipelineConfig":
        """Copy with command-line overrides applied."""
        data = self.to_dict()
        if output_dir is not None:
            data["output_dir"] = output_dir
        if threads is not None:
            data["threads"] = threads
        if rule is not None:
            data["isomap"]["rule"] = _rule_to_dict(rule)
        return PipelineConfig.from_dict(data)


class ConfigLoader:
    """Loads a pipeline configuration from a UTF-8 JSON file."""

    def __init__(self, config_file: Union[str, Path]) -> None:
        """Initialize with the configuration file path."""
        self.config_file = Path(config_file)
        self.config_data = self._load_config()
        self.config = PipelineConfig.from_dict(
            self.config_data, base_dir=self.config_file.resolve().parent
        )

    def _load_config(self) -> Dict[str, Any]:
        """Load and parse the configuration document."""
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                return cast(Dict[str, Any], json.load(f))
        except Exception as e:
            raise ConfigError(f"Failed to load config file {self.config_file}: {e}") from e

    def get_section(self, name: str) -> Mapping[str, Any]:
        """Return a raw top-level section (empty when absent)."""
        if name not in PipelineConfig.__dataclass_fields__ or name == "isomap_output":
            raise ConfigError(f"Unknown config section {name!r}")
        value = self.config_data.get(name, {})
        return value if isinstance(value, dict) else {name: value}
