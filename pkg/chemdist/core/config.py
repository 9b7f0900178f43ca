"""
Config - model and experiment configuration, validated with pydantic

Experiment configs are YAML documents with a nested `model:` block. Environment knobs
(loaded from .env by the entry points) cap the worker pool and pick default directories.
"""
import math
import os
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from chemdist.core.errors import ConfigError, ParameterError
from chemdist.core.kernels import ConnectionKernel, parse_delta
from chemdist.core.models import EllipseParams, InterferenceParams

ModelName = Literal["wdrcm", "lrp", "boolean", "soft-boolean", "interference", "ellipses", "gilbert"]
ExperimentKind = Literal[
    "longedge-scaling",
    "psi-curve",
    "distance-profile",
    "D-event-decay",
    "mixing-decay",
    "bracket-oracle",
    "degree-check",
]

# Kinds that estimate probabilities and need at least 100 replicates
PROBABILITY_KINDS = {"longedge-scaling", "psi-curve", "D-event-decay", "mixing-decay"}
# Kinds without a scale grid
GRIDLESS_KINDS = {"psi-curve", "degree-check"}


def worker_count() -> int:
    """Worker pool size from CHEMDIST_THREADS (defaults to the CPU count)."""
    raw = os.getenv("CHEMDIST_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"must be a positive integer, got {raw!r}", key="CHEMDIST_THREADS")
    return os.cpu_count() or 1


def output_dir() -> str:
    return os.getenv("CHEMDIST_OUTPUT_DIR", "outputs")


def config_dir() -> str:
    return os.getenv("CHEMDIST_CONFIG_DIR", "config")


def log_level() -> str:
    return os.getenv("CHEMDIST_LOG_LEVEL", "INFO").upper()


class ModelSpec(BaseModel):
    """Which model plus its parameters."""

    model_config = ConfigDict(extra="forbid")

    model: ModelName = "wdrcm"
    dim: int = Field(2, ge=1)
    intensity: float = Field(1.0, gt=0)
    retention: float = Field(1.0, gt=0, le=1)
    gamma: float = 0.0
    gamma_prime: float = 0.0
    delta: float = math.inf
    amplitude: float = Field(1.0, ge=0)
    beta: Optional[float] = None
    window: float = Field(100.0, gt=0)
    pad: Union[float, Literal["auto"]] = "auto"
    seed: int = 0
    method: Literal["auto", "exact", "thinned"] = "auto"

    @field_validator("delta", mode="before")
    @classmethod
    def _parse_delta(cls, value):
        try:
            return parse_delta(value)
        except ParameterError as exc:
            raise ValueError(str(exc))

    @field_validator("pad", mode="before")
    @classmethod
    def _parse_pad(cls, value):
        if isinstance(value, str) and value.strip().lower() == "auto":
            return "auto"
        value = float(value)
        if value < 0:
            raise ValueError("pad must be nonnegative or 'auto'")
        return value

    @model_validator(mode="after")
    def _check_model(self):
        name = self.model
        finite_delta = math.isfinite(self.delta)
        if name == "gilbert" and (self.gamma or self.gamma_prime or finite_delta):
            raise ValueError("gilbert requires gamma = gamma_prime = 0 and delta = inf")
        if name == "boolean" and not (self.gamma > 0 and self.gamma_prime == 0 and not finite_delta):
            raise ValueError("boolean requires gamma > 0, gamma_prime = 0 and delta = inf")
        if name == "soft-boolean" and not (self.gamma > 0 and self.gamma_prime == 0 and finite_delta):
            raise ValueError("soft-boolean requires gamma > 0, gamma_prime = 0 and finite delta")
        if name == "lrp" and (self.gamma or self.gamma_prime or not finite_delta):
            raise ValueError("lrp requires gamma = gamma_prime = 0 and finite delta")
        if name == "interference":
            if self.beta is None or not (0.0 < self.beta < 1.0):
                raise ValueError("interference requires beta in (0, 1)")
            if self.gamma_prime != 0:
                raise ValueError("interference requires gamma_prime = 0")
        if name == "ellipses":
            if self.dim != 2:
                raise ValueError("ellipses are planar: dim must be 2")
            try:
                self.ellipse_params()
            except ParameterError as exc:
                raise ValueError(str(exc))
        else:
            try:
                self.kernel()
            except ParameterError as exc:
                raise ValueError(str(exc))
        return self

    @property
    def is_lattice(self) -> bool:
        return self.model == "lrp"

    @property
    def density(self) -> float:
        """Expected vertices per unit volume."""
        return self.retention if self.is_lattice else self.intensity

    @property
    def pair_independent(self) -> bool:
        """Edges independent given the cloud and local events in disjoint boxes independent."""
        return self.model not in ("interference", "ellipses")

    def kernel(self) -> ConnectionKernel:
        return ConnectionKernel(self.gamma, self.gamma_prime, self.delta, self.amplitude)

    def interference_params(self) -> InterferenceParams:
        return InterferenceParams(beta=self.beta, base_kernel=self.kernel())

    def ellipse_params(self) -> EllipseParams:
        return EllipseParams(gamma=self.gamma)

    def label(self) -> str:
        parts = [self.model, f"d={self.dim}"]
        if self.model != "ellipses":
            parts += [f"gamma={self.gamma:g}", f"gamma'={self.gamma_prime:g}", f"delta={self.delta:g}"]
        else:
            parts.append(f"gamma={self.gamma:g}")
        if self.beta is not None:
            parts.append(f"beta={self.beta:g}")
        return " ".join(parts)


class ExperimentConfig(BaseModel):
    """One experiment: kind, model, grids and replicate budget."""

    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    name: Optional[str] = None
    model: ModelSpec = Field(default_factory=ModelSpec)
    scales: List[float] = Field(default_factory=list, validate_default=True)
    replicates: int = Field(100, ge=1)
    seed: int = 0
    output: Optional[str] = None
    # longedge-scaling: n = n_factor * m
    n_factor: float = Field(1.0, gt=0)
    # psi-curve
    K: int = 200
    stages: List[int] = Field(default_factory=lambda: [0, 1])
    # distance-profile
    samples: int = Field(200, ge=1)
    # D-event-decay: L = L_factor * m, eta defaults to 0.05/sqrt(d)
    L_factor: float = Field(0.25, gt=0, lt=1)
    eta: Optional[float] = Field(None, gt=0)
    window_factor: float = Field(4.0, ge=4.0)
    # mixing-decay
    event: str = "stage0-bad"
    event_params: Dict[str, Any] = Field(default_factory=dict)
    displacements: List[float] = Field(default_factory=lambda: [4.0])

    @field_validator("model")
    @classmethod
    def _check_model(cls, value: ModelSpec, info: ValidationInfo):
        if info.data.get("kind") == "degree-check" and (not value.pair_independent or value.is_lattice):
            raise ValueError("degree-check applies to the Poisson kernel models only")
        return value

    @field_validator("scales")
    @classmethod
    def _check_scales(cls, value: List[float], info: ValidationInfo):
        if info.data.get("kind") in GRIDLESS_KINDS:
            return value
        if not value:
            raise ValueError("scales must be a nonempty grid")
        if any(s <= 0 for s in value):
            raise ValueError("scales must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("scales must be strictly increasing")
        return value

    @field_validator("replicates")
    @classmethod
    def _check_replicates(cls, value: int, info: ValidationInfo):
        kind = info.data.get("kind")
        if kind in PROBABILITY_KINDS and value < 100:
            raise ValueError("probability estimates need replicates >= 100")
        if kind == "degree-check" and value < 2:
            raise ValueError("degree-check needs replicates >= 2")
        return value

    @field_validator("K")
    @classmethod
    def _check_K(cls, value: int):
        if value <= 0 or value % 2:
            raise ValueError("K must be a positive even integer")
        return value

    @field_validator("stages")
    @classmethod
    def _check_stages(cls, value: List[int]):
        if not value or value[0] < 0 or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("stages must be a nonempty increasing list of nonnegative integers")
        return value

    @field_validator("displacements")
    @classmethod
    def _check_displacements(cls, value: List[float]):
        if not value or any(x <= 2 for x in value):
            raise ValueError("displacements must be nonempty and exceed 2")
        return value

    @property
    def resolved_name(self) -> str:
        return self.name or self.kind

    def output_path(self) -> str:
        return self.output or os.path.join(output_dir(), self.resolved_name)

    def resolved_eta(self) -> float:
        return self.eta if self.eta is not None else 0.05 / math.sqrt(self.model.dim)


def _error_key(exc: ValidationError) -> str:
    first = exc.errors()[0]
    return ".".join(str(part) for part in first.get("loc", ())) or "<root>"


def _error_message(exc: ValidationError) -> str:
    first = exc.errors()[0]
    return first.get("msg", str(exc))


def parse_model_spec(data: Dict[str, Any]) -> ModelSpec:
    try:
        return ModelSpec.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_error_message(exc), key="model." + _error_key(exc))


def parse_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a config mapping; errors name the offending key."""
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_error_message(exc), key=_error_key(exc))


def load_experiment_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load one experiment from a YAML file.

    Args:
        path: YAML document path
        overrides: Top-level keys to replace; a nested `model` mapping is merged key by key
    """
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", key="config")
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", key="config")
    return parse_experiment_config(merge_overrides(data, overrides or {}))


def merge_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(data)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "model" and isinstance(value, dict):
            model = dict(merged.get("model") or {})
            model.update({k: v for k, v in value.items() if v is not None})
            merged["model"] = model
        else:
            merged[key] = value
    return merged
