# -*- coding: utf-8 -*-
"""Run and sweep configuration documents.

A config file is one JSON document mirroring RunConfig (or SweepSpec, with the
run under "base"). Precedence is model defaults, then the file, then CLI flags.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.benchmarks import BENCHMARKS
from src.errors import ConfigError
from src.fusion_layer import HardwareConfig
from src.mapper import MapperConfig
from src.renormalization import RenormConfig

DEFAULT_RUN_TRIALS = 5
DEFAULT_SWEEP_TRIALS = 20

SweepKind = Literal["run", "renorm", "ratio", "baseline"]

# parameter -> (section, field); rsl_size sets both RSL sides
SWEEP_PARAMETERS: Dict[str, Tuple[str, Union[str, Tuple[str, ...]]]] = {
    "p_fusion": ("hardware", "p_fusion"),
    "p_loss": ("hardware", "p_loss"),
    "resource_state_size": ("hardware", "resource_state_size"),
    "retry_batches": ("hardware", "retry_batches"),
    "rsl_size": ("hardware", ("rsl_width", "rsl_height")),
    "node_size": ("renorm", "node_size"),
    "module_count": ("renorm", "module_count"),
    "mi_ratio": ("renorm", "mi_ratio"),
    "refresh_interval": ("mapper", "refresh_interval_layers"),
    "qubits": ("benchmark", "qubits"),
}

SWEEPABLE: Dict[str, List[str]] = {
    "run": [
        "p_fusion",
        "p_loss",
        "rsl_size",
        "node_size",
        "resource_state_size",
        "refresh_interval",
        "qubits",
    ],
    "renorm": [
        "node_size",
        "mi_ratio",
        "module_count",
        "p_fusion",
        "resource_state_size",
        "rsl_size",
        "retry_batches",
    ],
    "ratio": ["p_fusion", "rsl_size", "node_size", "resource_state_size"],
    "baseline": ["p_fusion", "qubits", "resource_state_size"],
}


class BenchmarkSpec(BaseModel):
    """A generated benchmark (name, qubits, seed) or a circuit file"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Optional[str] = "qaoa"
    qubits: int = Field(4, ge=2)
    seed: int = 0
    circuit_file: Optional[Path] = None
    max_cz: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _known_source(self) -> "BenchmarkSpec":
        if self.circuit_file is None and self.name not in BENCHMARKS:
            raise ValueError(
                f"unsupported benchmark {self.name!r}, choose from {sorted(BENCHMARKS)}"
            )
        return self

    @property
    def label(self) -> str:
        if self.circuit_file is not None:
            return self.circuit_file.stem
        return f"{self.name}-{self.qubits}"


class RunConfig(BaseModel):
    """Everything one compile/run/baseline invocation needs"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    benchmark: BenchmarkSpec = Field(default_factory=BenchmarkSpec)
    hardware: HardwareConfig = Field(default_factory=HardwareConfig)
    renorm: RenormConfig = Field(default_factory=RenormConfig)
    mapper: MapperConfig = Field(default_factory=MapperConfig)
    trials: int = Field(DEFAULT_RUN_TRIALS, ge=1)
    workers: int = Field(1, ge=1)
    out_dir: Path = Path("results")


class SweepSpec(BaseModel):
    """One swept parameter over a fixed base run"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: SweepKind = "renorm"
    parameter: str = "node_size"
    values: List[Union[int, float]] = Field(min_length=1)
    base: RunConfig = Field(default_factory=RunConfig)
    trials: int = Field(DEFAULT_SWEEP_TRIALS, ge=1)
    ratio_layers: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _valid_points(self) -> "SweepSpec":
        allowed = SWEEPABLE[self.kind]
        if self.parameter not in allowed:
            raise ValueError(
                f"{self.kind} sweeps cannot vary {self.parameter!r}, "
                f"choose from {allowed}"
            )
        for value in self.values:
            self.point(value)
        return self

    def point(self, value: Union[int, float]) -> RunConfig:
        """Base run with the swept parameter set to value"""
        section, fields = SWEEP_PARAMETERS[self.parameter]
        names = fields if isinstance(fields, tuple) else (fields,)
        updates = {name: value for name in names}
        return override(self.base, {section: updates})


ModelT = TypeVar("ModelT", bound=BaseModel)


def _merge(document: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(document)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def override(model: ModelT, updates: Dict[str, Any]) -> ModelT:
    """Re-validated copy of model with nested updates applied"""
    document = _merge(model.model_dump(mode="json"), updates)
    return type(model).model_validate(document)


def load_document(
    path: Optional[Path], model: Type[ModelT], updates: Optional[Dict[str, Any]] = None
) -> ModelT:
    """Parse a JSON config file (or defaults) and apply flag overrides.

    Raises:
        ConfigError: If the file is unreadable or any value is invalid
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Cannot read config {path}: {e}")
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    try:
        return model.model_validate(_merge(document, updates or {}))
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        raise ConfigError(str(e)) from e


def flag_overrides(
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    out_dir: Optional[str] = None,
    cap: Optional[int] = None,
    workers: Optional[int] = None,
) -> Dict[str, Any]:
    """RunConfig updates for the CLI flags that were given"""
    updates: Dict[str, Any] = {}
    hardware: Dict[str, Any] = {}
    if seed is not None:
        hardware["seed"] = seed
    if cap is not None:
        hardware["rsl_cap"] = cap
    if hardware:
        updates["hardware"] = hardware
    if trials is not None:
        updates["trials"] = trials
    if out_dir is not None:
        updates["out_dir"] = out_dir
    if workers is not None:
        updates["workers"] = workers
    return updates
