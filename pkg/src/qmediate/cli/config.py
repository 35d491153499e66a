"""Experiment configuration: a YAML (or JSON) document validated by pydantic."""

import hashlib
import json
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
import yaml

from ..errors import ConfigError
from ..simulator import MAX_QUBITS, Topology

ENV_OUT_DIR = "QMEDIATE_OUT_DIR"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetConfig(_Strict):
    path: str
    label_column: str
    name: Optional[str] = None
    delimiter: str = ","
    binarize_median: bool = False
    positive_label: Optional[str] = None
    drop_columns: List[str] = Field(default_factory=list)

    @property
    def display_name(self) -> str:
        return self.name or Path(self.path).stem


class TrainingConfig(_Strict):
    epochs: int = Field(50, ge=1)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(0.005, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    init_std: float = Field(0.01, ge=0)
    validation_fraction: float = Field(0.3, gt=0, lt=1)
    use_best_epoch: bool = False


class GateConfig(_Strict):
    eps_rel: float = 0.05
    s_ab: float = 1e-10
    i_minus_2s: float = 1e-9
    l_minus_1_minus_gamma: float = 1e-12


class ExperimentConfig(_Strict):
    dataset: DatasetConfig
    n_qubits: int = Field(4, ge=1, le=MAX_QUBITS)
    topology: List[Topology] = Field(default_factory=lambda: list(Topology))
    layers_t0: int = Field(1, ge=1)
    layers_t1: List[int] = Field(default_factory=lambda: [3, 6])
    seeds: List[int] = Field(default_factory=lambda: [42, 142])
    test_fraction: float = Field(0.3, gt=0, lt=1)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    bipartition: Optional[List[int]] = None
    bootstrap_B: int = Field(2000, ge=1)
    threshold_c: float = Field(0.5, ge=0)
    threshold_mode: Literal["per-config", "global-max"] = "per-config"
    basis: Literal["reduced", "full"] = "reduced"
    gates: GateConfig = Field(default_factory=GateConfig)
    output_dir: Optional[str] = None

    @field_validator("topology", mode="before")
    @classmethod
    def _topology_list(cls, v):
        return [v] if isinstance(v, str) else v

    @field_validator("layers_t1", "seeds", mode="before")
    @classmethod
    def _int_list(cls, v):
        return [v] if isinstance(v, int) else v

    @model_validator(mode="after")
    def _check(self):
        if not self.topology or not self.layers_t1 or not self.seeds:
            raise ValueError("topology, layers_t1 and seeds must be non-empty")
        bad = [d for d in self.layers_t1 if d <= self.layers_t0]
        if bad:
            raise ValueError(f"layers_t1 values {bad} must exceed layers_t0={self.layers_t0}")
        if self.bipartition is not None:
            a = self.bipartition
            if not a or len(set(a)) != len(a) or any(q < 0 or q >= self.n_qubits for q in a):
                raise ValueError(f"bipartition {a} is not a valid subset of {self.n_qubits} qubits")
        return self

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(ENV_OUT_DIR) or "qmediate_runs")

    def digest(self) -> str:
        """SHA-256 of the canonical config (output location excluded)."""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_describe(exc)}") from None
    if base_dir is not None and not Path(cfg.dataset.path).is_absolute():
        cfg.dataset.path = str((base_dir / cfg.dataset.path).resolve())
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a config file; relative dataset paths resolve against the file's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data or {}, path.parent)
