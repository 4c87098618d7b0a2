"""Experiment configuration: schema, defaults, JSON round trip.

One ExperimentConfig drives the whole desk-scale pipeline (simulate,
train, evaluate).  Unknown keys are rejected so a typo in a config file
fails before any compute is spent, and every run directory receives a
copy of the resolved config it was produced with.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

from .errors import ConfigError
from .sim import NoiseModel, MOTION_CLASSES
from .pipeline import TrainConfig
from .wavelets import DenoiseConfig


@dataclass(frozen=True)
class SimulatorSection:
    sample_rate: float = 200.0
    capture_duration: float = 40.0
    scale: float = 2.0
    angular_rate: float = 0.3
    texture: float = 0.3
    texture_knot_s: float = 0.15
    motion_classes: tuple = MOTION_CLASSES
    stride: int = 256
    window_len: int = 512
    n_train: int = 192
    n_test: int = 96
    seed: int = 7
    accel_noise: NoiseModel = field(default_factory=lambda: NoiseModel(
        quantization_step=1e-3,
        white_density=2e-2,
        bias_instability=0.45,
        bias_corr_time=0.02,
        initial_bias=0.20,
    ))
    gyro_noise: NoiseModel = field(default_factory=lambda: NoiseModel(
        quantization_step=2e-4,
        white_density=2e-3,
        bias_instability=0.045,
        bias_corr_time=0.02,
        initial_bias=0.020,
    ))

    def __post_init__(self):
        if self.window_len < 2:
            raise ConfigError("window_len must be at least 2")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("dataset sizes must be positive")


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 0.05
    lambda_disp: float = 1.0
    lambda_sparse: float = 0.01
    lambda_encode: float = 0.1
    epsilon_truncation: float = 0.05
    bank_size: int = 16
    crm_enabled: bool = True
    seed: int = 0
    denoise_levels: int = 6
    boundary_mode: str = "symmetric"
    threshold_rule: str = "universal"

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lambda_disp=self.lambda_disp,
            lambda_sparse=self.lambda_sparse,
            lambda_encode=self.lambda_encode,
            epsilon_truncation=self.epsilon_truncation,
            bank_size=self.bank_size,
            crm_enabled=self.crm_enabled,
            seed=self.seed,
        )

    def denoise_config(self) -> DenoiseConfig:
        return DenoiseConfig(
            levels=self.denoise_levels,
            boundary_mode=self.boundary_mode,
            threshold_rule=self.threshold_rule,
        )


@dataclass(frozen=True)
class EvaluationSection:
    points_per_decade: int = 20
    resample_points: int = 200

    def __post_init__(self):
        if self.points_per_decade < 2:
            raise ConfigError("points_per_decade must be at least 2")
        if self.resample_points < 2:
            raise ConfigError("resample_points must be at least 2")


@dataclass(frozen=True)
class PathsSection:
    dataset: str | None = None
    model: str | None = None
    results: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    simulator: SimulatorSection = field(default_factory=SimulatorSection)
    train: TrainSection = field(default_factory=TrainSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    paths: PathsSection = field(default_factory=PathsSection)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


_SECTION_TYPES = {
    "simulator": SimulatorSection,
    "train": TrainSection,
    "evaluation": EvaluationSection,
    "paths": PathsSection,
}


def _build(cls, data: dict, context: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{context}: expected an object, got {type(data).__name__}")
    allowed = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        spec = allowed[name]
        if name in ("accel_noise", "gyro_noise"):
            kwargs[name] = _build(NoiseModel, value, f"{context}.{name}")
        elif name == "motion_classes":
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{context}.{name}: expected a list")
            kwargs[name] = tuple(str(v) for v in value)
        elif spec.type in ("int", int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{context}.{name}: expected an integer")
            kwargs[name] = value
        elif spec.type in ("float", float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{context}.{name}: expected a number")
            kwargs[name] = float(value)
        elif spec.type in ("bool", bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{context}.{name}: expected a boolean")
            kwargs[name] = value
        else:
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{context}.{name}: expected a string")
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    unknown = sorted(set(data) - set(_SECTION_TYPES))
    if unknown:
        raise ConfigError(f"config root: unknown sections {unknown}")
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        if name in data:
            sections[name] = _build(cls, data[name], name)
    return ExperimentConfig(**sections)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out["simulator"]["motion_classes"] = list(cfg.simulator.motion_classes)
    return out


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")
