"""Experiment configuration with a canonical JSON representation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..degrade import DegradationConfig
from ..losses import LossConfig
from ..network import DenoiserSpec, LiemConfig


@dataclass
class ScheduleConfig:
    t_max: int = 999
    kind: str = "cosine"


@dataclass
class DataConfig:
    hr_dir: str = "data/hr"
    lr_dir: str | None = None  # if unset, pairs are synthesized from hr_dir
    manifest: str | None = None  # motion ground truth emitted by make-data


@dataclass
class TrainConfig:
    steps: int = 2000
    learning_rate: float = 1e-3
    batch_size: int = 1


@dataclass
class ExperimentConfig:
    seed: int = 0
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    model: DenoiserSpec = field(default_factory=DenoiserSpec)
    degrade: DegradationConfig = field(default_factory=DegradationConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sample_steps: int = 50


def to_json(cfg: ExperimentConfig) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n"


def from_dict(doc: dict) -> ExperimentConfig:
    deg = dict(doc.get("degrade", {}))
    for key in ("blur_sigma", "noise_std", "quality", "order"):
        if key in deg:
            deg[key] = tuple(deg[key])
    model = dict(doc.get("model", {}))
    if "liem" in model:
        model["liem"] = LiemConfig(**model["liem"])
    return ExperimentConfig(
        seed=doc.get("seed", 0),
        schedule=ScheduleConfig(**doc.get("schedule", {})),
        loss=LossConfig(**doc.get("loss", {})),
        model=DenoiserSpec(**model),
        degrade=DegradationConfig(**deg),
        data=DataConfig(**doc.get("data", {})),
        train=TrainConfig(**doc.get("train", {})),
        sample_steps=doc.get("sample_steps", 50),
    )


def from_json(text: str) -> ExperimentConfig:
    return from_dict(json.loads(text))


def load(path) -> ExperimentConfig:
    return from_json(Path(path).read_text())


def save(path, cfg: ExperimentConfig) -> None:
    Path(path).write_text(to_json(cfg))
