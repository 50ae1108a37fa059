"""Run configuration: model + training hyperparameters and data-generation settings."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .model import ModelConfig
from .training import TrainConfig


@dataclass
class DataConfig:
    ratios: tuple[float, float, float, float] = (0.6, 0.15, 0.15, 0.1)   # train, dev, test, donor pool
    incongruent_fraction: float = 0.5
    types: tuple[str, ...] = ("III", "IV")
    cross_category: bool = False
    min_count: int = 8
    embeddings: str | None = None

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        self.types = tuple(str(t) for t in self.types)


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "train": self.train.to_dict(),
                "data": {**asdict(self.data), "ratios": list(self.data.ratios), "types": list(self.data.types)},
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"model", "train", "data", "seed"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(d.get("data", {}))
        bad = set(data) - {f.name for f in fields(DataConfig)}
        if bad:
            raise ValueError(f"unknown data config keys: {sorted(bad)}")
        return cls(ModelConfig.from_dict(dict(d.get("model", {}))),
                   TrainConfig.from_dict(dict(d.get("train", {}))),
                   DataConfig(**data), int(d.get("seed", 0)))

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is not None:
            self.seed = int(seed)
        self.train.seed = self.seed
        return self

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a JSON config file; missing sections and keys fall back to the defaults."""
    if path is None:
        return RunConfig()
    return RunConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
