"""One JSON config describes a whole experiment.

Sections: frontend (feature extraction), model (architecture), train
(optimization), augment (masking policy), data (session synthesis and
splits). Any field can be overridden from the command line with
dotted-path assignments like ``model.gru_hidden=64``; values parse as
JSON with a fallback to plain strings.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .audio_io import read_json, write_json
from .frontend import AugmentPolicy, FrontendConfig
from .model import ModelConfig
from .training import TrainConfig


@dataclass(frozen=True)
class DataConfig:
    """Synthetic-corpus shape: session counts, duration, live occupancy."""

    n_train_sessions: int = 20
    n_dev_sessions: int = 8
    n_eval_sessions: int = 6
    session_duration_s: float = 600.0
    live_fraction: float = 0.13
    segment_s: float = 5.0
    live_overlap_threshold: float = 0.5
    live_to_distractor_snr_db: tuple = (0.0, 20.0)
    premix_snr: bool = False

    def __post_init__(self):
        if min(self.n_train_sessions, self.n_dev_sessions, self.n_eval_sessions) < 1:
            raise ValueError("session counts must be >= 1")
        if not 0 < self.live_fraction < 1:
            raise ValueError("live_fraction must be in (0, 1)")
        if self.session_duration_s < self.segment_s:
            raise ValueError("sessions must be at least one segment long")


@dataclass(frozen=True)
class ExperimentConfig:
    sample_rate: int = 11025
    frontend: FrontendConfig = FrontendConfig()
    model: ModelConfig | None = None
    train: TrainConfig = TrainConfig()
    augment: AugmentPolicy = AugmentPolicy()
    data: DataConfig = DataConfig()

    def __post_init__(self):
        if self.model is None:
            object.__setattr__(self, "model",
                               ModelConfig.for_frontend(self.frontend, self.sample_rate))

    def to_dict(self) -> dict:
        return {"sample_rate": self.sample_rate, "frontend": asdict(self.frontend),
                "model": self.model.to_dict(), "train": asdict(self.train),
                "augment": asdict(self.augment), "data": asdict(self.data)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        sample_rate = d.pop("sample_rate", 11025)
        try:
            frontend = FrontendConfig(**d.pop("frontend", {}))
            train_section = d.pop("train", {})
            if "snr_grid" in train_section:
                train_section["snr_grid"] = tuple(train_section["snr_grid"])
            train = TrainConfig(**train_section)
            augment = AugmentPolicy(**d.pop("augment", {}))
            data_section = d.pop("data", {})
            if "live_to_distractor_snr_db" in data_section:
                data_section["live_to_distractor_snr_db"] = tuple(
                    data_section["live_to_distractor_snr_db"])
            data = DataConfig(**data_section)
            model = ModelConfig.for_frontend(frontend, sample_rate, **d.pop("model", {}))
        except TypeError as exc:
            raise ValueError(f"bad config field: {exc}") from exc
        if d:
            raise ValueError(f"unknown config sections: {sorted(d)}")
        return cls(sample_rate=sample_rate, frontend=frontend, model=model,
                   train=train, augment=augment, data=data)


def apply_overrides(tree: dict, overrides) -> dict:
    """In-place dotted-path assignments on a nested config dict."""
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} must look like section.field=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = tree
        parts = path.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"override path {path!r} crosses a scalar field")
        node[parts[-1]] = value
    return tree


def load_config(path, overrides=()) -> ExperimentConfig:
    tree = read_json(path)
    if not isinstance(tree, dict):
        raise ValueError(f"{path}: config root must be a JSON object")
    apply_overrides(tree, overrides)
    return ExperimentConfig.from_dict(tree)


def write_config(path, config: ExperimentConfig):
    write_json(path, config.to_dict())
