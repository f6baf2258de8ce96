"""Experiment configuration: YAML/JSON files plus dotted ``key=value`` overrides."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .channel import ChannelParams, Topology, default_topology
from .errors import ConfigError

SYSTEMS = ("vsdl", "vdl", "dnn")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by VSDL and the baselines.

    The defaults are a compact desktop setting; :meth:`published` returns the
    published architecture and learning rate.
    """

    latent_dim: int = 120
    alpha: float = 0.5
    hidden: tuple[int, ...] = (256, 128)
    stage1_epochs: int = 30
    stage2_epochs: int = 30
    baseline_epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    kl_weight: float = 1e-5
    stage2_latent: str = "mean"
    predict_latent: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.batch_size < 1 or min(self.stage1_epochs, self.stage2_epochs, self.baseline_epochs) < 0:
            raise ConfigError("batch_size must be >= 1 and epoch counts >= 0")
        if self.kl_weight < 0 or self.learning_rate <= 0:
            raise ConfigError("kl_weight must be >= 0 and learning_rate > 0")
        for mode in (self.stage2_latent, self.predict_latent):
            if mode not in ("sampled", "mean"):
                raise ConfigError(f"latent mode {mode!r} must be 'sampled' or 'mean'")

    @classmethod
    def published(cls, **overrides) -> "TrainConfig":
        return cls(**{"hidden": (1000, 500), "learning_rate": 1e-5, **overrides})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    topology: Topology = field(default_factory=default_topology)
    channel: ChannelParams = field(default_factory=ChannelParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    packets_per_point: int = 100
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    systems: tuple[str, ...] = SYSTEMS

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "systems", tuple(str(s).lower() for s in self.systems))
        bad = set(self.systems) - set(SYSTEMS)
        if bad:
            raise ConfigError(f"unknown systems {sorted(bad)}; choose from {SYSTEMS}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.packets_per_point < 1:
            raise ConfigError("packets_per_point must be >= 1")

    def to_dict(self) -> dict:
        return {
            "topology": self.topology.to_dict(),
            "channel": self.channel.to_dict(),
            "train": self.train.to_dict(),
            "packets_per_point": self.packets_per_point,
            "seeds": list(self.seeds),
            "systems": list(self.systems),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {"topology", "channel", "train", "packets_per_point", "seeds", "systems"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        topo = d.get("topology", "default")
        topology = default_topology() if topo in (None, "default") else Topology.from_dict(topo)
        return cls(
            topology=topology,
            channel=ChannelParams.from_dict(d.get("channel") or {}),
            train=TrainConfig.from_dict(d.get("train") or {}),
            packets_per_point=int(d.get("packets_per_point", 100)),
            seeds=tuple(d.get("seeds", (0, 1, 2, 3, 4))),
            systems=tuple(d.get("systems", SYSTEMS)),
        )

    def digest(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: Mapping) -> str:
    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def apply_overrides(d: dict, overrides: Sequence[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as YAML scalars or lists."""
    d = copy.deepcopy(d)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value: Any = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
        node = d
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if node.get(part) in (None, "default"):
                node[part] = {}
            node = node[part]
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = value
    return d


def load_config(path: str | Path | None = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
    if overrides:
        if raw.get("topology") in (None, "default") and any(o.startswith("topology.") for o in overrides):
            raw["topology"] = default_topology().to_dict()
        raw = apply_overrides(raw, overrides)
    return ExperimentConfig.from_dict(raw)
