"""Experiment configuration: schema-checked sections mapped onto dataclasses.

Config files are YAML (JSON works too). Every section is validated against
its dataclass fields; unknown keys are rejected with the offending names so
typos fail fast instead of silently using defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

import yaml

from .env import EnvConfig, ObservationConfig, RewardConfig
from .factory import LayoutConfig
from .radio import RadioConfig


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown keys, bad values)."""


@dataclass
class AgentConfig:
    hidden: tuple = (64, 64)
    learning_rate: float = 3e-4
    discount: float = 0.99
    batch_size: int = 64
    replay_capacity: int = 100_000
    polyak_tau: float = 0.005
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    warmup_transitions: int = 1000
    rollout_steps: int = 256
    clip_eta: float = 0.2
    ppo_epochs: int = 4
    ppo_minibatch: int = 64
    gae_lambda: float = 0.95
    optimizer: str = "adam"
    reward_scale: float = 1.0


@dataclass
class TrainSection:
    mode: str = "f-maddqn"
    episodes: int = 2000
    tau_agg: int = 512
    seeds: tuple = (0,)
    output_dir: str = "out"


@dataclass
class EvalSection:
    episodes: int = 50
    seeds: tuple = (0, 1, 2, 3, 4)
    cgc_every_step: bool = False


_SECTIONS = {
    "radio": RadioConfig,
    "layout": LayoutConfig,
    "env": EnvConfig,
    "observation": ObservationConfig,
    "reward": RewardConfig,
    "agent": AgentConfig,
    "train": TrainSection,
    "eval": EvalSection,
}


def _build_section(cls, mapping, section):
    if mapping is None:
        mapping = {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    allowed = {f.name: f for f in fields(cls)}
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in section {section!r}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in mapping.items():
        default = allowed[key].default
        if isinstance(value, list) and (
            isinstance(default, tuple) or allowed[key].default_factory is not dataclasses.MISSING
        ):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {section!r}: {exc}") from exc


@dataclass
class ExperimentConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if data is None:
            data = {}
        unknown = sorted(set(data) - set(_SECTIONS))
        if unknown:
            raise ConfigError(f"unknown config sections: {', '.join(unknown)}")
        return cls(
            **{
                name: _build_section(section_cls, data.get(name), name)
                for name, section_cls in _SECTIONS.items()
            }
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        def plain(obj):
            if dataclasses.is_dataclass(obj):
                return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
            if isinstance(obj, (list, tuple)):
                return [plain(v) for v in obj]
            return obj

        return plain(self)

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Rebuild with dotted-key overrides, e.g. train__tau_agg=128."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.partition("__")
            if not name:
                raise ConfigError(f"override {key!r} must look like section__field")
            data.setdefault(section, {})[name] = value
        return ExperimentConfig.from_dict(data)
