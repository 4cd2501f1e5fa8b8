"""Run configuration: JSON with strict key checking and a resolved snapshot."""

from __future__ import annotations

import json
import os
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path

from .agents import DqnConfig, Td3Config
from .hierarchy import HierarchyConfig, RewardConfig, TrainConfig
from .rewards import HighRewardWeights, LowRewardWeights
from .simworld import EnvConfig, World, bundled_world, load_world_file

OUTPUT_ENV_VAR = "HRNAV_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class EvalConfig:
    episodes: int = 100
    seed: int = 12345
    astar_resolution: float = 0.0  # 0 disables the A* column


@dataclass
class RunConfig:
    worlds: list = field(default_factory=lambda: ["empty"])
    episodes: int = 500
    seed: int = 0
    output_dir: str = "runs/default"
    checkpoint_every: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    hierarchy: HierarchyConfig = field(default_factory=HierarchyConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    td3: Td3Config = field(default_factory=Td3Config)
    rewards_high: HighRewardWeights = field(default_factory=HighRewardWeights)
    rewards_low: LowRewardWeights = field(default_factory=LowRewardWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def load_worlds(self) -> list[World]:
        return [resolve_world(w) for w in self.worlds]

    def trainer_kwargs(self) -> dict:
        return {"env_config": self.env, "hierarchy": self.hierarchy, "dqn": self.dqn, "td3": self.td3,
                "rewards": RewardConfig(self.rewards_high, self.rewards_low), "train": self.train}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)
            if f.default_factory is not MISSING and f.name != "worlds"}


def resolve_world(name_or_path: str) -> World:
    p = Path(name_or_path)
    if p.suffix == ".world" and p.exists():
        return load_world_file(p)
    stem = p.name[:-len(".world")] if p.name.endswith(".world") else p.name
    try:
        return bundled_world(stem)
    except FileNotFoundError:
        raise ConfigError(f"world {name_or_path!r} is neither a file nor a bundled world") from None


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    default = cls()
    for k, v in values.items():
        cur = getattr(default, k)
        if isinstance(cur, tuple) and isinstance(v, list):
            v = tuple(v)
        elif isinstance(cur, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{where}.{k} must be true or false")
        elif isinstance(cur, int) and not isinstance(cur, bool):
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{where}.{k} must be an integer")
        elif isinstance(cur, float):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"{where}.{k} must be a number")
            v = float(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in config: {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if k in SECTIONS:
            kwargs[k] = _build(type(SECTIONS[k]()), v, k)
        elif k == "worlds":
            if isinstance(v, str):
                v = [v]
            if not isinstance(v, list) or not v or not all(isinstance(x, str) for x in v):
                raise ConfigError("worlds must be a non-empty list of names or paths")
            kwargs[k] = list(v)
        else:
            kwargs[k] = v
    top = {k: kwargs.pop(k) for k in list(kwargs) if k not in SECTIONS and k != "worlds"}
    base = _build(_TopLevel, top, "config")
    return RunConfig(**kwargs, **asdict(base))


@dataclass
class _TopLevel:
    episodes: int = 500
    seed: int = 0
    output_dir: str = "runs/default"
    checkpoint_every: int = 0


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(data)


def apply_overrides(cfg: RunConfig, assignments: list[str]) -> RunConfig:
    """Apply ``section.key=value`` (or ``key=value``) overrides; values parse as JSON, else as strings."""
    data = cfg.to_dict()
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = data
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"unknown config section {p!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return config_from_dict(data)


def output_dir(cfg: RunConfig) -> Path:
    """The run's output directory; ``HRNAV_OUTPUT_DIR`` overrides the configured one."""
    return Path(os.environ.get(OUTPUT_ENV_VAR) or cfg.output_dir)
