"""Run configuration: one flat TOML document per task per arm."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    task: str = "ReachPoint"
    seed: int = 0
    total_env_steps: int = 50_000
    episodes_per_iter: int = 1
    updates_per_env_step: float = 1.0
    batch_size: int = 256
    replay_capacity: int = 100_000
    warmup_env_steps: int = 500
    random_env_steps: int = 2_000   # uniform-random actions before the policy acts
    eval_interval: int = 2_000
    eval_episodes: int = 20
    early_stop_success: float = 0.0  # 0 disables early stopping

    # progression shaping
    r_phi: float = 1.0
    subgoal_bonus: float = 0.25
    waypoint_bonus: float = 0.1
    exact_reward_mode: bool = False  # strip both bonuses, keep the pure case table

    # sac
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    alpha_k: float = 0.1
    alpha_p: float = 0.1
    twin_critics: bool = True
    autotune_temperatures: bool = False
    hidden: int = 64

    # task encoder
    encoder_enabled: bool = True
    enc_layers: int = 2
    enc_dim: int = 32
    enc_heads: int = 4
    enc_mlp_hidden: int = 64
    enc_max_len: int = 24
    enc_pool: str = "mean"

    # waypoints
    waypoints_enabled: bool = True
    n_waypoints: int = 3
    planner_hidden: int = 32
    planner_lr: float = 1e-3
    planner_baseline: bool = True
    eps_reach: float = 0.05

    def validate(self) -> "RunConfig":
        if self.total_env_steps <= 0:
            raise ConfigError("total_env_steps must be positive")
        if self.r_phi <= 0:
            raise ConfigError("r_phi must be positive")
        if self.exact_reward_mode:
            self.subgoal_bonus = 0.0
            self.waypoint_bonus = 0.0
            self.planner_baseline = False
        if self.waypoint_bonus > 0 and not self.waypoints_enabled:
            raise ConfigError("waypoint_bonus requires waypoints_enabled")
        if self.batch_size <= 0 or self.replay_capacity < self.batch_size:
            raise ConfigError("replay must hold at least one batch")
        if self.enc_pool not in ("mean", "cls"):
            raise ConfigError(f"unknown pooling {self.enc_pool!r}")
        return self

    @classmethod
    def from_toml(cls, path, **overrides) -> "RunConfig":
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys in {path}: {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        return cls(**doc).validate()

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]
