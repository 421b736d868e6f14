"""Experiment configuration: defaults, validation, JSON loading, CLI overrides.

Every tunable of the environment, agent, reward, and trainer lives here so a
resolved config serialized into a run directory reproduces the run exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

PHASE_PATTERNS = ("linear-x", "linear-y", "radial")
MODES = ("observation", "belief")
SCENARIOS = ("static_batch", "dynamic")


class ConfigError(ValueError):
    """Raised for unknown keys or invariant violations in a config."""


def _default_class_error() -> list[list[float]]:
    # 95% correct classification, residual mass split between the other two states
    return [
        [0.95, 0.025, 0.025],
        [0.025, 0.95, 0.025],
        [0.025, 0.025, 0.95],
    ]


@dataclass
class EnvConfig:
    grid_size: int = 16
    num_veg_patches: int = 5
    veg_radius_min: float = 3.0
    veg_radius_max: float = 6.0
    num_ignitions: int = 10
    sigma_spread: float = 1.0
    eps_rad: float = 3.0
    m_phase: float = 1.0
    phase_pattern: str = "linear-x"
    a_max: float = 100.0
    a_init_amp: float = 80.0
    a_var_amp: float = 20.0
    t_mag_period: float = 20.0
    t_phase_period: float = 80.0
    fuel_base: float = 1.0
    rho_base: float = 1.0
    neighborhood_radius: float = 0.0  # 0 -> derived as ceil(3*sigma_spread)
    fuel_noise_std_frac: float = 0.02  # fraction of rho_base
    fuel_extinction_frac: float = 0.01  # burnout once fuel <= frac*rho_base

    def __post_init__(self):
        if self.neighborhood_radius <= 0:
            self.neighborhood_radius = float(math.ceil(3.0 * self.sigma_spread))

    def validate(self) -> None:
        if self.grid_size < 1:
            raise ConfigError("env.grid_size must be >= 1")
        if self.m_phase < 0.5:
            raise ConfigError("env.m_phase must be >= 1/2")
        if self.sigma_spread <= 0:
            raise ConfigError("env.sigma_spread must be > 0")
        if self.neighborhood_radius < 1:
            raise ConfigError("env.neighborhood_radius must be >= 1")
        if self.eps_rad <= 0:
            raise ConfigError("env.eps_rad must be > 0")
        if self.phase_pattern not in PHASE_PATTERNS:
            raise ConfigError(
                f"env.phase_pattern must be one of {PHASE_PATTERNS}"
            )
        if not (0.0 <= self.a_init_amp <= self.a_max):
            raise ConfigError("env.a_init_amp must lie in [0, a_max]")
        if self.a_max < 0:
            raise ConfigError("env.a_max must be >= 0")
        if self.veg_radius_min > self.veg_radius_max:
            raise ConfigError("env.veg_radius_min must be <= veg_radius_max")
        if self.num_ignitions < 0:
            raise ConfigError("env.num_ignitions must be >= 0")
        if self.fuel_base <= 0 or self.rho_base <= 0:
            raise ConfigError("env.fuel_base and env.rho_base must be > 0")


@dataclass
class AgentConfig:
    fov_side: int = 5
    steer_limit_deg: float = 180.0
    battery_threshold: float = 20.0
    hover_cost: float = 0.1
    move_cost: float = 0.1
    move_hover_ratio: float = 2.0
    class_error: list[list[float]] = field(default_factory=_default_class_error)
    start_x: int = 0
    start_y: int = 0

    @property
    def steer_limit_rad(self) -> float:
        return math.radians(self.steer_limit_deg)

    def validate(self, grid_size: int | None = None) -> None:
        if self.fov_side < 1 or self.fov_side % 2 == 0:
            raise ConfigError("agent.fov_side must be an odd positive integer")
        if grid_size is not None and self.fov_side > grid_size:
            raise ConfigError("agent.fov_side must be <= env.grid_size")
        if len(self.class_error) != 3 or any(len(r) != 3 for r in self.class_error):
            raise ConfigError("agent.class_error must be a 3x3 matrix")
        for row in self.class_error:
            if any(p < 0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                raise ConfigError("agent.class_error rows must be nonnegative and sum to 1")
        if not (0 <= self.battery_threshold <= 100):
            raise ConfigError("agent.battery_threshold must lie in [0, 100]")
        if self.hover_cost < 0 or self.move_cost < 0:
            raise ConfigError("agent.hover_cost and agent.move_cost must be >= 0")


@dataclass
class RewardConfig:
    alpha_det: float = 10.0
    alpha_mon: float = 10.0
    alpha_mvm: float = 1.0
    alpha_bat: float = 1.0
    alpha_brn: float = 1.0
    alpha_bel: float = 40.0
    battery_penalty: float = -100.0
    burnout_penalty: float = -200.0
    burnout_limit: int = 10
    t_max: int = 500
    # per-phase re-weighting hook: multipliers applied to the three
    # sub-rewards during the named mission phase (neutral by default)
    phase_weights: dict = field(default_factory=lambda: {
        "scan": [1.0, 1.0, 1.0],
        "track": [1.0, 1.0, 1.0],
    })

    def weights_for(self, phase: str) -> tuple[float, float, float]:
        w = self.phase_weights.get(phase, [1.0, 1.0, 1.0])
        return float(w[0]), float(w[1]), float(w[2])

    def validate(self) -> None:
        if self.burnout_limit < 1:
            raise ConfigError("reward.burnout_limit must be >= 1")
        if self.t_max < 1:
            raise ConfigError("reward.t_max must be >= 1")
        for phase, w in self.phase_weights.items():
            if len(w) != 3:
                raise ConfigError(
                    f"reward.phase_weights[{phase!r}] must have 3 entries "
                    "(objective, constraint, info)")


@dataclass
class TrainConfig:
    gamma: float = 0.95
    learning_rate: float = 1e-3
    batch_size: int = 32
    target_sync_period: int = 100
    eps_start: float = 1.0
    eps_end: float = 0.1
    buffer_capacity: int = 20000
    reduced_net: bool = True
    train_every: int = 1
    grad_clip_norm: float = 10.0  # 0 disables clipping

    def validate(self) -> None:
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError("train.gamma must lie in [0, 1)")
        for name in ("eps_start", "eps_end"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"train.{name} must lie in [0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ConfigError("train.buffer_capacity must be >= batch_size >= 1")
        if self.target_sync_period < 1:
            raise ConfigError("train.target_sync_period must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("train.learning_rate must be >= 0")
        if self.grad_clip_norm < 0:
            raise ConfigError("train.grad_clip_norm must be >= 0")


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    mode: str = "belief"
    scenario: str = "dynamic"
    num_episodes: int = 20
    output_dir: str = "runs"
    seed: int = 0
    belief_alpha0: float = 1.0
    belief_beta0: float = 1.0
    reuse_fire: bool | None = None  # None: static keeps one fire, dynamic redraws
    snapshot_maps: bool = False

    @property
    def reuse_fire_resolved(self) -> bool:
        if self.reuse_fire is None:
            return self.scenario == "static_batch"
        return self.reuse_fire

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.num_episodes < 1:
            raise ConfigError("num_episodes must be >= 1")
        if self.belief_alpha0 <= 0 or self.belief_beta0 <= 0:
            raise ConfigError("belief_alpha0 and belief_beta0 must be > 0")
        self.env.validate()
        self.agent.validate(self.env.grid_size)
        self.reward.validate()
        self.train.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()[:16]


_SECTIONS = {
    "env": EnvConfig,
    "agent": AgentConfig,
    "reward": RewardConfig,
    "train": TrainConfig,
}


def _apply_section(obj, data: dict, section: str) -> None:
    known = {f.name for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {section}.{key}")
        setattr(obj, key, value)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a (possibly partial) nested dict."""
    cfg = ExperimentConfig()
    top_known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section '{key}' must be an object")
            _apply_section(getattr(cfg, key), value, key)
        elif key in top_known:
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown config key: {key}")
    # re-derive the neighborhood radius if sigma changed but radius was not given
    env_data = data.get("env", {})
    if "sigma_spread" in env_data and "neighborhood_radius" not in env_data:
        cfg.env.neighborhood_radius = float(math.ceil(3.0 * cfg.env.sigma_spread))
    return cfg


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Load a JSON config file and apply overrides; empty inputs give defaults.

    Overrides use dotted keys for sections ("env.grid_size") or plain keys for
    top-level fields; command-line values win over file values.
    """
    data: dict = {}
    if path is not None:
        raw = Path(path).read_text()
        data = json.loads(raw) if raw.strip() else {}
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
    for key, value in (overrides or {}).items():
        if "." in key:
            section, sub = key.split(".", 1)
            data.setdefault(section, {})
            if not isinstance(data[section], dict):
                raise ConfigError(f"config section '{section}' must be an object")
            data[section][sub] = value
        else:
            data[key] = value
    cfg = config_from_dict(data)
    cfg.validate()
    return cfg
