"""pyrofront: seedable wildfire-monitoring testbed with a POMDP UAV agent."""

__version__ = "0.1.0"

from .config import (AgentConfig, EnvConfig, ExperimentConfig, RewardConfig,
                     TrainConfig, load_config)
from .env import EnvState, env_step, init_environment
from .mission import run_experiment_in_memory, scan_path
from .artifacts import run_experiment

__all__ = [
    "AgentConfig", "EnvConfig", "ExperimentConfig", "RewardConfig",
    "TrainConfig", "load_config", "EnvState", "env_step", "init_environment",
    "run_experiment", "run_experiment_in_memory", "scan_path", "__version__",
]
