"""Step reward: objective (detect/monitor) + constraints (power, battery,
burnout) + belief-accuracy information term."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AgentConfig, RewardConfig
from .env import IGNITED, EnvState
from .uav import Observation, UavState, movement_battery_cost

EPS_PROB = 1e-6
_NEIGHBOR_OFFSETS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                     if (dx, dy) != (0, 0)]


@dataclass(frozen=True)
class RewardParts:
    objective: float
    constraint: float
    info: float

    @property
    def total(self) -> float:
        return self.objective + self.constraint + self.info

    def weighted(self, weights: tuple[float, float, float]) -> "RewardParts":
        """Phase-dependent re-weighting of the three sub-rewards."""
        wo, wc, wi = weights
        return RewardParts(wo * self.objective, wc * self.constraint,
                           wi * self.info)


def observed_frontline_cells(obs: Observation) -> list[tuple[int, int]]:
    """Cells read as ignited with an in-window not-ignited neighbor."""
    h, w = obs.readings.shape
    out = []
    for j in range(h):
        for i in range(w):
            if obs.readings[j, i] != IGNITED:
                continue
            for dx, dy in _NEIGHBOR_OFFSETS:
                ni, nj = i + dx, j + dy
                if 0 <= ni < w and 0 <= nj < h and obs.readings[nj, ni] != IGNITED:
                    out.append((obs.x0 + i, obs.y0 + j))
                    break
    return out


def objective_reward(obs: Observation, uav: UavState, config: RewardConfig) -> float:
    """Detection fraction plus exp(-d_min) proximity to the observed frontline."""
    ignited = [(x, y) for (x, y, r) in obs.cells() if r == IGNITED]
    if not ignited:
        return 0.0
    n_det = len(ignited)
    detect = config.alpha_det * n_det / obs.n_cells
    frontline = observed_frontline_cells(obs)
    ref = frontline if frontline else ignited
    d_min = min(math.hypot(x - uav.x, y - uav.y) for (x, y) in ref)
    return detect + config.alpha_mon * math.exp(-d_min)


def constraint_reward(uav: UavState, action: int, env: EnvState,
                      agent_cfg: AgentConfig, config: RewardConfig,
                      wind_angle: float) -> float:
    """Movement-power, low-battery, and burnout penalties for this step.

    `uav` is the post-move state; the burnout check uses the cell under it.
    """
    r = -config.alpha_mvm * movement_battery_cost(action, wind_angle, agent_cfg)
    if uav.battery < agent_cfg.battery_threshold:
        r += config.alpha_bat * config.battery_penalty
    if env.ignition[uav.y, uav.x] == IGNITED:
        r += config.alpha_brn * config.burnout_penalty
    return r


def bernoulli_kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p = np.clip(p, EPS_PROB, 1.0 - EPS_PROB)
    q = np.clip(q, EPS_PROB, 1.0 - EPS_PROB)
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def info_reward(belief_fov: np.ndarray, obs_fov: np.ndarray, alpha_bel: float) -> float:
    """-alpha_bel * sum of per-cell Bernoulli KL(observed indicator || belief).

    Nonpositive; zero only when the clamped belief matches the clamped
    observation indicator everywhere.
    """
    if alpha_bel == 0.0:
        return 0.0
    z = (np.asarray(obs_fov) == IGNITED).astype(float)
    kl = bernoulli_kl(z, np.asarray(belief_fov, dtype=float)).sum()
    return float(-alpha_bel * kl + 0.0)  # +0.0 avoids logging "-0"


def total_reward(parts: RewardParts) -> float:
    return parts.total
