"""UAV state, constrained action space, movement/battery dynamics, observations.

Actions 0..7 are the compass directions k*pi/4 (0 = east, 2 = north in grid
coordinates with y growing north); action 8 is hover. A fresh UAV has no
heading yet ("hover-neutral"), which, like a hover, lifts the steering
constraint for the next move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import AgentConfig
from .env import EnvState

HOVER = 8
N_ACTIONS = 9
ACTION_ANGLES = tuple(k * math.pi / 4.0 for k in range(8))
ACTION_DELTAS = tuple(
    (int(round(math.cos(a))), int(round(math.sin(a)))) for a in ACTION_ANGLES
)


@dataclass(frozen=True)
class UavState:
    x: int
    y: int
    heading: float | None = None  # None until the first move
    battery: float = 100.0
    last_action_was_hover: bool = False


@dataclass
class Observation:
    """FOV readings clipped to the grid: readings[j, i] is cell (x0+i, y0+j)."""
    center: tuple[int, int]
    x0: int
    y0: int
    readings: np.ndarray  # (h, w) int8 over {0,1,2}
    t_obs: int

    def cells(self):
        h, w = self.readings.shape
        for j in range(h):
            for i in range(w):
                yield self.x0 + i, self.y0 + j, int(self.readings[j, i])

    @property
    def n_cells(self) -> int:
        return int(self.readings.size)


def angle_diff(a: float, b: float) -> float:
    """Unsigned angular difference wrapped into [0, pi]."""
    d = abs(a - b) % (2.0 * math.pi)
    return 2.0 * math.pi - d if d > math.pi else d


def valid_actions(uav: UavState, grid_size: int, steer_limit: float) -> list[int]:
    """Grid- and steering-feasible actions; hover is always allowed."""
    unconstrained = uav.last_action_was_hover or uav.heading is None
    out = []
    for k, (dx, dy) in enumerate(ACTION_DELTAS):
        nx, ny = uav.x + dx, uav.y + dy
        if not (0 <= nx < grid_size and 0 <= ny < grid_size):
            continue
        if not unconstrained and angle_diff(ACTION_ANGLES[k], uav.heading) >= steer_limit:
            continue
        out.append(k)
    out.append(HOVER)
    return out


def movement_battery_cost(action: int, wind_angle: float, config: AgentConfig) -> float:
    """Battery drawn by one action: R_H to hover, gamma_m*beta*R_M to move."""
    if action == HOVER:
        return config.hover_cost
    beta = 1.0 - math.cos(ACTION_ANGLES[action] - wind_angle)
    return config.move_hover_ratio * beta * config.move_cost


def apply_action(uav: UavState, action: int, wind_angle: float,
                 config: AgentConfig) -> UavState:
    """One kinematic step; heading and the hover flag track the action taken."""
    cost = movement_battery_cost(action, wind_angle, config)
    battery = max(0.0, uav.battery - cost)
    if action == HOVER:
        return replace(uav, battery=battery, last_action_was_hover=True)
    dx, dy = ACTION_DELTAS[action]
    return UavState(
        x=uav.x + dx,
        y=uav.y + dy,
        heading=ACTION_ANGLES[action],
        battery=battery,
        last_action_was_hover=False,
    )


def fov_bounds(x: int, y: int, fov_side: int, grid_size: int) -> tuple[int, int, int, int]:
    """(x0, y0, x1, y1) of the FOV window clipped to the grid (x1/y1 exclusive)."""
    half = fov_side // 2
    return (max(0, x - half), max(0, y - half),
            min(grid_size, x + half + 1), min(grid_size, y + half + 1))


def observe(env: EnvState, uav: UavState, config: AgentConfig,
            rng: np.random.Generator) -> Observation:
    """Read the FOV through the classification-error channel."""
    x0, y0, x1, y1 = fov_bounds(uav.x, uav.y, config.fov_side, env.grid_size)
    true_patch = env.ignition[y0:y1, x0:x1]
    err = np.asarray(config.class_error)
    readings = np.empty_like(true_patch)
    flat_true = true_patch.ravel()
    flat_read = readings.ravel()
    u = rng.random(flat_true.size)
    cum = np.cumsum(err, axis=1)
    for i, tv in enumerate(flat_true):
        flat_read[i] = int(np.searchsorted(cum[tv], u[i], side="right"))
    np.clip(flat_read, 0, 2, out=flat_read)
    return Observation(center=(uav.x, uav.y), x0=x0, y0=y0,
                       readings=readings, t_obs=env.t)
