"""Scan-and-Track mission: deterministic full-coverage sweep, then
epsilon-greedy tracking episodes with replay training.

The scan episode initializes the agent's maps and the value network from a
predetermined boustrophedon path; tracking episodes act greedily on the
learned values with decaying exploration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefTracker
from .config import ExperimentConfig
from .dqn import DQNTrainer, select_action
from .env import IGNITED, EnvState, env_step, init_environment
from .metrics import coverage_ratio, mia
from .nn import encode_uav_vec
from .reward import RewardParts, constraint_reward, info_reward, objective_reward
from .seeding import ROLE_ENV_INIT, ROLE_ENV_STEP, ROLE_OBSERVE, ROLE_POLICY, rng_stream
from .uav import ACTION_DELTAS, HOVER, UavState, apply_action, observe, valid_actions

TERMINATION_CAUSES = ("max_iterations", "battery_depleted", "burnout_limit",
                      "scan_complete")


@dataclass
class EpisodeResult:
    rows: list[dict]
    termination: str
    coverage: float
    time_avg_mia: float
    detected: np.ndarray
    final_env: EnvState
    final_map: np.ndarray
    burnout_steps: int

    @property
    def steps(self) -> int:
        return len(self.rows)


def scan_path(grid_size: int, fov_side: int,
              start: tuple[int, int] = (0, 0)) -> list[tuple[int, int]]:
    """Boustrophedon sweep along stripe centers spaced one FOV apart.

    The last stripe shifts inward so the FOV union covers every cell; the
    sweep begins on the stripe nearest the start cell.
    """
    if fov_side > grid_size:
        raise ValueError("fov_side must be <= grid_size")
    half = fov_side // 2
    centers = list(range(half, grid_size - half, fov_side))
    if centers[-1] < grid_size - 1 - half:
        centers.append(grid_size - 1 - half)
    sx, sy = start
    if abs(sy - centers[-1]) < abs(sy - centers[0]):
        centers.reverse()
    x_lo, x_hi = half, grid_size - 1 - half
    left_to_right = abs(sx - x_lo) <= abs(sx - x_hi)
    path = []
    for cy in centers:
        xs = range(x_lo, x_hi + 1) if left_to_right else range(x_hi, x_lo - 1, -1)
        path.extend((x, cy) for x in xs)
        left_to_right = not left_to_right
    return path


def greedy_step_action(uav: UavState, waypoint: tuple[int, int]) -> int:
    """Single-cell move that most reduces distance to the waypoint; ties
    prefer cardinal moves. Hover if already there."""
    wx, wy = waypoint
    if (uav.x, uav.y) == (wx, wy):
        return HOVER
    best, best_key = HOVER, (math.hypot(wx - uav.x, wy - uav.y), 0)
    for k, (dx, dy) in enumerate(ACTION_DELTAS):
        d = math.hypot(wx - (uav.x + dx), wy - (uav.y + dy))
        key = (d, k % 2)  # odd k are diagonals
        if key < best_key:
            best, best_key = k, key
    return best


def _mark_detections(detected: np.ndarray, obs, env: EnvState) -> None:
    for x, y, reading in obs.cells():
        if reading == IGNITED and env.ignition[y, x] == IGNITED:
            detected[y, x] = True


def run_episode(env: EnvState, uav: UavState, tracker: BeliefTracker,
                trainer: DQNTrainer | None, phase: str, epsilon: float,
                cfg: ExperimentConfig, rng_env: np.random.Generator,
                rng_obs: np.random.Generator, rng_policy: np.random.Generator,
                policy=None, step_hook=None) -> EpisodeResult:
    """Step the observe/update/act/learn loop until a termination condition.

    phase "scan" follows the coverage path (steering limit waived, no action
    selection); phase "track" acts epsilon-greedily over the valid actions,
    or via `policy(uav, valid_set, t)` when a scripted policy is supplied.
    `step_hook(env, tracker)` runs after every environment step.
    """
    n = env.grid_size
    agent_cfg, reward_cfg = cfg.agent, cfg.reward
    freeze = cfg.scenario == "static_batch"
    detected = np.zeros((n, n), dtype=bool)
    waypoints = scan_path(n, agent_cfg.fov_side,
                          (uav.x, uav.y)) if phase == "scan" else []
    wp_idx = 0

    obs = observe(env, uav, agent_cfg, rng_obs)
    tracker.correct(obs, env.wind_mag, env.wind_phase)
    _mark_detections(detected, obs, env)
    map_repr = tracker.map_input(env.t)
    vec = encode_uav_vec(uav.x, uav.y, uav.battery, uav.heading, n)

    rows: list[dict] = []
    mias: list[float] = []
    burnout_steps = 0
    termination = None

    for _ in range(reward_cfg.t_max):
        if phase == "scan":
            while wp_idx < len(waypoints) and (uav.x, uav.y) == waypoints[wp_idx]:
                wp_idx += 1
            if wp_idx >= len(waypoints):
                termination = "scan_complete"
                break
            action = greedy_step_action(uav, waypoints[wp_idx])
        else:
            valid = valid_actions(uav, n, agent_cfg.steer_limit_rad)
            if policy is not None:
                action = policy(uav, valid, env.t)
            else:
                action = select_action(trainer.net, map_repr,
                                       (uav.x, uav.y, uav.battery, uav.heading),
                                       valid, epsilon, rng_policy)

        wind_angle = float(env.wind_phase[uav.y, uav.x])
        next_uav = apply_action(uav, action, wind_angle, agent_cfg)
        env_step(env, cfg.env, rng_env, freeze_fire=freeze)
        tracker.predict(env.t)
        if step_hook is not None:
            step_hook(env, tracker)

        obs = observe(env, next_uav, agent_cfg, rng_obs)
        if cfg.mode == "belief":
            r_inf = info_reward(tracker.belief_fov(obs), obs.readings,
                                reward_cfg.alpha_bel)
        else:
            r_inf = 0.0
        tracker.correct(obs, env.wind_mag, env.wind_phase)
        _mark_detections(detected, obs, env)

        parts = RewardParts(
            objective=objective_reward(obs, next_uav, reward_cfg),
            constraint=constraint_reward(next_uav, action, env, agent_cfg,
                                         reward_cfg, wind_angle),
            info=r_inf,
        ).weighted(reward_cfg.weights_for(phase))
        step_mia = mia(env, next_uav.x, next_uav.y, agent_cfg.fov_side)
        mias.append(step_mia)

        if env.ignition[next_uav.y, next_uav.x] == IGNITED:
            burnout_steps += 1
        done = False
        if next_uav.battery <= 0.0:
            termination, done = "battery_depleted", True
        elif burnout_steps >= reward_cfg.burnout_limit:
            termination, done = "burnout_limit", True

        next_map = tracker.map_input(env.t)
        next_vec = encode_uav_vec(next_uav.x, next_uav.y, next_uav.battery,
                                  next_uav.heading, n)
        if trainer is not None:
            trainer.push(map_repr, vec, action, parts.total,
                         next_map, next_vec, done)
            if cfg.train.train_every > 0 and len(rows) % cfg.train.train_every == 0:
                trainer.train_step()

        rows.append({
            "t": env.t,
            "x": next_uav.x,
            "y": next_uav.y,
            "heading": next_uav.heading,
            "battery": next_uav.battery,
            "action": action,
            "r_obj": parts.objective,
            "r_cstr": parts.constraint,
            "r_inf": parts.info,
            "r_total": parts.total,
            "mia": step_mia,
            "n_det": int(np.count_nonzero(detected & env.ever_ignited)),
            "n_tot": int(np.count_nonzero(env.ever_ignited)),
            "coverage": coverage_ratio(detected, env.ever_ignited),
        })
        uav, map_repr, vec = next_uav, next_map, next_vec
        if termination:
            break

    if termination is None:
        termination = "max_iterations"

    return EpisodeResult(
        rows=rows,
        termination=termination,
        coverage=coverage_ratio(detected, env.ever_ignited),
        time_avg_mia=float(np.mean(mias)) if mias else 0.0,
        detected=detected,
        final_env=env,
        final_map=map_repr,
        burnout_steps=burnout_steps,
    )


def epsilon_for_episode(episode: int, num_episodes: int, cfg: ExperimentConfig) -> float:
    """Linear decay from eps_start to eps_end over the first half of the
    tracking episodes; the scan episode (index 0) never explores."""
    if episode == 0:
        return 0.0
    n_track = max(1, num_episodes - 1)
    half = max(1, n_track // 2)
    frac = min(1.0, (episode - 1) / half)
    return cfg.train.eps_start + (cfg.train.eps_end - cfg.train.eps_start) * frac


@dataclass
class ExperimentResult:
    episodes: list[EpisodeResult] = field(default_factory=list)
    trainer: DQNTrainer | None = None

    @property
    def coverages(self) -> list[float]:
        return [e.coverage for e in self.episodes]

    @property
    def time_avg_mias(self) -> list[float]:
        return [e.time_avg_mia for e in self.episodes]


def run_experiment_in_memory(cfg: ExperimentConfig, episode_hook=None,
                             step_hook=None) -> ExperimentResult:
    """One epoch of Scan-and-Track. No filesystem side effects.

    Re-randomized worlds (dynamic default) draw a fresh fire and fresh agent
    maps every episode. A reused world (static default) is one continuous
    mission: the same environment and the same agent memory carry across
    episodes, so the scan's maps keep countering fire-location ignorance;
    only the UAV itself is relaunched with a full battery.
    """
    cfg.validate()
    from .nn import TwoBranchQNet  # local import to keep module deps one-way
    from .seeding import ROLE_NET_INIT, ROLE_REPLAY

    net = TwoBranchQNet(cfg.env.grid_size,
                        rng_stream(cfg.seed, ROLE_NET_INIT),
                        reduced=cfg.train.reduced_net)
    trainer = DQNTrainer(net, cfg.train.gamma, cfg.train.learning_rate,
                         cfg.train.batch_size, cfg.train.target_sync_period,
                         cfg.train.buffer_capacity,
                         rng_stream(cfg.seed, ROLE_REPLAY),
                         grad_clip_norm=cfg.train.grad_clip_norm)
    result = ExperimentResult(trainer=trainer)
    persistent = cfg.reuse_fire_resolved
    env = None
    tracker = None
    for ep in range(cfg.num_episodes):
        if env is None or not persistent:
            env = init_environment(cfg.env, rng_stream(cfg.seed, ROLE_ENV_INIT, ep))
            tracker = BeliefTracker(env.veg_density, env.veg_type, cfg.env,
                                    cfg.reward.t_max, cfg.mode,
                                    cfg.belief_alpha0, cfg.belief_beta0)
        uav = UavState(x=cfg.agent.start_x, y=cfg.agent.start_y)
        phase = "scan" if ep == 0 else "track"
        eps = epsilon_for_episode(ep, cfg.num_episodes, cfg)
        hook = None
        if step_hook is not None:
            hook = (lambda k: lambda e, tr: step_hook(k, e, tr))(ep)
        ep_result = run_episode(
            env, uav, tracker, trainer, phase, eps, cfg,
            rng_env=rng_stream(cfg.seed, ROLE_ENV_STEP, ep),
            rng_obs=rng_stream(cfg.seed, ROLE_OBSERVE, ep),
            rng_policy=rng_stream(cfg.seed, ROLE_POLICY, ep),
            step_hook=hook,
        )
        result.episodes.append(ep_result)
        if episode_hook is not None:
            episode_hook(ep, ep_result, tracker)
    return result
