"""Agent-side estimates of the ignition state.

Two representations:
  * CertaintyMap - last observations weighted by a linear staleness factor
    (the observation baseline).
  * BeliefMap - per-cell Beta-Bernoulli ignition probabilities with in-FOV
    conjugate correction and out-of-FOV model-based prediction.

Beliefs are Pr{cell currently ignited}; the probability mass a cell has
burnt out is tracked separately so frontline logic stays correct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import EnvConfig
from .env import BURNT, IGNITED, EnvState, burnout_prediction, ignition_probability_map, neighborhood_offsets
from .uav import Observation

UNSEEN = -1
_B_EPS = 1e-9  # keeps rescaled Beta parameters strictly positive
NONVEG_BETA = 1e12


class CertaintyMap:
    """Last FOV readings with per-cell observation timestamps."""

    def __init__(self, grid_size: int, t_max: int):
        self.grid_size = grid_size
        self.t_max = t_max
        self.z_last = np.full((grid_size, grid_size), UNSEEN, dtype=np.int8)
        self.t_obs = np.full((grid_size, grid_size), UNSEEN, dtype=np.int64)

    def update(self, obs: Observation) -> None:
        h, w = obs.readings.shape
        self.z_last[obs.y0:obs.y0 + h, obs.x0:obs.x0 + w] = obs.readings
        self.t_obs[obs.y0:obs.y0 + h, obs.x0:obs.x0 + w] = obs.t_obs

    def certainty(self, t: int) -> np.ndarray:
        """1 - (t - t_obs)/t_max clamped to [0, 1]; unseen cells 0."""
        seen = self.t_obs != UNSEEN
        c = np.where(seen, 1.0 - (t - self.t_obs) / self.t_max, 0.0)
        return np.clip(c, 0.0, 1.0)

    @property
    def seen(self) -> np.ndarray:
        return self.t_obs != UNSEEN

    def observed_fraction(self) -> float:
        return float(self.seen.mean())


def certainty_weighted_observation(cmap: CertaintyMap, t: int) -> np.ndarray:
    """Ignited-indicator of the last readings, discounted by staleness."""
    ignited = (cmap.z_last == IGNITED).astype(float)
    return ignited * cmap.certainty(t)


@dataclass
class BeliefMap:
    b: np.ndarray            # (N,N) Pr{currently ignited}
    alpha: np.ndarray        # (N,N) > 0
    beta: np.ndarray         # (N,N) > 0
    burnt_mass: np.ndarray   # (N,N) in [0,1]; 1 once read as burnt
    veg_mask: np.ndarray     # (N,N) bool, cells that can burn
    rho: np.ndarray          # known vegetation density
    veg_type: np.ndarray     # known vegetation type

    def copy(self) -> "BeliefMap":
        return BeliefMap(self.b.copy(), self.alpha.copy(), self.beta.copy(),
                         self.burnt_mass.copy(), self.veg_mask.copy(),
                         self.rho, self.veg_type)

    @property
    def pinned_burnt(self) -> np.ndarray:
        return self.burnt_mass >= 1.0


def init_belief(rho: np.ndarray, veg_type: np.ndarray,
                alpha0: float, beta0: float) -> BeliefMap:
    """Vegetation-informed Beta prior: alpha = (V/rho)a0, beta = (rho/V)b0.

    Non-vegetated cells cannot burn: belief pinned to 0 behind a huge beta.
    """
    rho = np.asarray(rho, dtype=float)
    veg_type = np.asarray(veg_type, dtype=float)
    veg = rho > 0
    if np.any(veg & (veg_type <= 0)):
        raise ValueError("vegetated cell with nonpositive vegetation type")

    alpha = np.full(rho.shape, float(alpha0))
    beta = np.full(rho.shape, NONVEG_BETA)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha[veg] = (veg_type[veg] / rho[veg]) * alpha0
        beta[veg] = (rho[veg] / veg_type[veg]) * beta0
    b = np.zeros(rho.shape)
    b[veg] = alpha[veg] / (alpha[veg] + beta[veg])
    return BeliefMap(b=b, alpha=alpha, beta=beta,
                     burnt_mass=np.zeros(rho.shape),
                     veg_mask=veg, rho=rho, veg_type=veg_type)


def correct_belief(bmap: BeliefMap, obs: Observation) -> None:
    """Conjugate in-FOV update: ignited reading bumps alpha, else beta.

    Cells read as burnt are pinned: b = 0, burnt_mass = 1, permanently.
    """
    for x, y, reading in obs.cells():
        if not bmap.veg_mask[y, x] or bmap.burnt_mass[y, x] >= 1.0:
            continue
        if reading == BURNT:
            bmap.burnt_mass[y, x] = 1.0
            bmap.b[y, x] = 0.0
            continue
        if reading == IGNITED:
            bmap.alpha[y, x] += 1.0
        else:
            bmap.beta[y, x] += 1.0
        bmap.b[y, x] = bmap.alpha[y, x] / (bmap.alpha[y, x] + bmap.beta[y, x])


def _predicted_ignition(bmap: BeliefMap, wind_mag_est: np.ndarray,
                        wind_phase_est: np.ndarray, fuel_frac_est: np.ndarray,
                        config: EnvConfig) -> np.ndarray:
    """Belief-weighted spread sum over the neighborhood, clamped to [0, 1]."""
    n = bmap.b.shape[0]
    sig2 = config.sigma_spread ** 2
    max_a = float(wind_mag_est.max())
    consumed = 1.0 - fuel_frac_est
    p01 = np.zeros((n, n))
    for dx, dy, d in neighborhood_offsets(config.neighborhood_radius):
        bearing = math.atan2(dy, dx)
        f_adj = (1.0 / (2.0 * sig2)) * math.exp(-(d * d) / (2.0 * sig2))
        if max_a > 0:
            w_par = wind_mag_est * np.cos(np.abs(bearing - wind_phase_est))
            f_wind = 0.5 * (1.0 + w_par / max_a)
        else:
            f_wind = np.full((n, n), 0.5)
        src = bmap.b * f_adj * f_wind * consumed
        ys0, ys1 = max(0, dy), min(n, n + dy)
        xs0, xs1 = max(0, dx), min(n, n + dx)
        p01[ys0:ys1, xs0:xs1] += src[ys0 - dy:ys1 - dy, xs0 - dx:xs1 - dx]
    p01[~bmap.veg_mask] = 0.0
    return np.clip(p01, 0.0, 1.0)


def predict_belief(bmap: BeliefMap, wind_mag_est: np.ndarray,
                   wind_phase_est: np.ndarray, fuel_frac_est: np.ndarray,
                   config: EnvConfig) -> None:
    """Model-based time update b' = (1-b)*p01 + b*(1-p12).

    p01 comes from the agent's wind/fuel estimates; p12 is 1 exactly where the
    agent's own fuel integration has crossed the extinction level. Beta
    parameters are rescaled so the posterior mean moves to b' while the
    evidence mass alpha+beta is preserved.
    """
    p01 = _predicted_ignition(bmap, wind_mag_est, wind_phase_est,
                              fuel_frac_est, config)
    f0 = bmap.rho / config.rho_base * config.fuel_base
    ext = config.fuel_extinction_frac * config.rho_base
    with np.errstate(divide="ignore", invalid="ignore"):
        ext_frac = np.where(f0 > 0, ext / np.where(f0 > 0, f0, 1.0), 1.0)
    p12 = (fuel_frac_est <= ext_frac).astype(float)

    live = bmap.veg_mask & ~bmap.pinned_burnt
    b_new = (1.0 - bmap.b) * p01 + bmap.b * (1.0 - p12)
    b_new = np.clip(b_new, 0.0, 1.0)
    bmap.b[live] = b_new[live]

    mass = bmap.alpha + bmap.beta
    b_safe = np.clip(bmap.b, _B_EPS, 1.0 - _B_EPS)
    bmap.alpha[live] = (b_safe * mass)[live]
    bmap.beta[live] = (mass - b_safe * mass)[live]


def oracle_bayes_update(bmap: BeliefMap, env: EnvState | None, config: EnvConfig,
                        *, allow_oracle: bool = False,
                        p01: np.ndarray | None = None,
                        p12: np.ndarray | None = None) -> None:
    """Exact two-state time update with the true transition probabilities.

    Test-only: supplies the hidden-state p01/p12 the agent can never measure.
    Explicit p01/p12 arrays override the env-derived ones.
    """
    if not allow_oracle:
        raise RuntimeError("oracle_bayes_update is a test-mode oracle; "
                           "pass allow_oracle=True")
    if p01 is None:
        p01 = ignition_probability_map(env, config)
    if p12 is None:
        p12 = burnout_prediction(env, config).astype(float)
    b_new = (1.0 - bmap.b) * np.asarray(p01) + bmap.b * (1.0 - np.asarray(p12))
    bmap.b = np.clip(b_new, 0.0, 1.0)
    mass = bmap.alpha + bmap.beta
    b_safe = np.clip(bmap.b, _B_EPS, 1.0 - _B_EPS)
    bmap.alpha = b_safe * mass
    bmap.beta = mass - b_safe * mass


class BeliefTracker:
    """Per-episode agent memory: certainty map, belief map, wind and fuel
    estimates, and the predict/correct cycle that feeds the value network."""

    def __init__(self, rho: np.ndarray, veg_type: np.ndarray, env_config: EnvConfig,
                 t_max: int, mode: str, alpha0: float = 1.0, beta0: float = 1.0):
        n = np.asarray(rho).shape[0]
        self.mode = mode
        self.env_config = env_config
        self.certainty = CertaintyMap(n, t_max)
        self.belief = init_belief(rho, veg_type, alpha0, beta0)
        self.wind_mag_last = np.zeros((n, n))
        self.wind_phase_last = np.zeros((n, n))
        self.wind_seen = np.zeros((n, n), dtype=bool)
        self.fuel_frac = np.ones((n, n))
        self.ignited_latched = np.zeros((n, n), dtype=bool)
        self._b_prev = self.belief.b.copy()  # the prior itself is not a crossing

    def belief_fov(self, obs: Observation) -> np.ndarray:
        h, w = obs.readings.shape
        return self.belief.b[obs.y0:obs.y0 + h, obs.x0:obs.x0 + w]

    def correct(self, obs: Observation, wind_mag: np.ndarray,
                wind_phase: np.ndarray) -> None:
        """Fold one observation in: readings, timestamps, wind measurements."""
        self.certainty.update(obs)
        h, w = obs.readings.shape
        sl = (slice(obs.y0, obs.y0 + h), slice(obs.x0, obs.x0 + w))
        self.wind_mag_last[sl] = wind_mag[sl]
        self.wind_phase_last[sl] = wind_phase[sl]
        self.wind_seen[sl] = True
        if self.mode == "belief":
            correct_belief(self.belief, obs)

    def wind_estimate(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Magnitude decays toward the mean measurement as certainty fades."""
        if not self.wind_seen.any():
            n = self.certainty.grid_size
            return np.zeros((n, n)), np.zeros((n, n))
        c = self.certainty.certainty(t)
        mean_mag = float(self.wind_mag_last[self.wind_seen].mean())
        mag = np.where(self.wind_seen,
                       c * self.wind_mag_last + (1.0 - c) * mean_mag, mean_mag)
        sin_m = float(np.sin(self.wind_phase_last[self.wind_seen]).mean())
        cos_m = float(np.cos(self.wind_phase_last[self.wind_seen]).mean())
        mean_phase = math.atan2(sin_m, cos_m) % (2.0 * math.pi)
        phase = np.where(self.wind_seen, self.wind_phase_last, mean_phase)
        return mag, phase

    def predict(self, t: int) -> None:
        """Advance the belief one step using the agent's own dynamics model.

        The per-cell fuel integration starts when the belief first crosses
        0.5 upward (observation- or prediction-driven); once latched a cell
        keeps consuming model fuel.
        """
        if self.mode != "belief":
            return
        mag_est, phase_est = self.wind_estimate(t)
        self.ignited_latched |= (self._b_prev <= 0.5) & (self.belief.b > 0.5)
        burn = self.ignited_latched & (self.fuel_frac > 0)
        if burn.any():
            max_a = float(mag_est.max())
            denom = max_a if max_a > 0 else self.env_config.a_max
            if denom > 0:
                decay = np.exp(-self.belief.veg_type * (mag_est / denom))
            else:
                decay = np.ones_like(mag_est)
            self.fuel_frac[burn] *= decay[burn]
        predict_belief(self.belief, mag_est, phase_est, self.fuel_frac,
                       self.env_config)
        self._b_prev = self.belief.b.copy()

    def map_input(self, t: int) -> np.ndarray:
        """Value-network map input for the configured representation."""
        if self.mode == "belief":
            return self.belief.b.copy()
        return certainty_weighted_observation(self.certainty, t)
