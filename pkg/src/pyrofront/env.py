"""Hidden wildfire environment: vegetation, wind field, fuel, stochastic spread.

Grids are (N, N) arrays indexed [y, x]; positions are (x, y) cell coordinates
with x growing east and y growing north. Angles follow atan2(dy, dx).

Ignition state per cell: 0 = not ignited, 1 = ignited, 2 = burnt out.
Transitions are monotone (0 -> 1 -> 2, never backward).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import EnvConfig

NOT_IGNITED = 0
IGNITED = 1
BURNT = 2

TWO_PI = 2.0 * math.pi


@dataclass
class EnvState:
    grid_size: int
    ignition: np.ndarray          # (N,N) int8 in {0,1,2}
    fuel: np.ndarray              # (N,N) float, nonincreasing per cell
    fuel_initial: np.ndarray      # (N,N) float, fuel at ignition-capable cells
    wind_mag: np.ndarray          # (N,N) float in [0, a_max]
    wind_phase: np.ndarray        # (N,N) float in [0, 2*pi)
    wind_mag0: np.ndarray         # initial magnitude field (Eq.-2-style GRBF)
    wind_phase0: np.ndarray       # initial phase field
    veg_density: np.ndarray       # (N,N) float, k*rho_base or 0 off-patch
    veg_type: np.ndarray          # (N,N) int in {0..5}, 0 off-patch
    t: int = 0
    ever_ignited: np.ndarray = field(default=None)  # bool, cells that reached state 1

    def __post_init__(self):
        if self.ever_ignited is None:
            self.ever_ignited = self.ignition >= IGNITED

    def copy(self) -> "EnvState":
        return EnvState(
            grid_size=self.grid_size,
            ignition=self.ignition.copy(),
            fuel=self.fuel.copy(),
            fuel_initial=self.fuel_initial.copy(),
            wind_mag=self.wind_mag.copy(),
            wind_phase=self.wind_phase.copy(),
            wind_mag0=self.wind_mag0.copy(),
            wind_phase0=self.wind_phase0.copy(),
            veg_density=self.veg_density.copy(),
            veg_type=self.veg_type.copy(),
            t=self.t,
            ever_ignited=self.ever_ignited.copy(),
        )

    def state_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for a in (self.ignition, self.fuel, self.wind_mag, self.wind_phase,
                  self.veg_density, self.veg_type):
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(str(self.t).encode())
        return h.hexdigest()


def neighborhood_offsets(radius: float) -> list[tuple[int, int, float]]:
    """(dx, dy, d) for all nonzero offsets with Euclidean distance <= radius."""
    r = int(math.floor(radius))
    out = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dx == 0 and dy == 0:
                continue
            d = math.hypot(dx, dy)
            if d <= radius + 1e-12:
                out.append((dx, dy, d))
    return out


def initial_phase_field(n: int, pattern: str, m_phase: float) -> np.ndarray:
    ys, xs = np.mgrid[0:n, 0:n].astype(float)
    if pattern == "linear-x":
        phi = xs * math.pi / (m_phase * n)
    elif pattern == "linear-y":
        phi = ys * math.pi / (m_phase * n)
    elif pattern == "radial":
        phi = np.arctan2(ys - n / 2.0, xs - n / 2.0)
    else:
        raise ValueError(f"unknown phase pattern: {pattern}")
    return np.mod(phi, TWO_PI)


def initial_magnitude_field(n: int, ignited_cells: list[tuple[int, int]],
                            amp: float, eps_rad: float) -> np.ndarray:
    """Gaussian radial bump of height `amp` around the nearest ignited cell.

    The bump scale comes from eps_rad = 3*sigma_rad, i.e. exponent
    -(9 / (2 eps_rad^2)) * min_d2.
    """
    if not ignited_cells:
        return np.zeros((n, n))
    ys, xs = np.mgrid[0:n, 0:n].astype(float)
    min_d2 = np.full((n, n), np.inf)
    for (ix, iy) in ignited_cells:
        d2 = (xs - ix) ** 2 + (ys - iy) ** 2
        np.minimum(min_d2, d2, out=min_d2)
    return amp * np.exp(-(9.0 / (2.0 * eps_rad ** 2)) * min_d2)


def init_environment(config: EnvConfig, rng: np.random.Generator) -> EnvState:
    """Generate vegetation patches, spot fires, and the initial wind field."""
    n = config.grid_size
    fit_limit = (n - 1) // 2  # largest radius whose center band is nonempty
    if config.veg_radius_min > fit_limit:
        raise ValueError(
            f"vegetation patches of radius {config.veg_radius_min} cannot fit "
            f"inside a {n}x{n} grid"
        )

    rho = np.zeros((n, n))
    veg_type = np.zeros((n, n), dtype=np.int8)
    ys, xs = np.mgrid[0:n, 0:n].astype(float)
    for _ in range(config.num_veg_patches):
        radius = rng.uniform(config.veg_radius_min,
                             min(config.veg_radius_max, fit_limit))
        lo = int(math.ceil(radius))
        hi = n - 1 - lo
        cx = int(rng.integers(lo, hi + 1))
        cy = int(rng.integers(lo, hi + 1))
        density_level = int(rng.integers(1, 6))
        vtype = int(rng.integers(1, 6))
        mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
        rho[mask] = density_level * config.rho_base
        veg_type[mask] = vtype

    veg_cells = np.argwhere(rho > 0)  # rows of (y, x)
    if len(veg_cells) < config.num_ignitions:
        raise ValueError(
            f"cannot place {config.num_ignitions} ignitions on "
            f"{len(veg_cells)} vegetated cells"
        )

    ignition = np.zeros((n, n), dtype=np.int8)
    idx = rng.choice(len(veg_cells), size=config.num_ignitions, replace=False)
    ignited = [(int(veg_cells[i][1]), int(veg_cells[i][0])) for i in np.sort(idx)]
    for (ix, iy) in ignited:
        ignition[iy, ix] = IGNITED

    # initial fuel scales with the density level: rho = k*rho_base -> f = k*fuel_base
    fuel = rho / config.rho_base * config.fuel_base
    fuel_initial = fuel.copy()

    phase0 = initial_phase_field(n, config.phase_pattern, config.m_phase)
    mag0 = initial_magnitude_field(n, ignited, config.a_init_amp, config.eps_rad)

    return EnvState(
        grid_size=n,
        ignition=ignition,
        fuel=fuel,
        fuel_initial=fuel_initial,
        wind_mag=np.clip(mag0, 0.0, config.a_max),
        wind_phase=phase0.copy(),
        wind_mag0=mag0,
        wind_phase0=phase0,
        veg_density=rho,
        veg_type=veg_type,
        t=0,
    )


def wind_step(state: EnvState, config: EnvConfig) -> None:
    """Advance wind to the field for the state's current t (sinusoidal pattern)."""
    t = state.t
    dphi = math.pi * t / config.t_phase_period
    da = config.a_var_amp * math.sin(math.pi * t / config.t_mag_period)
    state.wind_phase = np.mod(state.wind_phase0 + dphi, TWO_PI)
    state.wind_mag = np.clip(state.wind_mag0 + da, 0.0, config.a_max)


def _wind_term(a_src: float, phi_src: float, bearing: float, max_a: float) -> float:
    if max_a <= 0.0:
        return 0.5
    w_par = a_src * math.cos(abs(bearing - phi_src))
    return 0.5 * (1.0 + w_par / max_a)


def spread_probability(state: EnvState, source: tuple[int, int],
                       target: tuple[int, int], config: EnvConfig) -> float:
    """Conditional probability that `source` ignites `target` this step.

    Product of an adjacency kernel, the source's consumed-fuel fraction, and a
    wind-alignment term, clamped to [0, 1].
    """
    sx, sy = source
    tx, ty = target
    d2 = (tx - sx) ** 2 + (ty - sy) ** 2
    sig2 = config.sigma_spread ** 2
    f_adj = (1.0 / (2.0 * sig2)) * math.exp(-d2 / (2.0 * sig2))
    f0 = state.fuel_initial[sy, sx]
    f_fuel = 0.0 if f0 <= 0 else 1.0 - state.fuel[sy, sx] / f0
    bearing = math.atan2(ty - sy, tx - sx)
    max_a = float(state.wind_mag.max())
    f_wind = _wind_term(float(state.wind_mag[sy, sx]),
                        float(state.wind_phase[sy, sx]), bearing, max_a)
    return float(np.clip(f_adj * f_fuel * f_wind, 0.0, 1.0))


def in_range_sources(state: EnvState, target: tuple[int, int],
                     config: EnvConfig) -> list[tuple[int, int]]:
    tx, ty = target
    n = state.grid_size
    out = []
    for dx, dy, _ in neighborhood_offsets(config.neighborhood_radius):
        sx, sy = tx + dx, ty + dy
        if 0 <= sx < n and 0 <= sy < n and state.ignition[sy, sx] == IGNITED:
            out.append((sx, sy))
    return out


def source_weights(state: EnvState, target: tuple[int, int],
                   config: EnvConfig) -> dict[tuple[int, int], float]:
    """Softmax-in-distance weights over the in-range ignited sources."""
    sources = in_range_sources(state, target, config)
    if not sources:
        return {}
    tx, ty = target
    raw = np.array([math.exp(-((sx - tx) ** 2 + (sy - ty) ** 2))
                    for (sx, sy) in sources])
    raw /= raw.sum()
    return dict(zip(sources, raw.tolist()))


def ignition_probability(state: EnvState, target: tuple[int, int],
                         config: EnvConfig) -> float:
    """Total 0->1 probability for `target`: weighted sum over in-range sources."""
    tx, ty = target
    if state.ignition[ty, tx] != NOT_IGNITED or state.veg_density[ty, tx] <= 0:
        return 0.0
    weights = source_weights(state, target, config)
    return float(sum(w * spread_probability(state, s, target, config)
                     for s, w in weights.items()))


def ignition_probability_map(state: EnvState, config: EnvConfig) -> np.ndarray:
    """Vectorized Eq.-6 map: per-cell total ignition probability this step.

    Zero for cells that are not vegetated, not in state 0, or have no ignited
    cell within the neighborhood radius.
    """
    n = state.grid_size
    ignited = state.ignition == IGNITED
    if not ignited.any():
        return np.zeros((n, n))

    max_a = float(state.wind_mag.max())
    f0 = state.fuel_initial
    with np.errstate(divide="ignore", invalid="ignore"):
        fuel_frac = np.where(f0 > 0, state.fuel / np.where(f0 > 0, f0, 1.0), 1.0)
    f_fuel = 1.0 - fuel_frac

    sig2 = config.sigma_spread ** 2
    num = np.zeros((n, n))
    den = np.zeros((n, n))
    for dx, dy, d in neighborhood_offsets(config.neighborhood_radius):
        # source cell at (x-dx, y-dy) spreads to target (x, y): bearing is (dx, dy)
        bearing = math.atan2(dy, dx)
        f_adj = (1.0 / (2.0 * sig2)) * math.exp(-(d * d) / (2.0 * sig2))
        if max_a > 0:
            w_par = state.wind_mag * np.cos(np.abs(bearing - state.wind_phase))
            f_wind = 0.5 * (1.0 + w_par / max_a)
        else:
            f_wind = np.full((n, n), 0.5)
        p_cond = np.clip(f_adj * f_fuel * f_wind, 0.0, 1.0)
        w_raw = math.exp(-d * d)

        src_w = np.where(ignited, w_raw, 0.0)
        src_contrib = src_w * p_cond
        # shift source arrays onto target positions
        tgt_w = np.zeros((n, n))
        tgt_c = np.zeros((n, n))
        ys0, ys1 = max(0, dy), min(n, n + dy)
        xs0, xs1 = max(0, dx), min(n, n + dx)
        tgt_w[ys0:ys1, xs0:xs1] = src_w[ys0 - dy:ys1 - dy, xs0 - dx:xs1 - dx]
        tgt_c[ys0:ys1, xs0:xs1] = src_contrib[ys0 - dy:ys1 - dy, xs0 - dx:xs1 - dx]
        den += tgt_w
        num += tgt_c

    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    p[state.ignition != NOT_IGNITED] = 0.0
    p[state.veg_density <= 0] = 0.0
    return p


def burnout_prediction(state: EnvState, config: EnvConfig) -> np.ndarray:
    """Deterministic 1->2 indicator for the next step (noiseless fuel model)."""
    max_a = float(state.wind_mag.max())
    denom = max_a if max_a > 0 else config.a_max
    decay = np.exp(-state.veg_type * (state.wind_mag / denom)) if denom > 0 else np.ones_like(state.wind_mag)
    f_next = state.fuel * decay
    f_ext = config.fuel_extinction_frac * config.rho_base
    return (state.ignition == IGNITED) & (f_next <= f_ext)


def env_step(state: EnvState, config: EnvConfig, rng: np.random.Generator,
             freeze_fire: bool = False) -> None:
    """Advance the environment one step in place.

    Order: sample 0->1 ignitions from the current state, decay fuel of cells
    already burning, burn out exhausted cells, then advance wind and t. With
    freeze_fire=True (static scenario) only wind and t advance.
    """
    n = state.grid_size
    if not freeze_fire:
        burning = state.ignition == IGNITED

        p_map = ignition_probability_map(state, config)
        candidates = np.argwhere(p_map > 0)  # (y, x) rows in fixed row-major order
        for (cy, cx) in candidates:
            if rng.random() < p_map[cy, cx]:
                state.ignition[cy, cx] = IGNITED
                state.ever_ignited[cy, cx] = True

        if burning.any():
            max_a = float(state.wind_mag.max())
            denom = max_a if max_a > 0 else config.a_max
            if denom > 0:
                decay = np.exp(-state.veg_type * (state.wind_mag / denom))
            else:
                decay = np.ones((n, n))
            old_fuel = state.fuel[burning]
            new_fuel = old_fuel * decay[burning]
            noise_std = config.fuel_noise_std_frac * config.rho_base
            if noise_std > 0:
                noise = rng.normal(0.0, noise_std, size=new_fuel.shape)
                new_fuel = new_fuel + noise
            # consumption noise may not refill fuel; fuel stays nonnegative
            new_fuel = np.minimum(new_fuel, old_fuel)
            np.clip(new_fuel, 0.0, None, out=new_fuel)
            state.fuel[burning] = new_fuel

            f_ext = config.fuel_extinction_frac * config.rho_base
            exhausted = burning & (state.fuel <= f_ext)
            state.ignition[exhausted] = BURNT
            state.fuel[exhausted] = 0.0

    state.t += 1
    wind_step(state, config)
