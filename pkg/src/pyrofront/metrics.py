"""Evaluation criteria: fire coverage ratio and Monitored Ignited Area (MIA).

MIA for one step: (l_FoV / sqrt(2)) * mean over fire batches intersecting the
FOV of n_b / d_min_b, where n_b counts the batch's ignited cells inside the
FOV and d_min_b is the UAV's distance to the batch's nearest frontline cell
(clamped to >= 1 so the l^3/sqrt(2) bound is attainable and finite).
"""

from __future__ import annotations

import math

import numpy as np

from .env import IGNITED, EnvState
from .uav import fov_bounds

_NEIGHBORS8 = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
               if (dx, dy) != (0, 0)]


def label_batches(ignited: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels of the ignited mask (0 = background)."""
    n_rows, n_cols = ignited.shape
    labels = np.zeros(ignited.shape, dtype=int)
    current = 0
    for sy in range(n_rows):
        for sx in range(n_cols):
            if not ignited[sy, sx] or labels[sy, sx]:
                continue
            current += 1
            stack = [(sx, sy)]
            labels[sy, sx] = current
            while stack:
                x, y = stack.pop()
                for dx, dy in _NEIGHBORS8:
                    nx, ny = x + dx, y + dy
                    if (0 <= nx < n_cols and 0 <= ny < n_rows
                            and ignited[ny, nx] and not labels[ny, nx]):
                        labels[ny, nx] = current
                        stack.append((nx, ny))
    return labels, current


def frontline_mask(ignition: np.ndarray) -> np.ndarray:
    """Ignited cells with at least one in-grid not-ignited 8-neighbor."""
    ignited = ignition == IGNITED
    not_ignited = ~ignited
    out = np.zeros_like(ignited)
    n_rows, n_cols = ignited.shape
    for dx, dy in _NEIGHBORS8:
        shifted = np.zeros_like(ignited)
        ys0, ys1 = max(0, dy), min(n_rows, n_rows + dy)
        xs0, xs1 = max(0, dx), min(n_cols, n_cols + dx)
        shifted[ys0:ys1, xs0:xs1] = not_ignited[ys0 - dy:ys1 - dy, xs0 - dx:xs1 - dx]
        out |= shifted
    return out & ignited


def coverage_ratio(detected: np.ndarray, ever_ignited: np.ndarray) -> float:
    """Fraction of ever-ignited cells detected while ignited; 1.0 if no fire."""
    n_tot = int(np.count_nonzero(ever_ignited))
    if n_tot == 0:
        return 1.0
    n_det = int(np.count_nonzero(detected & ever_ignited))
    return n_det / n_tot


def mia(env: EnvState, uav_x: int, uav_y: int, fov_side: int) -> float:
    """Monitored-ignited-area score for the current step; 0 with no batch in FOV."""
    ignited = env.ignition == IGNITED
    if not ignited.any():
        return 0.0
    x0, y0, x1, y1 = fov_bounds(uav_x, uav_y, fov_side, env.grid_size)
    fov_mask = np.zeros_like(ignited)
    fov_mask[y0:y1, x0:x1] = True
    if not (ignited & fov_mask).any():
        return 0.0

    labels, n_labels = label_batches(ignited)
    front = frontline_mask(env.ignition)
    scores = []
    for lab in range(1, n_labels + 1):
        batch = labels == lab
        n_b = int(np.count_nonzero(batch & fov_mask))
        if n_b == 0:
            continue
        ref = batch & front
        if not ref.any():
            ref = batch  # a batch with no boundary (grid fully ignited)
        ys, xs = np.nonzero(ref)
        d_min = float(np.min(np.hypot(xs - uav_x, ys - uav_y)))
        scores.append(n_b / max(1.0, d_min))
    if not scores:
        return 0.0
    return (fov_side / math.sqrt(2.0)) * float(np.mean(scores))


def mia_upper_bound(fov_side: int) -> float:
    return fov_side ** 3 / math.sqrt(2.0)


def time_average_mia(step_mias) -> float:
    vals = list(step_mias)
    if not vals:
        return 0.0
    return float(np.mean(vals))
