import math

import numpy as np
import pytest

from pyrofront.config import EnvConfig
from pyrofront.env import BURNT
from pyrofront.metrics import (
    coverage_ratio,
    frontline_mask,
    label_batches,
    mia,
    mia_upper_bound,
    time_average_mia,
)
from pyrofront.seeding import rng_stream
from tests.test_env import manual_state


def fire_env(cells, n=16, burnt=()):
    env = manual_state(n, EnvConfig(), cells)
    for (x, y) in burnt:
        env.ignition[y, x] = BURNT
    return env


class TestLabeling:
    def test_diagonal_cells_connected(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = mask[1, 1] = True
        labels, n = label_batches(mask)
        assert n == 1
        assert labels[0, 0] == labels[1, 1] == 1

    def test_separate_batches(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[0, 0] = True
        mask[5, 5] = mask[5, 6] = True
        labels, n = label_batches(mask)
        assert n == 2
        assert labels[5, 5] == labels[5, 6] != labels[0, 0]

    def test_label_relabeling_invariance_of_mia(self):
        # score cannot depend on discovery order: flip the grid and compare
        env = fire_env([(2, 2), (3, 2), (12, 12), (12, 13)])
        flipped = fire_env([(13, 13), (12, 13), (3, 3), (3, 2)])
        m1 = mia(env, 3, 3, 5)
        m2 = mia(flipped, 12, 12, 5)
        assert m1 == pytest.approx(m2)


class TestFrontline:
    def test_interior_cell_not_frontline(self):
        env = fire_env([(x, y) for x in range(4, 9) for y in range(4, 9)])
        front = frontline_mask(env.ignition)
        assert not front[6, 6]  # fully surrounded by ignited cells
        assert front[4, 4]

    def test_burnt_neighbor_counts_as_not_ignited(self):
        env = fire_env([(5, 5), (6, 5)], burnt=[(4, 5)])
        front = frontline_mask(env.ignition)
        assert front[5, 5]


class TestCoverage:
    def test_all_detected(self):
        ever = np.zeros((4, 4), dtype=bool)
        ever[1, 1] = ever[2, 2] = True
        assert coverage_ratio(ever.copy(), ever) == 1.0

    def test_no_fire_convention(self):
        empty = np.zeros((4, 4), dtype=bool)
        assert coverage_ratio(empty, empty) == 1.0

    def test_partial(self):
        ever = np.zeros((4, 4), dtype=bool)
        ever[0, 0] = ever[0, 1] = ever[0, 2] = ever[0, 3] = True
        det = np.zeros((4, 4), dtype=bool)
        det[0, 0] = True
        assert coverage_ratio(det, ever) == pytest.approx(0.25)

    def test_nondecreasing_as_detections_accumulate(self):
        rng = rng_stream(43, 0)
        ever = rng.random((8, 8)) < 0.4
        det = np.zeros((8, 8), dtype=bool)
        prev = coverage_ratio(det, ever)
        for _ in range(30):
            det[rng.integers(0, 8), rng.integers(0, 8)] = True
            cur = coverage_ratio(det, ever)
            assert cur >= prev
            prev = cur


class TestMia:
    def test_derived_single_batch(self):
        # one batch, 4 ignited cells in FOV, nearest frontline at distance 2
        env = fire_env([(8, 6), (8, 7), (9, 6), (9, 7)])
        m = mia(env, 8, 8, 5)
        # d_min: frontline includes (8,7) at distance 1... construct distance 2:
        env2 = fire_env([(8, 10), (8, 11), (9, 10), (9, 11)])
        m2 = mia(env2, 8, 12, 5)
        expected = (5 / math.sqrt(2)) * 4 / 1.0
        assert m == pytest.approx((5 / math.sqrt(2)) * 4 / 1.0)
        assert m2 == pytest.approx((5 / math.sqrt(2)) * 4 / 1.0)

    def test_derived_value_n4_d2(self):
        # hand example: n_b = 4, d_min = 2, l = 5 -> (5/sqrt 2)*2 ~ 7.071
        # a fire column at x=7 seen from (9,6): all 4 cells inside the FOV,
        # all on the frontline, nearest one at exactly distance 2
        env = fire_env([(7, 4), (7, 5), (7, 6), (7, 7)])
        m = mia(env, 9, 6, 5)
        assert m == pytest.approx((5 / math.sqrt(2)) * (4 / 2.0), abs=1e-9)
        assert m == pytest.approx(7.0710678, abs=1e-6)

    def test_bound_attained_when_fov_saturated(self):
        # every FOV cell ignited and d_min clamped to 1 -> l^3/sqrt(2)
        cells = [(x, y) for x in range(16) for y in range(16)]
        env = fire_env(cells)
        m = mia(env, 8, 8, 5)
        assert m == pytest.approx(mia_upper_bound(5))
        assert m == pytest.approx(88.3883, abs=1e-3)

    def test_no_fire_in_fov_zero(self):
        env = fire_env([(0, 0)])
        assert mia(env, 15, 15, 5) == 0.0

    def test_bound_holds_over_random_states(self):
        rng = rng_stream(41, 0)
        bound = mia_upper_bound(5)
        for _ in range(100):
            n_cells = int(rng.integers(0, 40))
            cells = {(int(rng.integers(0, 16)), int(rng.integers(0, 16)))
                     for _ in range(n_cells)}
            env = fire_env(sorted(cells))
            ux, uy = int(rng.integers(0, 16)), int(rng.integers(0, 16))
            m = mia(env, ux, uy, 5)
            assert 0.0 <= m <= bound + 1e-9


class TestTimeAverage:
    def test_constant(self):
        assert time_average_mia([3.5] * 10) == pytest.approx(3.5)

    def test_empty_and_zero(self):
        assert time_average_mia([]) == 0.0
        assert time_average_mia([0.0, 0.0]) == 0.0

    def test_mean(self):
        assert time_average_mia([1.0, 2.0, 3.0]) == pytest.approx(2.0)
