import numpy as np
import pytest
from scipy import stats

from membrane_walk.excursion import (sample_excursions, sample_return_jumps, split_among,
                                     symmetric_displacement)
from membrane_walk.walk import compile_model, origin, run_ensemble, simulate
from membrane_walk.membrane import transparent

N = 400_000


def rng(seed=0):
    return np.random.default_rng(seed)


def test_return_jumps_law():
    k = sample_return_jumps(rng(1), N)
    assert np.all(k % 2 == 1)
    se = np.sqrt(0.25 / N)
    assert abs(np.mean(k == 1) - 0.5) <= 3 * se
    assert abs(np.mean(k == 3) - 0.125) <= 3 * np.sqrt(0.125 * 0.875 / N)
    # P(K >= 2j+1) = C(2j, j)/4^j ~ 1/sqrt(pi j)
    j = 50
    tail = float(np.exp(stats.binom.logpmf(j, 2 * j, 0.5)))
    p = np.mean(k >= 2 * j + 1)
    assert abs(p - tail) <= 3 * np.sqrt(tail * (1 - tail) / N)


def test_return_jumps_extreme_uniforms():
    class Fixed:
        def __init__(self, u):
            self.u = np.asarray(u)

        def random(self, size):
            return self.u

    k = sample_return_jumps(Fixed([0.0, 1 - 2**-53, 0.5]), 3)
    # draws are mapped to u = 1 - draw in (0, 1]
    assert k[0] == 1 and k[1] > 10**9 and k[1] % 2 == 1 and k[2] in (1, 3)


def test_split_and_displacement():
    counts = np.full(N, 7)
    parts = split_among(rng(2), counts, 3)
    assert np.all(parts.sum(axis=1) == 7)
    assert parts.mean(axis=0) == pytest.approx([7 / 3] * 3, abs=0.02)
    d = symmetric_displacement(rng(3), counts)
    assert np.all((d - 7) % 2 == 0) and np.all(np.abs(d) <= 7)
    assert abs(d.mean()) <= 3 * np.sqrt(7 / N)


@pytest.mark.parametrize("m", [2, 3])
def test_excursion_law(m):
    dur, dy = sample_excursions(m, N, rng(4))
    assert dy.shape == (N, m - 1)
    p2 = 1 / (2 * m)
    assert abs(np.mean(dur == 2) - p2) <= 3 * np.sqrt(p2 * (1 - p2) / N)
    assert np.all(dur >= 2)
    assert np.all(np.abs(dy).sum(axis=1) <= dur - 2)


def test_matches_walk_engine_inter_visit_times():
    """Inter-visit times and tangential displacements of the walk vs the exact sampler."""
    steps = 2_000_000
    tr = simulate(transparent(), steps, seed=11, start=origin(2))
    tau = tr.visit_tau
    gaps = np.diff(tau)
    dys = np.diff(tr.visit_y[:, 0])
    dur, dy = sample_excursions(2, gaps.size * 4, rng(5))
    # durations are heavy tailed; compare the law on a bounded window
    for cut in (2, 4, 10, 50):
        a, b = np.mean(gaps <= cut), np.mean(dur <= cut)
        se = np.sqrt(a * (1 - a) / gaps.size + b * (1 - b) / dur.size)
        assert abs(a - b) <= 3.5 * se
    for cut in (-3, 0, 2):
        a, b = np.mean(dys <= cut), np.mean(dy[:, 0] <= cut)
        se = np.sqrt(a * (1 - a) / dys.size + b * (1 - b) / dur.size)
        assert abs(a - b) <= 3.5 * se
