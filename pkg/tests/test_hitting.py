import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from membrane_walk.errors import BudgetTooSmall
from membrane_walk.hitting import decay_root, hitting_kernel, hitting_kernel_oracle

ALPHA = 2 - math.sqrt(2)


def test_decay_root_values():
    assert decay_root((0.0,), 2) == 1.0
    assert decay_root((0.0, 0.0), 3) == 1.0
    assert decay_root((math.pi,), 2) == pytest.approx(3 - 2 * math.sqrt(2), abs=1e-15)
    assert decay_root((math.pi, math.pi), 3) == pytest.approx(5 - math.sqrt(24), abs=1e-15)


@given(st.lists(st.floats(0, 2 * math.pi), min_size=1, max_size=3))
def test_decay_root_solves_quadratic(theta):
    m = len(theta) + 1
    lam = decay_root(theta, m)
    s = m - sum(math.cos(t) for t in theta)
    assert 0 < lam <= 1
    assert lam + 1 / lam == pytest.approx(2 * s, rel=1e-9)


def test_two_periodic_kernel():
    H = hitting_kernel(2, (2,)).matrix
    assert abs(H[0, 0] - ALPHA) <= 1e-12
    assert abs(H[0, 1] - (math.sqrt(2) - 1)) <= 1e-12


def test_single_class():
    assert hitting_kernel(3, (1, 1)).matrix.tolist() == [[1.0]]
    assert hitting_kernel_oracle(2, (1,), budget=3).matrix.tolist() == [[1.0]]


@pytest.mark.parametrize("m,periods", [(2, (3,)), (2, (5,)), (3, (2, 3)), (3, (3, 4)), (4, (2, 2, 3))])
def test_kernel_invariants(m, periods):
    H = hitting_kernel(m, periods).matrix
    assert np.abs(H.sum(axis=1) - 1).max() <= 1e-12
    assert H.min() >= 0
    assert np.abs(H - H.T).max() <= 1e-14
    # circulant: row j is row 0 shifted by j
    classes = np.array(np.unravel_index(np.arange(H.shape[0]), periods)).T
    k = np.array(periods)
    for j in range(H.shape[0]):
        shifted = np.ravel_multi_index(((classes + classes[j]) % k).T, periods)
        assert np.abs(H[j, shifted] - H[0]).max() <= 1e-14


@pytest.mark.parametrize("m,periods", [(2, (2,)), (2, (3,)), (2, (12,)), (3, (2, 2)), (3, (3, 4)),
                                       (4, (2, 3, 2))])
def test_truncated_oracle_agrees(m, periods):
    oracle = hitting_kernel_oracle(m, periods, method="truncated-solve", budget=500)
    assert np.abs(oracle.matrix - hitting_kernel(m, periods).matrix).max() <= 1e-6
    assert oracle.error_bound <= 1e-3


def test_truncated_oracle_x200():
    oracle = hitting_kernel_oracle(2, (2,), method="truncated-solve", budget=200)
    assert abs(oracle.matrix[0, 0] - ALPHA) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=2))
def test_oracle_agreement_property(periods):
    m = len(periods) + 1
    oracle = hitting_kernel_oracle(m, periods, budget=200)
    assert np.abs(oracle.matrix - hitting_kernel(m, periods).matrix).max() <= 1e-6


def test_budget_too_small():
    with pytest.raises(BudgetTooSmall):
        hitting_kernel_oracle(2, (2,), method="truncated-solve", budget=3)


def test_monte_carlo_oracle():
    t = time.time()
    oracle = hitting_kernel_oracle(2, (2,), method="monte-carlo", budget=10**6, seed=3)
    assert time.time() - t < 30
    se = math.sqrt(ALPHA * (1 - ALPHA) / 10**6)
    assert abs(oracle.matrix[0, 0] - ALPHA) <= 3 * se
    assert oracle.stderr[0, 0] == pytest.approx(se, rel=1e-2)


def test_monte_carlo_oracle_periods_3():
    oracle = hitting_kernel_oracle(2, (3,), method="monte-carlo", budget=2 * 10**5, seed=5)
    H = hitting_kernel(2, (3,)).matrix
    assert np.all(np.abs(oracle.matrix - H) <= 3 * oracle.stderr + 1e-12)
