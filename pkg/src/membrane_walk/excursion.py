"""Exact sampling of free-walk excursions between membrane visits.

An excursion leaves the membrane with one normal step, then wanders until
the normal coordinate returns to 0. Off the membrane each step is normal
with probability 1/m, so the excursion is determined by

* ``K``: the number of normal steps, the first-passage time of a simple
  random walk from 1 to 0 (``K = 2J + 1`` with ``P(J >= j) = C(2j, j) / 4^j``),
* ``G``: the number of tangential steps, negative binomial with ``K``
  successes at rate ``1/m``,
* the tangential displacement, a sum of ``G`` uniform unit steps in the
  ``m - 1`` tangential directions.

The first-passage time has infinite mean, so stepping through excursions one
lattice move at a time has unbounded cost; this sampler draws each of the
three pieces from its exact law instead.
"""
from __future__ import annotations

import numpy as np
from scipy.special import betaln

_LOG_PI = float(np.log(np.pi))
_J_MAX = 2.0**61


def _log_tail(j: np.ndarray) -> np.ndarray:
    """log P(J >= j) = log(C(2j, j) / 4^j)."""
    return betaln(j + 0.5, 0.5) - _LOG_PI


def sample_return_jumps(rng: np.random.Generator, size: int) -> np.ndarray:
    """Normal-step counts of first passage from 1 to 0 (odd integers)."""
    u = 1.0 - rng.random(size)  # in (0, 1]
    log_u = np.log(u)
    j = np.floor(np.maximum(1.0 / (np.pi * u * u) - 0.25, 0.0))
    j = np.minimum(j, _J_MAX)
    # J = max{j : P(J >= j) >= u}; the closed-form guess is off by at most a few
    for _ in range(64):
        up = (j < _J_MAX) & (_log_tail(j + 1.0) >= log_u)
        down = (j > 0) & (_log_tail(j) < log_u)
        if not (up.any() or down.any()):
            break
        j = j + up - down
    return (2 * j.astype(np.int64) + 1)


def split_among(rng: np.random.Generator, counts: np.ndarray, d: int) -> np.ndarray:
    """Uniform multinomial split of each count over ``d`` directions."""
    counts = np.asarray(counts, dtype=np.int64)
    out = np.empty(counts.shape + (d,), dtype=np.int64)
    remaining = counts.copy()
    for l in range(d - 1):
        take = rng.binomial(remaining, 1.0 / (d - l))
        out[..., l] = take
        remaining -= take
    out[..., d - 1] = remaining
    return out


def symmetric_displacement(rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
    """Sum of ``counts`` independent +-1 steps."""
    counts = np.asarray(counts, dtype=np.int64)
    return 2 * rng.binomial(counts, 0.5) - counts


def sample_excursions(m: int, size: int, rng: np.random.Generator):
    """Draw ``size`` excursions of the free walk in dimension ``m``.

    Returns ``(durations, displacements)``: the number of steps from leaving
    the membrane to the next arrival (departure step included) and the
    tangential displacement, an integer array of shape ``(size, m - 1)``.
    """
    k = sample_return_jumps(rng, size)
    g = rng.negative_binomial(k, 1.0 / m)
    per_axis = split_among(rng, g, m - 1)
    dy = symmetric_displacement(rng, per_axis)
    return 1 + k + g, dy
