"""Class-to-class hitting distribution of the membrane for the free walk.

``H[j, j']`` is the probability that the symmetric walk started at distance
one from the membrane, with tangential class ``j``, first reaches the
membrane in class ``j'``. By translation invariance it only depends on
``(j' - j) mod periods``; by symmetry of the steps it is the same from
either side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BadDimension, BadPeriod, BudgetTooSmall
from .excursion import sample_excursions
from .membrane import all_classes, n_classes

ORACLE_TOLERANCE = 1e-3


@dataclass(frozen=True, eq=False)
class HittingKernel:
    m: int
    periods: tuple
    matrix: np.ndarray
    method: str = "fourier"
    error_bound: float = 0.0
    stderr: np.ndarray | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        return {"m": self.m, "periods": list(self.periods), "method": self.method,
                "error_bound": self.error_bound, "matrix": self.matrix.tolist()}


def _check(m: int, periods: Sequence[int]) -> tuple:
    if m < 2:
        raise BadDimension(f"dimension m={m} must be at least 2")
    periods = tuple(int(k) for k in periods)
    if len(periods) != m - 1:
        raise BadDimension(f"expected {m - 1} periods, got {len(periods)}")
    if any(k < 1 for k in periods):
        raise BadPeriod(f"periods {periods} must be >= 1")
    return periods


def decay_root(theta, m: int) -> float:
    """Root in (0, 1] of ``lam + 1/lam = 2 (m - sum cos theta)``.

    ``lam**x`` is the characteristic function, at frequency ``theta``, of the
    tangential displacement accumulated before hitting the membrane from
    distance ``x``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    s = m - np.cos(theta).sum(axis=-1)
    if np.ndim(s) == 0:
        s = float(s)
    # 1 / (s + sqrt(s^2 - 1)) avoids cancellation near s = 1
    return 1.0 / (s + np.sqrt(np.maximum(s * s - 1.0, 0.0)))


def _circulant_differences(periods: tuple) -> np.ndarray:
    classes = np.array(all_classes(periods), dtype=np.int64).reshape(-1, len(periods))
    k = np.asarray(periods, dtype=np.int64)
    return (classes[None, :, :] - classes[:, None, :]) % k  # [j, j'] -> (j' - j) mod k


def hitting_kernel(m: int, periods: Sequence[int]) -> HittingKernel:
    """Exact kernel by summing the characters of the periodic cell."""
    periods = _check(m, periods)
    k = np.asarray(periods, dtype=float)
    duals = np.array(all_classes(periods), dtype=float).reshape(-1, len(periods))
    thetas = 2.0 * np.pi * duals / k
    lam = np.array([decay_root(t, m) for t in thetas])
    diff = _circulant_differences(periods)
    nU = n_classes(periods)
    H = np.empty((nU, nU))
    for a in range(nU):
        for b in range(nU):
            phase = thetas @ diff[a, b]
            H[a, b] = np.dot(lam, np.cos(phase)) / nU
    H = 0.5 * (H + H.T)
    H = np.clip(H, 0.0, None)
    H /= H.sum(axis=1, keepdims=True)
    return HittingKernel(m=m, periods=periods, matrix=H, method="fourier")


def _neighbour_index(periods: tuple) -> np.ndarray:
    """``nb[j, 2l + s]``: linear class after a tangential unit step."""
    classes = np.array(all_classes(periods), dtype=np.int64).reshape(-1, len(periods))
    k = np.asarray(periods, dtype=np.int64)
    mult = np.ones(len(periods), dtype=np.int64)
    for i in range(len(periods) - 2, -1, -1):
        mult[i] = mult[i + 1] * k[i + 1]
    nb = np.empty((classes.shape[0], 2 * len(periods)), dtype=np.int64)
    for l in range(len(periods)):
        for s, step in enumerate((1, -1)):
            moved = classes.copy()
            moved[:, l] = (moved[:, l] + step) % k[l]
            nb[:, 2 * l + s] = moved @ mult
    return nb


def _truncated_solve(m: int, periods: tuple, x_max: int) -> HittingKernel:
    if x_max < 2:
        raise BudgetTooSmall(f"truncation width {x_max} must be at least 2")
    nU = n_classes(periods)
    nb = _neighbour_index(periods)
    w = 1.0 / (2 * m)
    interior = x_max - 1
    size = interior * nU

    rows, cols, vals = [], [], []
    for xi in range(interior):
        base = xi * nU
        for j in range(nU):
            r = base + j
            rows.append(r); cols.append(r); vals.append(1.0)
            for c in nb[j]:
                rows.append(r); cols.append(base + c); vals.append(-w)
            if xi > 0:
                rows.append(r); cols.append(r - nU); vals.append(-w)
            if xi < interior - 1:
                rows.append(r); cols.append(r + nU); vals.append(-w)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(size, size))

    # columns 0..nU-1: hit class j' (far wall redistributed uniformly); last: far-wall mass
    rhs = np.zeros((size, nU + 1))
    for j in range(nU):
        rhs[j, j] += w
    far = (interior - 1) * nU
    rhs[far:far + nU, :nU] += w / nU
    rhs[far:far + nU, nU] += w
    sol = spla.splu(A).solve(rhs)

    H = sol[:nU, :nU].copy()
    absorbed = float(sol[0, nU])
    mid = (max(interior // 2, 1) - 1) * nU
    a_mid = sol[mid:mid + nU, nU][:, None]
    cond_mid = (sol[mid:mid + nU, :nU] - a_mid / nU) / np.maximum(1.0 - a_mid, 1e-300)
    deviation = float(np.abs(cond_mid - 1.0 / nU).max())
    bound = absorbed * deviation
    if bound > ORACLE_TOLERANCE:
        raise BudgetTooSmall(
            f"truncation at x_max={x_max} leaves error bound {bound:.3g} > {ORACLE_TOLERANCE}"
        )
    return HittingKernel(m=m, periods=periods, matrix=H, method="truncated-solve",
                         error_bound=bound,
                         info={"x_max": x_max, "absorbed_mass": absorbed,
                               "midpoint_deviation": deviation})


def _monte_carlo(m: int, periods: tuple, samples: int, seed: int) -> HittingKernel:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    nU = n_classes(periods)
    counts = np.zeros(nU, dtype=np.int64)
    k = np.asarray(periods, dtype=np.int64)
    mult = np.ones(len(periods), dtype=np.int64)
    for i in range(len(periods) - 2, -1, -1):
        mult[i] = mult[i + 1] * k[i + 1]
    chunk = 1 << 18
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        _, dy = sample_excursions(m, size, rng)
        idx = (dy % k) @ mult
        counts += np.bincount(idx, minlength=nU)
        done += size
    row = counts / samples
    diff = _circulant_differences(periods)
    mult_flat = diff @ mult
    H = row[mult_flat]
    se = np.sqrt(row * (1 - row) / samples)[mult_flat]
    return HittingKernel(m=m, periods=periods, matrix=H, method="monte-carlo",
                         error_bound=float(3 * se.max()), stderr=se,
                         info={"samples": samples, "seed": seed})


def hitting_kernel_oracle(m: int, periods: Sequence[int], method: str = "truncated-solve",
                          budget: int = 500, seed: int = 0) -> HittingKernel:
    """Brute-force kernel, independent of the character sum.

    ``truncated-solve`` solves the discrete harmonic system on the strip
    ``1 <= x < budget`` (budget = far-wall distance); ``monte-carlo`` draws
    ``budget`` excursions from distance one and tallies the arrival classes.
    """
    periods = _check(m, periods)
    if n_classes(periods) == 1:
        return HittingKernel(m=m, periods=periods, matrix=np.ones((1, 1)), method=method)
    if method == "truncated-solve":
        return _truncated_solve(m, periods, int(budget))
    if method == "monte-carlo":
        return _monte_carlo(m, periods, int(budget), seed)
    raise ValueError(f"unknown oracle method {method!r}")
