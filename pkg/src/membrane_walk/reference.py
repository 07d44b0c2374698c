"""Limit objects: skew Brownian motion, its slid companion, and related laws.

Skew Brownian paths are produced by the scaled perturbed walk: a simple
random walk that, at 0, steps right with probability ``(1 + gamma) / 2``.
Its local time is the number of departures from 0 divided by ``sqrt(N)``,
normalized so that ``X = W + gamma * L``; for ``gamma = 0`` it is the
symmetric local time of Brownian motion, ``E L(1) = sqrt(2 / pi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate, special, stats

from .errors import BadWeights, InversionNotConverged

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class SkewParams:
    gamma: float
    slide: tuple
    m: int

    def __post_init__(self):
        if not -1.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma={self.gamma} outside [-1, 1]")
        object.__setattr__(self, "slide", tuple(float(c) for c in np.atleast_1d(self.slide)))
        if len(self.slide) != self.m - 1:
            raise ValueError(f"slide needs {self.m - 1} coordinates")


@dataclass(frozen=True, eq=False)
class ReferencePath:
    t: np.ndarray
    x: np.ndarray
    local_time: np.ndarray
    y: np.ndarray | None = None


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not -1.0 <= gamma <= 1.0:
        raise ValueError(f"gamma={gamma} outside [-1, 1]")
    return gamma


def skew_marginal_density(gamma: float, t: float, x):
    """Density at time ``t`` of skew Brownian motion started at 0."""
    gamma = _check_gamma(gamma)
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    phi = stats.norm.pdf(x, scale=math.sqrt(t))
    return np.where(x > 0, (1 + gamma) * phi, (1 - gamma) * phi)


def skew_marginal_cdf(gamma: float, t: float, x):
    gamma = _check_gamma(gamma)
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    F = stats.norm.cdf(x, scale=math.sqrt(t))
    return np.where(x < 0, (1 - gamma) * F, (1 - gamma) / 2 + (1 + gamma) * (F - 0.5))


def half_normal_cdf(r, t: float = 1.0):
    """Law of ``|N(0, t)|``."""
    r = np.asarray(r, dtype=float)
    return np.where(r > 0, 2 * stats.norm.cdf(r, scale=math.sqrt(t)) - 1, 0.0)


@numba.njit(cache=True, nogil=True)
def _skew_walk(us, p_right, x, visits):
    """Advance one perturbed walk; ``x`` and ``visits`` are running arrays of length len(us)+1."""
    s = 0
    v = 0
    for k in range(us.shape[0]):
        if s == 0:
            v += 1
            s = 1 if us[k] < p_right else -1
        else:
            s += 1 if us[k] < 0.5 else -1
        x[k + 1] = s
        visits[k + 1] = v


@numba.njit(cache=True, nogil=True)
def _skew_endpoints(U, p_right, out_x, out_v):
    x = np.zeros(U.shape[1] + 1, dtype=np.int64)
    v = np.zeros(U.shape[1] + 1, dtype=np.int64)
    for p in range(U.shape[0]):
        _skew_walk(U[p], p_right, x, v)
        out_x[p] = x[-1]
        out_v[p] = v[-1]


def skew_path_sample(gamma: float, steps: int, rng: np.random.Generator) -> ReferencePath:
    """Skew Brownian path on ``[0, 1]`` from an ``N``-step perturbed walk."""
    gamma = _check_gamma(gamma)
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x = np.zeros(steps + 1, dtype=np.int64)
    v = np.zeros(steps + 1, dtype=np.int64)
    _skew_walk(rng.random(steps), (1 + gamma) / 2, x, v)
    r = math.sqrt(steps)
    return ReferencePath(t=np.arange(steps + 1) / steps, x=x / r, local_time=v / r)


def skew_endpoint_sample(gamma: float, steps: int, paths: int, rng: np.random.Generator,
                         block: int = 1 << 22) -> tuple:
    """Endpoints ``(X(1), L(1))`` of ``paths`` independent scaled perturbed walks."""
    gamma = _check_gamma(gamma)
    steps, paths = int(steps), int(paths)
    out_x = np.empty(paths, dtype=np.int64)
    out_v = np.empty(paths, dtype=np.int64)
    rows = max(1, block // steps)
    for a in range(0, paths, rows):
        b = min(a + rows, paths)
        _skew_endpoints(rng.random((b - a, steps)), (1 + gamma) / 2, out_x[a:b], out_v[a:b])
    r = math.sqrt(steps)
    return out_x / r, out_v / r


def expected_visits(steps: int) -> float:
    """Exact mean number of departures from 0 in ``steps`` steps of the perturbed walk.

    Visits to 0 do not depend on ``gamma`` (``|S|`` is a reflected simple walk),
    so the mean is ``sum_{j <= J} C(2j, j) / 4^j = (2J + 1) C(2J, J) / 4^J`` with
    ``J = floor((steps - 1) / 2)``.
    """
    steps = int(steps)
    if steps < 1:
        return 0.0
    J = (steps - 1) // 2
    return float((2 * J + 1) * math.exp(special.gammaln(2 * J + 1) - 2 * special.gammaln(J + 1) - 2 * J * math.log(2)))


def slide_path(c, reference: ReferencePath, rng: np.random.Generator, noise: bool = True) -> np.ndarray:
    """``y(t) = c L(t) + W_Y(t)`` on the reference grid; ``noise=False`` freezes ``W_Y`` at 0."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    t = reference.t
    drift = reference.local_time[:, None] * c[None, :]
    if not noise:
        return drift
    dt = np.diff(t)
    inc = rng.standard_normal((dt.size, c.size)) * np.sqrt(dt)[:, None]
    w = np.vstack([np.zeros((1, c.size)), np.cumsum(inc, axis=0)])
    return drift + w


def cauchy_cdf(x, scale: float):
    return 0.5 + np.arctan(np.asarray(x, dtype=float) / scale) / math.pi


def stable_scale(m: int) -> float:
    """Scale of the isotropic 1-stable law with characteristic function ``exp(-|u| / sqrt(m))``."""
    return 1.0 / math.sqrt(m)


def multivariate_cauchy_density(x, scale: float):
    """Closed-form density of the isotropic Cauchy law on ``R^d`` (rows of ``x``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[1]
    r2 = (x * x).sum(axis=1)
    k = math.exp(special.gammaln((d + 1) / 2) - (d + 1) / 2 * math.log(math.pi))
    return k * scale / (scale**2 + r2) ** ((d + 1) / 2)


def stable_hit_density(m: int, x, scale: float | None = None, limit: int = 200,
                       tol: float = 1e-10):
    """Density of the isotropic 1-stable law on ``R^{m-1}`` with char. function ``exp(-s|u|)``.

    ``s`` defaults to ``1 / sqrt(m)``. For ``m = 2`` the Cauchy closed form is
    used; for ``m > 2`` the radial profile is obtained by inverting the
    characteristic function with a Hankel transform (adaptive quadrature with
    ``limit`` subintervals).
    """
    m = int(m)
    if m < 2:
        raise ValueError("m must be at least 2")
    s = stable_scale(m) if scale is None else float(scale)
    if m == 2:
        x = np.asarray(x, dtype=float)
        return s / (math.pi * (s * s + x * x))
    d = m - 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != d:
        raise ValueError(f"points must have {d} coordinates")
    nu = d / 2 - 1
    norm = 1.0 / (2 * math.pi) ** (d / 2)
    out = np.empty(x.shape[0])
    for i, r in enumerate(np.sqrt((x * x).sum(axis=1))):
        if r == 0.0:
            # J_nu(kr) (kr)^{-nu} -> 2^{-nu} / Gamma(nu + 1) as r -> 0
            f = lambda k: math.exp(-s * k) * k ** (d - 1)
            scale_r = norm * 2.0 ** (-nu) / math.gamma(nu + 1)
        else:
            f = lambda k, r=r: math.exp(-s * k) * special.jv(nu, k * r) * k ** (d / 2)
            scale_r = norm * r ** (-nu)
        res = integrate.quad(f, 0, np.inf, limit=limit, full_output=1)
        val, err = res[0] * scale_r, res[1] * scale_r
        if len(res) > 3 or not np.isfinite(val) or err > max(tol, 1e-6 * abs(val)):
            raise InversionNotConverged(
                f"characteristic-function inversion at |x|={r:.6g} did not converge "
                f"with {limit} subintervals (error estimate {err:.3g})"
            )
        out[i] = val
    return out


def walsh_marginal_sample(weights, t: float, rng: np.random.Generator, size: int = 1) -> tuple:
    """Position at time ``t`` of Walsh Brownian motion from 0: ``(ray index, radius)``."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise BadWeights("ray weights must be positive and sum to 1")
    if t <= 0:
        raise ValueError("t must be positive")
    rays = rng.choice(w.size, size=size, p=w / w.sum())
    radius = np.abs(rng.standard_normal(size)) * math.sqrt(t)
    return rays, radius


def collapse_walsh(rays, radius, positive_rays) -> np.ndarray:
    """Signed value: ``+radius`` on rays in ``positive_rays``, ``-radius`` elsewhere."""
    sign = np.where(np.isin(rays, list(positive_rays)), 1.0, -1.0)
    return sign * np.asarray(radius, dtype=float)
