"""Stateless per-site uniforms for random environments (splitmix64 finalizer).

A site's value depends only on ``(seed, y)``, so an i.i.d. environment never
has to be stored and any two lookups of the same site agree.
"""
import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@numba.njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True, nogil=True)
def site_uniform(seed, y):
    h = mix64(np.uint64(seed) + _GOLDEN)
    for i in range(y.shape[0]):
        h = mix64(h ^ (np.uint64(y[i] & 0x7FFFFFFFFFFFFFFF) + np.uint64(i + 1) * _GOLDEN))
        if y[i] < 0:
            h = mix64(h + _GOLDEN)
    return float(h >> _S11) * _INV53


@numba.njit(cache=True, nogil=True)
def site_value(seed, y, values, cum_weights):
    u = site_uniform(seed, y)
    k = values.shape[0] - 1
    for i in range(values.shape[0] - 1):
        if u < cum_weights[i]:
            k = i
            break
    return values[k]


@numba.njit(cache=True, nogil=True)
def site_values(seed, ys, values, cum_weights):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = site_value(seed, ys[i], values, cum_weights)
    return out
