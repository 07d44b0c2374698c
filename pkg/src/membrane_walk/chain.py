"""Embedded chain of membrane arrivals, its stationary law, permeability and slide.

The chain lives on ``(arrival side, class)`` pairs, ordered
``(L, class 0), ..., (L, class |U|-1), (R, class 0), ...``. A kernel move
``(exit, slide, q)`` taken from ``(side, j)`` puts the walker at distance one
on the ``exit`` side in class ``j + slide``; the free walk then carries it to
the membrane with the hitting kernel, and it arrives on the ``exit`` side.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import KernelMismatch, NotIrreducible
from .hitting import HittingKernel, hitting_kernel
from .membrane import SIDES, ValidatedMembrane, all_classes, class_index, validate

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EmbeddedChain:
    membrane: ValidatedMembrane
    hitting: HittingKernel
    states: list
    P: np.ndarray
    pi: np.ndarray
    gamma: float
    slide: np.ndarray
    ray_weights: np.ndarray = field(repr=False)

    @property
    def n_classes(self) -> int:
        return self.membrane.n_classes

    def pi_by_side(self) -> np.ndarray:
        """Stationary law reshaped to ``(2, |U|)``, row 0 for L and row 1 for R."""
        return self.pi.reshape(2, -1)

    def to_dict(self) -> dict:
        return {
            "membrane": self.membrane.name,
            "m": self.membrane.m,
            "periods": list(self.membrane.periods),
            "states": [[s, list(c)] for s, c in self.states],
            "H": self.hitting.matrix.tolist(),
            "P": self.P.tolist(),
            "pi": self.pi.tolist(),
            "gamma": self.gamma,
            "c": self.slide.tolist(),
        }


def chain_states(membrane: ValidatedMembrane) -> list:
    return [(side, cls) for side in SIDES for cls in all_classes(membrane.periods)]


def build_transition_matrix(membrane, H: HittingKernel) -> np.ndarray:
    membrane = validate(membrane)
    if tuple(H.periods) != tuple(membrane.periods) or H.m != membrane.m:
        raise KernelMismatch(
            f"hitting kernel for m={H.m}, periods={H.periods} does not match "
            f"membrane m={membrane.m}, periods={membrane.periods}"
        )
    nU = membrane.n_classes
    k = np.asarray(membrane.periods, dtype=np.int64)
    P = np.zeros((2 * nU, 2 * nU))
    for si, side in enumerate(SIDES):
        for ci, cls in enumerate(all_classes(membrane.periods)):
            row = si * nU + ci
            for mv in membrane.moves(side, cls):
                landed = tuple((np.asarray(cls) + np.asarray(mv.slide)) % k)
                ei = SIDES.index(mv.exit)
                P[row, ei * nU:(ei + 1) * nU] += mv.prob * H.matrix[class_index(landed, membrane.periods)]
    return P


def _closed_classes(P: np.ndarray) -> list:
    support = csr_matrix(P > 0)
    n_comp, labels = connected_components(support, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        leaves = (P[np.ix_(members, np.flatnonzero(labels != c))] > 0).any()
        if not leaves:
            closed.append(members)
    return closed


def stationary(P: np.ndarray, states=None) -> np.ndarray:
    """Unique stationary law of ``P`` by a dense solve.

    A single closed class is required; transient states get zero mass. Two or
    more closed classes make the stationary law non-unique and raise
    :class:`NotIrreducible`.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if np.abs(P.sum(axis=1) - 1.0).max() > STOCHASTIC_TOL or (P < 0).any():
        raise ValueError("transition matrix is not row-stochastic")
    closed = _closed_classes(P)
    if len(closed) != 1:
        named = [[states[i] if states is not None else int(i) for i in c] for c in closed]
        raise NotIrreducible(
            f"embedded chain has {len(closed)} closed classes: {named}", closed_classes=named
        )
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi[np.abs(pi) < 1e-300] = 0.0
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def stationary_power(P: np.ndarray, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Cross-check by iterating the lazy chain ``(I + P) / 2`` (aperiodic)."""
    P = np.asarray(P, dtype=float)
    Q = 0.5 * (np.eye(P.shape[0]) + P)
    pi = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(max_iter):
        nxt = pi @ Q
        if np.abs(nxt - pi).max() < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise RuntimeError("power iteration did not converge")


def effective_permeability(pi: np.ndarray) -> float:
    by_side = np.asarray(pi).reshape(2, -1)
    return float(by_side[1].sum() - by_side[0].sum())


def effective_slide(pi: np.ndarray, membrane) -> np.ndarray:
    membrane = validate(membrane)
    alpha = membrane.mean_slides()  # (2, |U|, m-1)
    return np.einsum("sj,sjd->d", np.asarray(pi).reshape(2, -1), alpha)


def ray_weights(pi: np.ndarray, membrane) -> np.ndarray:
    """Stationary weights of excursion types ``(arrival class, exit sign)``.

    Entry ``[j, 0]`` is the long-run share of excursions started from class
    ``j`` towards ``x < 0``, ``[j, 1]`` towards ``x > 0``.
    """
    membrane = validate(membrane)
    nU = membrane.n_classes
    by_side = np.asarray(pi).reshape(2, nU)
    w = np.zeros((nU, 2))
    for si, side in enumerate(SIDES):
        for ci, cls in enumerate(all_classes(membrane.periods)):
            for mv in membrane.moves(side, cls):
                w[ci, SIDES.index(mv.exit)] += by_side[si, ci] * mv.prob
    return w


def analyze(membrane, H: HittingKernel | None = None) -> EmbeddedChain:
    """Full exact pipeline: hitting kernel, embedded chain, pi, gamma and c."""
    membrane = validate(membrane)
    if H is None:
        H = hitting_kernel(membrane.m, membrane.periods)
    P = build_transition_matrix(membrane, H)
    states = chain_states(membrane)
    pi = stationary(P, states)
    return EmbeddedChain(
        membrane=membrane, hitting=H, states=states, P=P, pi=pi,
        gamma=effective_permeability(pi), slide=effective_slide(pi, membrane),
        ray_weights=ray_weights(pi, membrane),
    )


def fig1a_closed_forms(p: float) -> dict:
    """Closed forms for the two-periodic example membrane.

    The returned ``c`` is the reference closed-form expression, kept for comparison with
    the pipeline value; it does not weight the left-side slides by their
    probabilities.
    """
    a = 2.0 - np.sqrt(2.0)
    P = np.array([
        [(1 - p) * (1 - a), (1 - p) * a, p * a, p * (1 - a)],
        [p * a, p * (1 - a), (1 - p) * (1 - a), (1 - p) * a],
        [0.0, 0.0, a, 1 - a],
        [1 - a, a, 0.0, 0.0],
    ])
    D = (1 - a) * (2 * a + 1) + (2 * a - 1) * p**2
    pi = np.array([
        (1 - a) * (1 - a + (2 * a - 1) * p),
        (1 - a) * a,
        a * (1 - a + (2 * a - 1) * p**2),
        (1 - a) * (a - (2 * a - 1) * (1 - p) * p),
    ]) / D
    gamma = (2 * a - 1) * (a * (2 * p - 1) + (p - 1) ** 2) / D
    c = -(1 - a) * ((2 * a - 1) * p + 1) / D
    return {"alpha": a, "P": P, "pi": pi, "gamma": gamma, "c": np.array([c])}
