"""Membrane definitions, periodic class arithmetic and one-sided environments.

A two-sided membrane is described by a kernel indexed by the *arrival* side
(``"L"`` means the walker came from ``x = -1`` and sits at ``-0``, ``"R"``
means it came from ``x = +1`` and sits at ``+0``) and by the class of its
tangential position modulo the periods. Each kernel entry is a finite list of
moves ``(exit, slide, prob)``; the walker leaves to ``x = -1`` or ``x = +1``
and its tangential coordinate is shifted by ``slide``.
"""
from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import _hashing
from .errors import (
    BadDimension,
    BadPeriod,
    DimensionMismatch,
    EmptyKernelEntry,
    InvalidMove,
    ProbabilitySumError,
    SpecError,
    UnknownBuiltin,
)

L = "L"
R = "R"
SIDES = (L, R)
PROB_TOL = 1e-12


class Move(NamedTuple):
    exit: str
    slide: tuple
    prob: float


# ---------------------------------------------------------------------------
# class arithmetic
# ---------------------------------------------------------------------------


def n_classes(periods: Sequence[int]) -> int:
    return int(np.prod(periods, dtype=np.int64)) if len(periods) else 1


def class_of(y: Sequence[int], periods: Sequence[int]) -> tuple:
    """Nonnegative residue of ``y`` modulo ``periods``, componentwise."""
    if len(y) != len(periods):
        raise DimensionMismatch(f"y has {len(y)} coordinates, periods has {len(periods)}")
    return tuple(int(yi) % int(k) for yi, k in zip(y, periods))


def class_index(cls: Sequence[int], periods: Sequence[int]) -> int:
    """Row-major linear index of a class tuple (last coordinate fastest)."""
    if len(cls) != len(periods):
        raise DimensionMismatch(f"class has {len(cls)} coordinates, periods has {len(periods)}")
    idx = 0
    for j, k in zip(cls, periods):
        if not 0 <= j < k:
            raise DimensionMismatch(f"class coordinate {j} outside [0, {k})")
        idx = idx * k + int(j)
    return idx


def class_tuple(index: int, periods: Sequence[int]) -> tuple:
    if not 0 <= index < n_classes(periods):
        raise DimensionMismatch(f"class index {index} outside [0, {n_classes(periods)})")
    out = []
    for k in reversed(periods):
        out.append(index % k)
        index //= k
    return tuple(reversed(out))


def all_classes(periods: Sequence[int]) -> list:
    """Every class tuple of the periodic cell, in linear-index order."""
    return [tuple(c) for c in itertools.product(*(range(k) for k in periods))]


# ---------------------------------------------------------------------------
# two-sided membranes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MembraneSpec:
    m: int
    periods: tuple
    kernel: Mapping
    name: str = "custom"


@dataclass(frozen=True, eq=False)
class ValidatedMembrane:
    """Immutable, checked membrane with flat arrays for the simulation kernel.

    Entry ``e = side_index * |U| + class_index`` owns moves
    ``entry_ptr[e]:entry_ptr[e + 1]``; ``side_index`` is 0 for L and 1 for R.
    """

    spec: MembraneSpec
    entry_ptr: np.ndarray
    move_exit: np.ndarray
    move_slide: np.ndarray
    move_prob: np.ndarray
    move_cum: np.ndarray
    _slides: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def periods(self) -> tuple:
        return self.spec.periods

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def n_classes(self) -> int:
        return n_classes(self.spec.periods)

    def moves(self, side: str, cls) -> tuple:
        return self.spec.kernel[(side, _as_class(cls, len(self.periods)))]

    def mean_slides(self) -> np.ndarray:
        """Array of shape ``(2, |U|, m-1)`` with the mean slide of every entry."""
        return self._slides.copy()

    @property
    def has_slides(self) -> bool:
        return bool(np.any(self.move_slide != 0))


def _as_class(cls, d: int) -> tuple:
    if isinstance(cls, (int, np.integer)):
        cls = (int(cls),)
    cls = tuple(int(c) for c in cls)
    if len(cls) != d:
        raise DimensionMismatch(f"class {cls} does not have {d} coordinates")
    return cls


def validate(spec: MembraneSpec) -> ValidatedMembrane:
    """Check a membrane definition and freeze it into a :class:`ValidatedMembrane`."""
    if isinstance(spec, ValidatedMembrane):
        return spec
    m = int(spec.m)
    if m < 2:
        raise BadDimension(f"dimension m={m} must be at least 2")
    periods = tuple(int(k) for k in spec.periods)
    if len(periods) != m - 1:
        raise DimensionMismatch(f"expected {m - 1} periods, got {len(periods)}")
    for k in periods:
        if k < 1:
            raise BadPeriod(f"period {k} must be >= 1")
    classes = all_classes(periods)
    nU = len(classes)

    kernel = {}
    for (side, cls), moves in spec.kernel.items():
        if side not in SIDES:
            raise InvalidMove(f"unknown side {side!r}")
        cls = _as_class(cls, m - 1)
        if any(not 0 <= c < k for c, k in zip(cls, periods)):
            raise DimensionMismatch(f"class {cls} outside the periodic cell {periods}")
        kernel[(side, cls)] = tuple(_check_move(mv, m, side, cls) for mv in moves)

    entry_ptr = [0]
    exits, slides, probs, cums = [], [], [], []
    mean = np.zeros((2, nU, m - 1))
    for si, side in enumerate(SIDES):
        for ci, cls in enumerate(classes):
            moves = kernel.get((side, cls))
            if not moves:
                raise EmptyKernelEntry(f"no moves for side {side}, class {cls}")
            total = math.fsum(mv.prob for mv in moves)
            if abs(total - 1.0) > PROB_TOL:
                raise ProbabilitySumError(
                    f"moves of side {side}, class {cls} sum to {total!r}, not 1"
                )
            acc = 0.0
            for mv in moves:
                exits.append(1 if mv.exit == R else 0)
                slides.append(mv.slide)
                probs.append(mv.prob)
                acc += mv.prob
                cums.append(acc)
                mean[si, ci] += mv.prob * np.asarray(mv.slide, dtype=float)
            cums[-1] = 1.0
            entry_ptr.append(len(exits))

    frozen = MembraneSpec(m=m, periods=periods, kernel=_freeze(kernel), name=spec.name)
    return ValidatedMembrane(
        spec=frozen,
        entry_ptr=_ro(np.asarray(entry_ptr, dtype=np.int64)),
        move_exit=_ro(np.asarray(exits, dtype=np.int64)),
        move_slide=_ro(np.asarray(slides, dtype=np.int64).reshape(-1, m - 1)),
        move_prob=_ro(np.asarray(probs, dtype=float)),
        move_cum=_ro(np.asarray(cums, dtype=float)),
        _slides=_ro(mean),
    )


def _check_move(mv, m: int, side: str, cls: tuple) -> Move:
    if isinstance(mv, Mapping):
        mv = Move(mv["exit"], mv["slide"], mv["prob"])
    exit_, slide, prob = mv
    if exit_ not in SIDES:
        raise InvalidMove(f"move from ({side}, {cls}) exits to {exit_!r}; must be 'L' or 'R'")
    if isinstance(slide, (int, np.integer)):
        slide = (slide,)
    slide = tuple(slide)
    if len(slide) != m - 1:
        raise DimensionMismatch(f"slide {slide} does not have {m - 1} coordinates")
    if any(int(s) != s for s in slide):
        raise InvalidMove(f"slide {slide} is not integer")
    prob = float(prob)
    if not (prob >= 0.0 and prob <= 1.0 + PROB_TOL):
        raise ProbabilitySumError(f"move probability {prob!r} outside [0, 1]")
    return Move(exit_, tuple(int(s) for s in slide), prob)


def _freeze(kernel: dict) -> Mapping:
    from types import MappingProxyType

    return MappingProxyType(dict(kernel))


def _ro(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def mean_slide(membrane: ValidatedMembrane, side: str, cls) -> np.ndarray:
    """Probability-weighted mean slide of one kernel entry."""
    membrane = validate(membrane)
    cls = _as_class(cls, membrane.m - 1)
    si = SIDES.index(side)
    return membrane._slides[si, class_index(cls, membrane.periods)].copy()


# ---------------------------------------------------------------------------
# built-in membranes
# ---------------------------------------------------------------------------


def _check_p(*ps):
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise SpecError(f"probability {p} outside [0, 1]")


def _moves(*triples):
    # zero-probability moves are dropped to keep the support graph honest
    return tuple(Move(e, tuple(s), float(q)) for e, s, q in triples if q > 0)


def fig1a(p: float) -> MembraneSpec:
    """Two-periodic membrane of the first worked example.

    From the right: even sites reflect, odd sites let the walker through.
    From the left: at even sites cross with probability ``p`` or reflect
    sliding by -1; at odd sites cross with ``1 - p`` or reflect sliding by -1.
    """
    _check_p(p)
    kernel = {
        (R, (0,)): _moves((R, (0,), 1.0)),
        (R, (1,)): _moves((L, (0,), 1.0)),
        (L, (0,)): _moves((R, (0,), p), (L, (-1,), 1 - p)),
        (L, (1,)): _moves((R, (0,), 1 - p), (L, (-1,), p)),
    }
    return MembraneSpec(m=2, periods=(2,), kernel=kernel, name=f"fig1a({p!r})")


def fig1b(p: float) -> MembraneSpec:
    """Same right side as :func:`fig1a`, left side shifted by one site."""
    _check_p(p)
    kernel = {
        (R, (0,)): _moves((R, (0,), 1.0)),
        (R, (1,)): _moves((L, (0,), 1.0)),
        (L, (0,)): _moves((R, (0,), 1 - p), (L, (-1,), p)),
        (L, (1,)): _moves((R, (0,), p), (L, (-1,), 1 - p)),
    }
    return MembraneSpec(m=2, periods=(2,), kernel=kernel, name=f"fig1b({p!r})")


def homogeneous(p_left: float, p_right: float, m: int = 2) -> MembraneSpec:
    """Period-one membrane; ``p_side`` is the probability of leaving to x=+1."""
    _check_p(p_left, p_right)
    z = (0,) * (m - 1)
    c = (0,) * (m - 1)
    kernel = {
        (L, c): _moves((R, z, p_left), (L, z, 1 - p_left)),
        (R, c): _moves((R, z, p_right), (L, z, 1 - p_right)),
    }
    return MembraneSpec(m=m, periods=(1,) * (m - 1), kernel=kernel,
                        name=f"homogeneous({p_left!r}, {p_right!r})")


def transparent(m: int = 2) -> MembraneSpec:
    """Membrane that always lets the walker cross without sliding."""
    spec = homogeneous(1.0, 0.0, m=m)
    return MembraneSpec(m=spec.m, periods=spec.periods, kernel=spec.kernel, name="transparent")


BUILTINS = {
    "fig1a": fig1a,
    "fig1b": fig1b,
    "homogeneous": homogeneous,
    "transparent": transparent,
}

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def builtin(name: str, *args, **kwargs) -> MembraneSpec:
    """Look up a built-in membrane; ``name`` may also be a call like ``"fig1a(0.5)"``."""
    match = _CALL.match(name)
    if match is None:
        raise UnknownBuiltin(name)
    key, arglist = match.groups()
    if key not in BUILTINS:
        raise UnknownBuiltin(f"unknown built-in membrane {key!r}; known: {sorted(BUILTINS)}")
    if arglist:
        args = tuple(float(a) for a in arglist.split(",") if a.strip()) + args
    return BUILTINS[key](*args, **kwargs)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def membrane_from_dict(doc: Mapping) -> MembraneSpec:
    try:
        m = int(doc["m"])
        periods = tuple(int(k) for k in doc["periods"])
        entries = doc["kernel"]
    except (KeyError, TypeError) as exc:
        raise SpecError(f"membrane document lacks field {exc}") from exc
    kernel = {}
    for entry in entries:
        key = (entry["side"], tuple(int(c) for c in entry["class"]))
        if key in kernel:
            raise SpecError(f"duplicate kernel entry {key}")
        kernel[key] = tuple(
            Move(mv["exit"], tuple(mv["slide"]), float(mv["prob"])) for mv in entry["moves"]
        )
    return MembraneSpec(m=m, periods=periods, kernel=kernel, name=doc.get("name", "custom"))


def membrane_to_dict(membrane) -> dict:
    spec = membrane.spec if isinstance(membrane, ValidatedMembrane) else membrane
    entries = []
    for side in SIDES:
        for cls in all_classes(spec.periods):
            moves = spec.kernel.get((side, cls), ())
            entries.append({
                "side": side,
                "class": list(cls),
                "moves": [{"exit": mv.exit, "slide": list(mv.slide), "prob": mv.prob}
                          for mv in moves],
            })
    return {"m": spec.m, "periods": list(spec.periods), "kernel": entries, "name": spec.name}


def load_membrane(source) -> ValidatedMembrane:
    """Load from a JSON file path, a ``builtin:NAME(args)`` string or a dict."""
    if isinstance(source, Mapping):
        return validate(membrane_from_dict(source))
    text = str(source)
    if text.startswith("builtin:"):
        return validate(builtin(text[len("builtin:"):]))
    with open(Path(text)) as fh:
        doc = json.load(fh)
    return validate(membrane_from_dict(doc))


# ---------------------------------------------------------------------------
# one-sided environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PeriodicEnvironment:
    """Position-only pass probabilities repeating with the shape of ``table``."""

    table: np.ndarray
    kind = "periodic"

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim == 0:
            t = t.reshape(1)
        if np.any(t < 0) or np.any(t > 1) or not np.all(np.isfinite(t)):
            raise SpecError("environment probabilities must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def m(self) -> int:
        return self.table.ndim + 1

    @property
    def periods(self) -> tuple:
        return tuple(self.table.shape)

    @property
    def mean(self) -> float:
        return float(self.table.mean())

    def p(self, y) -> float:
        return float(self.table[class_of(tuple(y), self.periods)])

    def p_many(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.int64).reshape(-1, self.m - 1)
        idx = tuple((ys % np.asarray(self.periods)).T)
        return self.table[idx]

    def as_membrane(self) -> ValidatedMembrane:
        """Equivalent two-sided kernel: both sides behave alike, no slides."""
        z = (0,) * (self.m - 1)
        kernel = {}
        for cls in all_classes(self.periods):
            q = float(self.table[cls])
            for side in SIDES:
                kernel[(side, cls)] = _moves((R, z, q), (L, z, 1 - q))
        return validate(MembraneSpec(m=self.m, periods=self.periods, kernel=kernel,
                                     name="one-sided periodic"))

    def to_dict(self) -> dict:
        return {"type": "periodic", "p": self.table.tolist()}


@dataclass(frozen=True, eq=False)
class IIDEnvironment:
    """I.i.d. pass probabilities drawn from a finite law, fixed by ``seed``.

    ``p(y)`` is a pure function of ``(seed, y)``: the environment is never
    stored, and the same site always returns the same value.
    """

    values: np.ndarray
    weights: np.ndarray
    seed: int
    m: int = 2
    kind = "iid"

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        w = np.array(self.weights, dtype=float).ravel()
        if v.size == 0 or v.shape != w.shape:
            raise SpecError("iid law needs matching non-empty values and weights")
        if np.any(v < 0) or np.any(v > 1):
            raise SpecError("environment probabilities must lie in [0, 1]")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise SpecError("iid law weights must be nonnegative and sum to 1")
        if int(self.m) < 2:
            raise BadDimension(f"dimension m={self.m} must be at least 2")
        for a in (v, w):
            a.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "m", int(self.m))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.weights))

    @property
    def cum_weights(self) -> np.ndarray:
        c = np.cumsum(self.weights)
        c[-1] = 1.0
        return c

    def p(self, y) -> float:
        y = np.asarray(y, dtype=np.int64).reshape(self.m - 1)
        return float(_hashing.site_value(np.uint64(self.seed % 2**64), y,
                                         self.values, self.cum_weights))

    def p_many(self, ys: np.ndarray) -> np.ndarray:
        ys = np.ascontiguousarray(np.asarray(ys, dtype=np.int64).reshape(-1, self.m - 1))
        return _hashing.site_values(np.uint64(self.seed % 2**64), ys,
                                    self.values, self.cum_weights)

    def to_dict(self) -> dict:
        return {"type": "iid", "m": self.m, "seed": self.seed,
                "law": {"bernoulli_values": self.values.tolist(),
                        "weights": self.weights.tolist()}}


def environment_from_dict(doc: Mapping, m: int | None = None):
    kind = doc.get("type")
    if kind == "periodic":
        env = PeriodicEnvironment(np.asarray(doc["p"], dtype=float))
        if m is not None and env.m != m:
            raise DimensionMismatch(f"periodic table implies m={env.m}, expected {m}")
        return env
    if kind == "iid":
        law = doc["law"]
        return IIDEnvironment(values=law["bernoulli_values"], weights=law["weights"],
                              seed=int(doc.get("seed", 0)), m=int(doc.get("m", m or 2)))
    if kind == "constant":
        return IIDEnvironment(values=[float(doc["p"])], weights=[1.0], seed=0,
                              m=int(doc.get("m", m or 2)))
    raise SpecError(f"unknown environment type {kind!r}")


def load_environment(source, m: int | None = None):
    if isinstance(source, Mapping):
        return environment_from_dict(source, m)
    with open(Path(source)) as fh:
        return environment_from_dict(json.load(fh), m)
