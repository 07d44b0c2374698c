"""Simulation of the membrane walk with exact excursion bookkeeping.

Positions on the membrane carry the side the walker arrived from. Every
membrane departure opens an excursion of type
``t = 2 * (side * |U| + class) + sign``, where ``(side, class)`` is the arrival
it leaves from and ``sign`` is 1 for ``x > 0``; for each type the engine keeps

* ``L_type[t]``: number of excursions of type ``t`` started so far,
* ``M_type[t]``: sum of ``|x|`` increments made while inside such an excursion,
* ``occupation[t]``: number of steps spent inside such an excursion,

so that ``|x| = M_type[t] + L_type[t]`` for the running type and ``0`` for
the others. Summing over the arrival side gives the per-``(class, sign)``
processes, see :func:`by_class`. Tangential motion is split into ``MY`` (free steps) and ``DY``
(membrane slides), ``y = y0 + MY + DY``.

Each path ``i`` of a run with master seed ``s`` draws from its own Philox
stream keyed by ``(s, i)`` and consumes exactly one uniform per step (plus one
for a stationary start), so single paths, ensembles, chunked runs and threaded
runs produce bit-identical results.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import _kernel
from .chain import analyze
from .errors import GridOutOfRange, NoVisits, OverflowGuard, SpecError
from .excursion import sample_excursions
from .membrane import (SIDES, IIDEnvironment, MembraneSpec, PeriodicEnvironment,
                       ValidatedMembrane, class_tuple, validate)

Y_BOUND = 2**62
CHUNK_STEPS = 1 << 20
BLOCK_UNIFORMS = 1 << 22
SIDE_CODE = {None: -1, "L": 0, "R": 1}
SIDE_NAME = {-1: None, 0: "L", 1: "R"}


def type_index(side: str, cls: int, sign: int, n_cls: int) -> int:
    """Excursion type of a departure from arrival ``(side, cls)`` towards ``sign`` (+1 or -1)."""
    return 2 * (SIDES.index(side) * n_cls + int(cls)) + int(sign > 0)


def by_class(per_type: np.ndarray) -> np.ndarray:
    """Sum type-indexed counters over the arrival side: ``(..., 4|U|) -> (..., |U|, 2)``."""
    a = np.asarray(per_type)
    return a.reshape(a.shape[:-1] + (2, -1, 2)).sum(axis=-3)


def path_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream of path ``index`` under master seed ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


@dataclass(frozen=True)
class WalkState:
    x: int
    membrane_side: str | None
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        if (self.x == 0) != (self.membrane_side is not None):
            raise ValueError("membrane_side must be set exactly when x == 0")
        if self.membrane_side is not None and self.membrane_side not in SIDES:
            raise ValueError(f"unknown side {self.membrane_side!r}")

    @property
    def on_membrane(self) -> bool:
        return self.x == 0


def origin(m: int, side: str = "R") -> WalkState:
    return WalkState(0, side, (0,) * (m - 1))


@dataclass(frozen=True, eq=False)
class CompiledModel:
    """Flat arrays handed to the compiled kernel."""

    source: object
    name: str
    m: int
    periods: np.ndarray
    mult: np.ndarray
    n_cls: int
    mode: int
    entry_ptr: np.ndarray
    move_exit: np.ndarray
    move_slide: np.ndarray
    move_cum: np.ndarray
    env_seed: np.uint64
    env_values: np.ndarray
    env_cum: np.ndarray
    membrane: ValidatedMembrane | None = None
    _chain: list = field(default_factory=list, repr=False)

    @property
    def n_types(self) -> int:
        return 4 * self.n_cls

    @property
    def chain(self):
        """Embedded chain of a periodic model (computed once)."""
        if self.membrane is None:
            raise ValueError(f"model {self.name!r} has no periodic embedded chain")
        if not self._chain:
            self._chain.append(analyze(self.membrane))
        return self._chain[0]

    def class_of(self, y) -> int:
        return int(np.dot(np.mod(np.asarray(y, dtype=np.int64), self.periods), self.mult))

    def args(self):
        return (self.m, self.periods, self.mult, self.n_cls,
                self.mode, self.entry_ptr, self.move_exit, self.move_slide, self.move_cum,
                self.env_seed, self.env_values, self.env_cum)


def _mult(periods) -> np.ndarray:
    k = np.asarray(periods, dtype=np.int64)
    mult = np.ones(len(k), dtype=np.int64)
    for i in range(len(k) - 2, -1, -1):
        mult[i] = mult[i + 1] * k[i + 1]
    return mult


def compile_model(model) -> CompiledModel:
    """Accept a membrane spec, a validated membrane or an environment."""
    if isinstance(model, CompiledModel):
        return model
    if isinstance(model, PeriodicEnvironment):
        model = model.as_membrane()
    if isinstance(model, (MembraneSpec, ValidatedMembrane)):
        vm = validate(model)
        periods = np.asarray(vm.periods, dtype=np.int64)
        return CompiledModel(
            source=model, name=vm.name, m=vm.m, periods=periods, mult=_mult(periods),
            n_cls=vm.n_classes, mode=0,
            entry_ptr=np.ascontiguousarray(vm.entry_ptr, dtype=np.int64),
            move_exit=np.ascontiguousarray(vm.move_exit, dtype=np.int64),
            move_slide=np.ascontiguousarray(vm.move_slide, dtype=np.int64).reshape(-1, vm.m - 1),
            move_cum=np.ascontiguousarray(vm.move_cum, dtype=float),
            env_seed=np.uint64(0), env_values=np.zeros(1), env_cum=np.ones(1), membrane=vm,
        )
    if isinstance(model, IIDEnvironment):
        d = model.m - 1
        periods = np.ones(d, dtype=np.int64)
        return CompiledModel(
            source=model, name="one-sided iid", m=model.m, periods=periods, mult=_mult(periods),
            n_cls=1, mode=1,
            entry_ptr=np.zeros(3, dtype=np.int64), move_exit=np.zeros(1, dtype=np.int64),
            move_slide=np.zeros((1, d), dtype=np.int64), move_cum=np.ones(1),
            env_seed=np.uint64(model.seed % 2**64),
            env_values=np.ascontiguousarray(model.values, dtype=float),
            env_cum=np.ascontiguousarray(model.cum_weights, dtype=float),
        )
    raise SpecError(f"cannot simulate a model of type {type(model).__name__}")


def _state_arrays(cm: CompiledModel, state: WalkState):
    if len(state.y) != cm.m - 1:
        raise ValueError(f"state has {len(state.y)} tangential coordinates, model needs {cm.m - 1}")
    # an off-membrane start counts as an excursion that left from its own side
    pos = int(state.x > 0)
    cur = -1 if state.x == 0 else 2 * (pos * cm.n_cls + cm.class_of(state.y)) + pos
    st = np.array([state.x, SIDE_CODE[state.membrane_side], cur, 0], dtype=np.int64)
    return st, np.array(state.y, dtype=np.int64)


def _stationary_state(cm: CompiledModel, u: float) -> WalkState:
    pi = cm.chain.pi
    idx = int(np.searchsorted(np.cumsum(pi), u * pi.sum(), side="right"))
    idx = min(idx, pi.size - 1)
    while pi[idx] == 0.0:  # guards against landing on a transient state at a cumsum tie
        idx -= 1
    side, cls = divmod(idx, cm.n_cls)
    return WalkState(0, SIDES[side], class_tuple(cls, tuple(cm.periods)))


def _initial_state(cm: CompiledModel, rng: np.random.Generator, start) -> WalkState:
    if start is None:
        start = "stationary" if cm.membrane is not None else "origin"
    if isinstance(start, WalkState):
        return start
    if start == "stationary":
        return _stationary_state(cm, rng.random())
    if start == "origin":
        return origin(cm.m)
    raise ValueError(f"unknown start {start!r}")


def _state_from(st: np.ndarray, y: np.ndarray) -> WalkState:
    return WalkState(int(st[0]), SIDE_NAME[int(st[1])], tuple(int(v) for v in y))


def step(state: WalkState, model, rng: np.random.Generator, drift: float = 0.0) -> WalkState:
    """One transition of the walk, using one uniform from ``rng``."""
    cm = compile_model(model)
    st, y = _state_arrays(cm, state)
    T, d = cm.n_types, cm.m - 1
    z = lambda *s: np.zeros(s, dtype=np.int64)
    e1, e2 = z(1), z(1, d)
    status = _kernel.advance(
        np.array([rng.random()]), st, y, *cm.args(), float(drift), Y_BOUND,
        z(T), z(T), z(T), z(d), z(d), z(2 * cm.n_cls), False,
        0, e1, e1, e1, e1, e2, z(1, 1), z(1, 1), e2, e2, False, z(1),
        z(0), z(0), z(0), z(0, d), z(1),
        z(0), z(1), z(1), z(1, d), z(1), z(1, d))
    if status != _kernel.OK:
        raise OverflowGuard(f"tangential coordinate exceeded {Y_BOUND}")
    return _state_from(st, y)


@dataclass(frozen=True, eq=False)
class Trajectory:
    model: str
    m: int
    periods: tuple
    n: int
    seed: int
    path_index: int
    stride: int
    initial: WalkState
    final: WalkState
    current_type: int
    L_type: np.ndarray
    M_type: np.ndarray
    occupation: np.ndarray
    MY: np.ndarray
    DY: np.ndarray
    visit_counts: np.ndarray
    sample_step: np.ndarray
    sample_x: np.ndarray
    sample_side: np.ndarray
    sample_type: np.ndarray
    sample_y: np.ndarray
    sample_M: np.ndarray | None = None
    sample_L: np.ndarray | None = None
    sample_MY: np.ndarray | None = None
    sample_DY: np.ndarray | None = None
    visit_tau: np.ndarray | None = None
    visit_side: np.ndarray | None = None
    visit_class: np.ndarray | None = None
    visit_y: np.ndarray | None = None
    drift: float = 0.0

    @property
    def L_total(self) -> int:
        return int(self.L_type.sum())

    @property
    def X_type(self) -> np.ndarray:
        """Excursion processes ``X^{j,+-}(n)``: ``|x|`` on the running type, zero elsewhere."""
        out = np.zeros_like(self.L_type)
        if self.current_type >= 0:
            out[self.current_type] = abs(self.final.x)
        return out

    def check_invariants(self) -> dict:
        """Exact integer identities, at the end and at every recorded sample."""
        sign = np.tile([-1, 1], self.L_type.size // 2)
        xt = self.X_type
        res = {
            "x_from_types": int(np.dot(sign, xt)) == self.final.x,
            "single_active_type": int(np.count_nonzero(xt)) <= 1,
            "x_equals_M_plus_L": bool(np.array_equal(xt[self.current_type], (self.M_type + self.L_type)[self.current_type]))
            if self.current_type >= 0 else True,
            "inactive_types_zero": bool(np.all(np.delete(self.M_type + self.L_type, self.current_type) == 0))
            if self.current_type >= 0 else bool(np.all(self.M_type + self.L_type == 0)),
            "y_decomposition": bool(np.array_equal(np.array(self.final.y),
                                                   np.array(self.initial.y) + self.MY + self.DY)),
            "local_time_total": self.L_total == int(self.L_type.sum()),
        }
        if self.sample_M is not None and self.sample_step.size:
            S = self.sample_step.size
            XT = np.zeros_like(self.sample_M)
            active = self.sample_type >= 0
            XT[np.flatnonzero(active), self.sample_type[active]] = np.abs(self.sample_x[active])
            res["samples_x_equals_M_plus_L"] = bool(np.array_equal(XT, self.sample_M + self.sample_L))
            res["samples_x_from_types"] = bool(np.array_equal(XT @ sign, self.sample_x))
            dL = np.diff(self.sample_L, axis=0)
            gaps = np.diff(self.sample_step)
            res["samples_L_monotone"] = bool(np.all(dL >= 0) and np.all(dL <= gaps[:, None]))
            res["samples_y_decomposition"] = bool(np.array_equal(
                self.sample_y, np.array(self.initial.y)[None, :] + self.sample_MY + self.sample_DY))
            res["samples_count"] = S >= 1
        return res

    def summary(self) -> dict:
        return {
            "model": self.model, "m": self.m, "periods": list(self.periods), "steps": self.n,
            "seed": self.seed, "path_index": self.path_index, "stride": self.stride,
            "initial": {"x": self.initial.x, "side": self.initial.membrane_side, "y": list(self.initial.y)},
            "final": {"x": self.final.x, "side": self.final.membrane_side, "y": list(self.final.y)},
            "current_type": self.current_type, "L_total": self.L_total,
            "L_type": self.L_type.tolist(), "M_type": self.M_type.tolist(),
            "occupation": self.occupation.tolist(), "M_Y": self.MY.tolist(), "D_Y": self.DY.tolist(),
            "visits": self.visit_counts.tolist(),
        }


def simulate(model, steps: int, seed: int, *, path_index: int = 0, stride: int = 1,
             record_visits: bool = True, record_counters: bool = False, start=None,
             drift: float = 0.0, y_bound: int = Y_BOUND) -> Trajectory:
    """Run one path of ``steps`` steps.

    ``stride`` thins the stored states (0 stores only the initial state);
    counters are exact regardless. ``start`` is ``"stationary"`` (default for
    periodic models: arrival state drawn from the embedded chain's stationary
    law), ``"origin"`` or a :class:`WalkState`.
    """
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    cm = compile_model(model)
    rng = path_rng(seed, path_index)
    init = _initial_state(cm, rng, start)
    st, y = _state_arrays(cm, init)
    T, d = cm.n_types, cm.m - 1
    z = lambda *s: np.zeros(s, dtype=np.int64)
    l_type, m_type, occ, my, dy, visits = z(T), z(T), z(T), z(d), z(d), z(2 * cm.n_cls)

    samples = {k: [] for k in ("step", "x", "side", "type", "y", "M", "L", "MY", "DY")}
    vlog = {k: [] for k in ("tau", "side", "cls", "y")}

    def record_initial():
        samples["step"].append(np.array([0])); samples["x"].append(np.array([st[0]]))
        samples["side"].append(np.array([st[1]])); samples["type"].append(np.array([st[2]]))
        samples["y"].append(y[None, :].copy())
        samples["M"].append(z(1, T)); samples["L"].append(z(1, T))
        samples["MY"].append(z(1, d)); samples["DY"].append(z(1, d))

    record_initial()
    done = 0
    first = True
    while first or done < steps:
        n = min(CHUNK_STEPS, steps - done)
        us = rng.random(n)
        ns = n // stride + 1 if stride > 0 else 0
        s_arr = [z(ns), z(ns), z(ns), z(ns), z(ns, d)]
        s_cnt_arr = [z(ns, T), z(ns, T), z(ns, d), z(ns, d)] if record_counters else [z(1, 1), z(1, 1), z(1, d), z(1, d)]
        nv = (n // 2 + 2) if record_visits else 0
        v_arr = [z(nv), z(nv), z(nv), z(nv, d)]
        s_cnt, v_cnt = z(1), z(1)
        status = _kernel.advance(
            us, st, y, *cm.args(), float(drift), int(y_bound),
            l_type, m_type, occ, my, dy, visits, first,
            int(stride), s_arr[0], s_arr[1], s_arr[2], s_arr[3], s_arr[4],
            s_cnt_arr[0], s_cnt_arr[1], s_cnt_arr[2], s_cnt_arr[3], bool(record_counters), s_cnt,
            v_arr[0], v_arr[1], v_arr[2], v_arr[3], v_cnt,
            z(0), z(1), z(1), z(1, d), z(1), z(1, d))
        if status != _kernel.OK:
            raise OverflowGuard(f"tangential coordinate exceeded the bound {y_bound} at step {st[3]}")
        k = int(s_cnt[0])
        for key, arr in zip(("step", "x", "side", "type", "y"), s_arr):
            samples[key].append(arr[:k])
        if record_counters:
            for key, arr in zip(("M", "L", "MY", "DY"), s_cnt_arr):
                samples[key].append(arr[:k])
        kv = int(v_cnt[0])
        for key, arr in zip(("tau", "side", "cls", "y"), v_arr):
            vlog[key].append(arr[:kv])
        done += n
        first = False
        if n == 0:
            break

    cat = lambda key: np.concatenate(samples[key])
    vcat = lambda key: np.concatenate(vlog[key]) if record_visits else None
    return Trajectory(
        model=cm.name, m=cm.m, periods=tuple(int(k) for k in cm.periods), n=steps, seed=int(seed),
        path_index=int(path_index), stride=int(stride), initial=init, final=_state_from(st, y),
        current_type=int(st[2]), L_type=l_type, M_type=m_type, occupation=occ, MY=my, DY=dy,
        visit_counts=visits.reshape(2, cm.n_cls),
        sample_step=cat("step"), sample_x=cat("x"), sample_side=cat("side"),
        sample_type=cat("type"), sample_y=cat("y"),
        sample_M=cat("M") if record_counters else None, sample_L=cat("L") if record_counters else None,
        sample_MY=cat("MY") if record_counters else None, sample_DY=cat("DY") if record_counters else None,
        visit_tau=vcat("tau"), visit_side=vcat("side"), visit_class=vcat("cls"), visit_y=vcat("y"),
        drift=float(drift),
    )


def trajectory_rows(traj: Trajectory):
    """CSV rows ``step, x, side, y...`` of the stored states."""
    for i in range(traj.sample_step.size):
        side = SIDE_NAME[int(traj.sample_side[i])] or ""
        yield [int(traj.sample_step[i]), int(traj.sample_x[i]), side, *map(int, traj.sample_y[i])]


def scaled(traj: Trajectory, n: int, t_grid) -> tuple:
    """``(X([n t]) / sqrt(n), Y([n t]) / sqrt(n))`` at each ``t`` of the grid."""
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if n <= 0 or np.any(t < 0):
        raise GridOutOfRange("scaling needs n >= 1 and nonnegative times")
    k = np.floor(n * t + 1e-9 * n * t).astype(np.int64)
    if np.any(k > traj.n):
        raise GridOutOfRange(f"grid reaches step {int(k.max())} beyond trajectory length {traj.n}")
    pos = np.searchsorted(traj.sample_step, k)
    ok = (pos < traj.sample_step.size) & (traj.sample_step[np.minimum(pos, traj.sample_step.size - 1)] == k)
    if not np.all(ok):
        raise GridOutOfRange(f"steps {k[~ok].tolist()} were not stored (stride {traj.stride})")
    r = math.sqrt(n)
    return traj.sample_x[pos] / r, traj.sample_y[pos] / r


def visit_frequencies(obj) -> np.ndarray:
    """Normalized arrival counts as a ``(2, |U|)`` array (row 0 = L, row 1 = R)."""
    counts = obj.visit_counts if isinstance(obj, Trajectory) else obj.visit_counts.sum(axis=0)
    counts = np.asarray(counts, dtype=float).reshape(2, -1)
    total = counts.sum()
    if total == 0:
        raise NoVisits("no membrane visits recorded")
    return counts / total


def cube_average(env, A: int, center=None) -> float:
    """Mean of ``p_y`` over the cube of side ``A`` (``A`` points per axis) around ``center``."""
    A = int(A)
    if A < 1:
        raise ValueError("cube side must be at least 1")
    if isinstance(env, (int, float)):
        return float(env)
    d = env.m - 1
    center = np.zeros(d, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64).reshape(d)
    axis = np.arange(A, dtype=np.int64) - A // 2
    total = 0.0
    count = 0
    # iterate over the last axis in blocks to bound memory for m > 2
    for head in product(axis, repeat=d - 1):
        ys = np.empty((A, d), dtype=np.int64)
        ys[:, :d - 1] = np.asarray(head, dtype=np.int64) + center[:d - 1]
        ys[:, d - 1] = axis + center[d - 1]
        total += math.fsum(env.p_many(ys))
        count += A
    return total / count


def hitting_records(model, n_records: int, seed: int) -> tuple:
    """Increments ``(tau_k - tau_{k-1}, Y(tau_k) - Y(tau_{k-1}))`` between membrane visits.

    Valid for models without slides, where every excursion is a free-walk
    excursion whatever the exit side; drawn with the exact excursion sampler.
    """
    cm = compile_model(model)
    if cm.mode == 0 and np.any(cm.move_slide != 0):
        raise ValueError("hitting records need a membrane without slides")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    return sample_excursions(cm.m, int(n_records), rng)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Per-path end-of-run summaries of independent paths."""

    config: dict
    path_index: np.ndarray
    x: np.ndarray
    side: np.ndarray
    y: np.ndarray
    y0: np.ndarray
    current_type: np.ndarray
    L_type: np.ndarray
    M_type: np.ndarray
    occupation: np.ndarray
    MY: np.ndarray
    DY: np.ndarray
    visit_counts: np.ndarray
    grid_steps: np.ndarray
    grid_x: np.ndarray
    grid_y: np.ndarray
    grid_L: np.ndarray
    grid_DY: np.ndarray

    @property
    def paths(self) -> int:
        return int(self.x.size)

    @property
    def steps(self) -> int:
        return int(self.config["steps"])

    @property
    def m(self) -> int:
        return int(self.config["m"])

    @property
    def L_total(self) -> np.ndarray:
        return self.L_type.sum(axis=1)

    @property
    def X_type(self) -> np.ndarray:
        out = np.zeros_like(self.L_type)
        on = self.current_type >= 0
        out[np.flatnonzero(on), self.current_type[on]] = np.abs(self.x[on])
        return out

    def merge(self, other: "Ensemble") -> "Ensemble":
        """Union of two disjoint path sets; the result is ordered by path index."""
        keep = ("model", "steps", "seed", "m", "drift", "start")
        if any(self.config.get(k) != other.config.get(k) for k in keep) or \
                not np.array_equal(self.grid_steps, other.grid_steps):
            raise ValueError("ensembles from different runs cannot be merged")
        idx = np.concatenate([self.path_index, other.path_index])
        if np.unique(idx).size != idx.size:
            raise ValueError("ensembles share paths")
        order = np.argsort(idx, kind="stable")
        fields = {}
        for name in ("path_index", "x", "side", "y", "y0", "current_type", "L_type", "M_type",
                     "occupation", "MY", "DY", "visit_counts", "grid_x", "grid_y", "grid_L", "grid_DY"):
            fields[name] = np.concatenate([getattr(self, name), getattr(other, name)])[order]
        config = dict(self.config)
        config["paths"] = int(idx.size)
        return Ensemble(config=config, grid_steps=self.grid_steps, **fields)

    def summary(self) -> dict:
        rt = math.sqrt(max(self.steps, 1))
        return {
            "config": self.config,
            "paths": self.paths,
            "mean_x_scaled": float(np.mean(self.x) / rt),
            "mean_L_scaled": float(np.mean(self.L_total) / rt),
            "mean_y_scaled": ((self.y - self.y0).mean(axis=0) / rt).tolist(),
            "mean_DY_scaled": (self.DY.mean(axis=0) / rt).tolist(),
            "fraction_positive": float(np.mean(self.x > 0)),
            "fraction_on_membrane": float(np.mean(self.x == 0)),
            "visits": self.visit_counts.sum(axis=0).tolist(),
        }


def run_ensemble(model, steps: int, paths: int, seed: int, *, start=None, grid=None,
                 workers: int | None = 1, drift: float = 0.0, path_offset: int = 0,
                 y_bound: int = Y_BOUND) -> Ensemble:
    """Simulate paths ``path_offset .. path_offset + paths - 1`` of master seed ``seed``.

    ``grid`` lists intermediate steps at which ``x, y, L, D_Y`` are recorded.
    Paths are processed in blocks, optionally on a thread pool; the result
    does not depend on the number of workers.
    """
    steps, paths = int(steps), int(paths)
    if steps < 0 or paths < 1:
        raise ValueError("need steps >= 0 and paths >= 1")
    cm = compile_model(model)
    T, d = cm.n_types, cm.m - 1
    g_steps = np.unique(np.asarray([] if grid is None else grid, dtype=np.int64))
    if g_steps.size and (g_steps[0] < 1 or g_steps[-1] > steps):
        raise GridOutOfRange(f"grid steps must lie in [1, {steps}]")
    G = g_steps.size
    z = lambda *s: np.zeros(s, dtype=np.int64)
    st, y, y0 = z(paths, 4), z(paths, d), z(paths, d)
    l_type, m_type, occ = z(paths, T), z(paths, T), z(paths, T)
    my, dy, visits = z(paths, d), z(paths, d), z(paths, 2 * cm.n_cls)
    g_x, g_y, g_l, g_dy = z(paths, G), z(paths, G, d), z(paths, G), z(paths, G, d)
    status = z(paths)
    if start is None:
        start = "stationary" if cm.membrane is not None else "origin"
    if start == "stationary":
        cm.chain  # fail early for models without a chain

    chunk = max(1, min(steps, CHUNK_STEPS))
    block = max(1, BLOCK_UNIFORMS // chunk)
    blocks = [(a, min(a + block, paths)) for a in range(0, paths, block)]

    def run(bounds):
        a, b = bounds
        rngs = [path_rng(seed, path_offset + i) for i in range(a, b)]
        for i, rng in zip(range(a, b), rngs):
            s0 = _initial_state(cm, rng, start)
            st[i], y[i] = _state_arrays(cm, s0)
            y0[i] = y[i]
        g_pos = z(b - a)
        U = np.empty((b - a, chunk))
        done = 0
        first = True
        while first or done < steps:
            n = min(chunk, steps - done)
            if n:
                for r, rng in enumerate(rngs):
                    rng.random(out=U[r, :n])
            _kernel.run_block(
                U, np.full(b - a, n, dtype=np.int64), st[a:b], y[a:b], *cm.args(),
                float(drift), int(y_bound),
                l_type[a:b], m_type[a:b], occ[a:b], my[a:b], dy[a:b], visits[a:b], first,
                g_steps, g_pos, g_x[a:b], g_y[a:b], g_l[a:b], g_dy[a:b], status[a:b])
            done += n
            first = False
            if n == 0:
                break

    if workers is None or workers == 0:
        import os
        workers = os.cpu_count() or 1
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for bounds in blocks:
            run(bounds)
    if np.any(status != _kernel.OK):
        bad = int(np.flatnonzero(status != _kernel.OK)[0]) + path_offset
        raise OverflowGuard(f"path {bad}: tangential coordinate exceeded the bound {y_bound}")

    config = {"model": cm.name, "m": cm.m, "periods": [int(k) for k in cm.periods], "steps": steps,
              "paths": paths, "seed": int(seed), "path_offset": int(path_offset), "drift": float(drift),
              "start": start if isinstance(start, str) else {"x": start.x, "side": start.membrane_side,
                                                            "y": list(start.y)},
              "grid": g_steps.tolist()}
    return Ensemble(
        config=config, path_index=np.arange(path_offset, path_offset + paths, dtype=np.int64),
        x=st[:, 0].copy(), side=st[:, 1].copy(), y=y, y0=y0, current_type=st[:, 2].copy(),
        L_type=l_type, M_type=m_type, occupation=occ, MY=my, DY=dy, visit_counts=visits,
        grid_steps=g_steps, grid_x=g_x, grid_y=g_y, grid_L=g_l, grid_DY=g_dy,
    )
