import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from membrane_walk import membrane as mb
from membrane_walk.errors import (BadDimension, BadPeriod, DimensionMismatch, EmptyKernelEntry,
                                  InvalidMove, ProbabilitySumError, UnknownBuiltin)

P_GRID = [0.0, 0.1, 0.25, 0.3, 0.5, 0.75, 0.9, 1.0]


def test_fig1a_validates():
    vm = mb.validate(mb.fig1a(0.3))
    assert vm.m == 2 and vm.periods == (2,) and vm.n_classes == 2
    assert vm.move_cum[-1] == 1.0


def test_probability_sum_error():
    spec = mb.fig1a(0.5)
    kernel = dict(spec.kernel)
    kernel[("L", (0,))] = (mb.Move("R", (0,), 0.5), mb.Move("L", (-1,), 0.4))
    with pytest.raises(ProbabilitySumError):
        mb.validate(mb.MembraneSpec(2, (2,), kernel))


def test_sum_tolerance_is_1e12():
    kernel = {(s, (0,)): (mb.Move("R", (0,), 0.5 + 5e-13), mb.Move("L", (0,), 0.5)) for s in "LR"}
    mb.validate(mb.MembraneSpec(2, (1,), kernel))
    kernel = {(s, (0,)): (mb.Move("R", (0,), 0.5 + 5e-12), mb.Move("L", (0,), 0.5)) for s in "LR"}
    with pytest.raises(ProbabilitySumError):
        mb.validate(mb.MembraneSpec(2, (1,), kernel))


def test_bad_period_and_dimension():
    with pytest.raises(BadPeriod):
        mb.validate(mb.MembraneSpec(2, (0,), {}))
    with pytest.raises(BadDimension):
        mb.validate(mb.MembraneSpec(1, (), {}))
    with pytest.raises(DimensionMismatch):
        mb.validate(mb.MembraneSpec(3, (2,), {}))


def test_empty_entry():
    kernel = dict(mb.fig1a(0.5).kernel)
    del kernel[("R", (1,))]
    with pytest.raises(EmptyKernelEntry):
        mb.validate(mb.MembraneSpec(2, (2,), kernel))


def test_moves_must_leave_membrane():
    kernel = {(s, (0,)): (mb.Move("0", (0,), 1.0),) for s in "LR"}
    with pytest.raises(InvalidMove):
        mb.validate(mb.MembraneSpec(2, (1,), kernel))


def test_validated_is_immutable():
    vm = mb.validate(mb.fig1a(0.5))
    with pytest.raises(TypeError):
        vm.spec.kernel[("L", (0,))] = ()
    with pytest.raises(ValueError):
        vm.move_cum[0] = 0.3


@pytest.mark.parametrize("y,periods,expected", [((5,), (2,), (1,)), ((-1,), (2,), (1,)),
                                                ((3, 7), (2, 3), (1, 1))])
def test_class_of(y, periods, expected):
    assert mb.class_of(y, periods) == expected


def test_class_of_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mb.class_of((1, 2), (2,))


@given(st.lists(st.integers(1, 5), min_size=1, max_size=3).flatmap(
    lambda ks: st.tuples(st.just(tuple(ks)), st.integers(0, int(np.prod(ks)) - 1))))
def test_class_index_bijection(args):
    periods, idx = args
    cls = mb.class_tuple(idx, periods)
    assert mb.class_index(cls, periods) == idx
    assert mb.all_classes(periods)[idx] == cls


@given(st.lists(st.tuples(st.integers(-10**6, 10**6), st.integers(1, 7)), min_size=1, max_size=3),
       st.integers(0, 2))
def test_class_periodicity(pairs, axis):
    y = [a for a, _ in pairs]
    periods = [k for _, k in pairs]
    axis %= len(y)
    shifted = list(y)
    shifted[axis] += periods[axis]
    assert mb.class_of(shifted, periods) == mb.class_of(y, periods)
    assert all(0 <= c < k for c, k in zip(mb.class_of(y, periods), periods))


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_mean_slide_fig1a(p):
    vm = mb.validate(mb.fig1a(p))
    assert mb.mean_slide(vm, "R", 0) == pytest.approx([0.0])
    assert mb.mean_slide(vm, "R", 1) == pytest.approx([0.0])
    assert mb.mean_slide(vm, "L", 0) == pytest.approx([-(1 - p)])
    assert mb.mean_slide(vm, "L", 1) == pytest.approx([-p])


def test_no_slide_membrane_has_zero_mean_slide():
    for spec in (mb.transparent(3), mb.homogeneous(0.2, 0.7, m=3)):
        assert np.all(mb.validate(spec).mean_slides() == 0)


@pytest.mark.parametrize("p", P_GRID)
def test_builtins_validate(p):
    for spec in (mb.fig1a(p), mb.fig1b(p), mb.homogeneous(p, 1 - p), mb.homogeneous(p, p, m=3)):
        mb.validate(spec)
    mb.validate(mb.transparent())


def test_transparent_kernel():
    vm = mb.validate(mb.transparent())
    assert vm.moves("L", 0) == (mb.Move("R", (0,), 1.0),)
    assert vm.moves("R", 0) == (mb.Move("L", (0,), 1.0),)


def test_homogeneous_half_is_fair_coin():
    vm = mb.validate(mb.homogeneous(0.5, 0.5))
    for side in "LR":
        assert sorted(vm.moves(side, 0)) == sorted([mb.Move("R", (0,), 0.5), mb.Move("L", (0,), 0.5)])


def test_builtin_lookup():
    assert mb.builtin("fig1a(0.25)").name == "fig1a(0.25)"
    assert mb.builtin("homogeneous(0.2, 0.9)").kernel == mb.homogeneous(0.2, 0.9).kernel
    assert mb.builtin("transparent").name == "transparent"
    with pytest.raises(UnknownBuiltin):
        mb.builtin("fig9(0.5)")
    with pytest.raises(KeyError):
        mb.builtin("nope")


def test_json_round_trip(tmp_path):
    doc = mb.membrane_to_dict(mb.fig1a(0.3))
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    vm = mb.load_membrane(path)
    ref = mb.validate(mb.fig1a(0.3))
    assert np.array_equal(vm.move_prob, ref.move_prob)
    assert np.array_equal(vm.move_slide, ref.move_slide)
    assert mb.load_membrane("builtin:fig1a(0.3)").name == "fig1a(0.3)"


def test_json_format_from_interface_doc():
    doc = {"m": 2, "periods": [1], "kernel": [
        {"side": "L", "class": [0], "moves": [{"exit": "R", "slide": [0], "prob": 0.5},
                                              {"exit": "L", "slide": [-1], "prob": 0.5}]},
        {"side": "R", "class": [0], "moves": [{"exit": "R", "slide": [0], "prob": 1.0}]}]}
    vm = mb.load_membrane(doc)
    assert mb.mean_slide(vm, "L", 0) == pytest.approx([-0.5])


def test_periodic_environment():
    env = mb.environment_from_dict({"type": "periodic", "p": [0.3, 0.9]})
    assert env.m == 2 and env.mean == pytest.approx(0.6)
    assert env.p((4,)) == 0.3 and env.p((-1,)) == 0.9
    vm = env.as_membrane()
    assert vm.moves("L", 1) == vm.moves("R", 1)


def test_iid_environment_is_deterministic():
    env = mb.environment_from_dict({"type": "iid", "law": {"bernoulli_values": [0.2, 0.8],
                                                            "weights": [0.5, 0.5]}, "seed": 42})
    ys = np.arange(-500, 500).reshape(-1, 1)
    a = env.p_many(ys)
    assert np.array_equal(a, env.p_many(ys))
    assert env.p((17,)) == a[517]
    assert set(np.unique(a)) <= {0.2, 0.8}
    other = mb.IIDEnvironment([0.2, 0.8], [0.5, 0.5], seed=43)
    assert not np.array_equal(a, other.p_many(ys))


def test_environment_rejects_bad_values():
    with pytest.raises(ValueError):
        mb.PeriodicEnvironment(np.array([0.3, 1.2]))
    with pytest.raises(ValueError):
        mb.IIDEnvironment([0.2, 0.8], [0.5, 0.6], seed=0)
