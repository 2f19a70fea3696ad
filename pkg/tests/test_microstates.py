from __future__ import annotations

import json

import numpy as np
import pytest
from conftest import random_tuple
from hypothesis import given
from hypothesis import strategies as st

from topfree.linalg import MatrixTuple, ShapeError
from topfree.microstates import (
    Constraint,
    MicrostateSpec,
    TraceSpec,
    constraint_norms,
    direct_sum,
    is_microstate,
    is_semi_microstate,
    is_trace_microstate,
    membership_mask,
    moments_of,
    project_presence,
    semicircular_moments,
    trace_mask,
    tracestate_metric,
    tracestate_tail_bound,
)
from topfree.ncpoly import NCPolynomial, parse_poly
from topfree.presets import semicircular
from topfree.randmat import SamplerConfig, gue_array

seeds = st.integers(0, 2**32 - 1)


def one_var(target=1.0, eps=0.1, k=2):
    return MicrostateSpec.standard([target], epsilon=eps, k=k)


def test_constraint_validation():
    with pytest.raises(ValueError):
        Constraint(parse_poly("X1", 1), -1.0)
    with pytest.raises(ValueError):
        Constraint(parse_poly("X1", 1), float("inf"))


def test_spec_validation():
    with pytest.raises(ValueError):
        MicrostateSpec(1, 0, (Constraint(parse_poly("X1*X2", 2), 1.0),), 0.1, 2, 1.0)
    with pytest.raises(ValueError):
        one_var(eps=0.0)
    with pytest.raises(ValueError):
        one_var(k=0)


def test_standard_sets_M():
    spec = MicrostateSpec.standard([1.0, 3.0], epsilon=0.25, k=4, n=1)
    assert (spec.n, spec.m) == (1, 1)
    assert spec.M == pytest.approx(3.5)


def test_membership_examples():
    spec = one_var()
    assert is_microstate(spec, MatrixTuple.of(np.diag([1.05, -0.5])))
    assert not is_microstate(spec, MatrixTuple.of(np.diag([1.2, 0.0])))
    assert not is_microstate(spec, MatrixTuple.of(np.diag([0.5, 0.0])))
    assert is_semi_microstate(spec, MatrixTuple.of(np.diag([0.5, 0.0])))
    assert not is_semi_microstate(spec, MatrixTuple.of(np.diag([1.2, 0.0])))


def test_commutator_constraint():
    spec = MicrostateSpec.standard([1.0, 1.0], [(parse_poly("X1*X2 - X2*X1", 2), 0.0)], epsilon=0.05, k=2)
    assert not is_microstate(spec, MatrixTuple.of(np.diag([1.0, -1.0]), np.diag([0.5, 0.3])))
    commuting = MatrixTuple.of(np.diag([1.0, -1.0]), np.diag([1.0, 0.3]))
    assert is_microstate(spec, commuting)
    sx, sz = np.array([[0, 1], [1, 0]]), np.diag([1.0, -1.0])
    assert not is_microstate(spec, MatrixTuple.of(sx, sz))
    assert is_semi_microstate(MicrostateSpec.standard([1.0, 1.0], epsilon=0.05, k=2), MatrixTuple.of(sx, sz))


def test_dimension_and_arity_checks(rng):
    spec = one_var(k=3)
    with pytest.raises(ShapeError):
        is_microstate(spec, MatrixTuple(random_tuple(rng, 1, 2)))
    with pytest.raises(ShapeError):
        is_microstate(spec, MatrixTuple(random_tuple(rng, 2, 3)))


def test_gue_is_semicircular_microstate():
    spec = semicircular(1, k=200, epsilon=0.3)
    x = gue_array(SamplerConfig(200, 1, 12), 0, 50)
    assert membership_mask(spec, x).mean() >= 0.9


def test_trace_examples():
    ts = TraceSpec(1, {"X1": 0.0, "X1*X1": 1.0}, 0.01, 4, 1.5)
    assert is_trace_microstate(ts, MatrixTuple.of(np.diag([1.0, -1.0])))
    assert not is_trace_microstate(ts, MatrixTuple.of(np.diag([1.0, 0.0])))
    bounded = TraceSpec(1, {"X1*X1": 1.0}, 0.05, 4, 1.0)
    assert is_trace_microstate(bounded, MatrixTuple.of(np.diag([1.0, -1.0])))
    assert not is_trace_microstate(bounded, MatrixTuple.of(np.diag([1.01, -0.99])))


def test_trace_spec_validation():
    with pytest.raises(ValueError):
        TraceSpec(1, {(1, 1, 1): 0.0}, 0.1, 2, 1.0)
    with pytest.raises(ValueError):
        TraceSpec(1, {(1, 1): 5.0}, 0.1, 2, 1.0)
    with pytest.raises(ValueError):
        TraceSpec(1, {(2,): 0.0}, 0.1, 2, 1.0)


def test_gue_is_trace_microstate_for_semicircle_moments():
    ts = TraceSpec(1, {(1,): 0.0, (1, 1): 1.0, (1, 1, 1): 0.0, (1, 1, 1, 1): 2.0}, 0.1, 4, 3.0)
    x = gue_array(SamplerConfig(100, 1, 13), 0, 50)
    assert trace_mask(ts, x).mean() >= 0.95


def test_non_palindromic_traces_may_be_complex(rng):
    x = random_tuple(rng, 3, 4)
    mom = moments_of(MatrixTuple(x), 3)
    ts = TraceSpec(3, {(1, 2, 3): mom[(1, 2, 3)]}, 1e-9, 3, 10.0)
    assert is_trace_microstate(ts, MatrixTuple(x))


def test_project_presence_and_direct_sum(rng):
    t = MatrixTuple(random_tuple(rng, 3, 2))
    assert project_presence(t, 2).arity == 2
    with pytest.raises(ValueError):
        project_presence(t, 4)
    s = direct_sum(t, MatrixTuple(random_tuple(rng, 3, 3)))
    assert s.dim == 5
    np.testing.assert_array_equal(s.data[:, :2, :2], t.data)
    with pytest.raises(ShapeError):
        direct_sum(t, MatrixTuple(random_tuple(rng, 2, 2)))


@st.composite
def spec_and_pair(draw):
    r = np.random.default_rng(draw(seeds))
    k1, k2 = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    x, y = random_tuple(r, 2, k1), random_tuple(r, 2, k2)
    p = draw(st.sampled_from(["X1", "X1*X2 + X2*X1", "X1*X1 - X2", "X1 + i*X2"]))
    poly = parse_poly(p, 2)
    cons = (Constraint(poly, 1.0),)
    nx = constraint_norms(MicrostateSpec(2, 0, cons, 1.0, k1, 1.0), x[None])[0, 0]
    ny = constraint_norms(MicrostateSpec(2, 0, cons, 1.0, k2, 1.0), y[None])[0, 0]
    target = 0.5 * (nx + ny)
    # stay off the exact boundary, where rounding decides membership
    eps = abs(nx - ny) / 2 + draw(st.one_of(st.floats(-0.2, -1e-6), st.floats(1e-6, 0.2)))
    eps = max(eps, 1e-3)
    spec = MicrostateSpec(2, 0, (Constraint(poly, target),), eps, k1, 1.0)
    return spec, x, y


@given(spec_and_pair())
def test_direct_sum_inclusion(sp):
    spec, x, y = sp
    k1, k2 = x.shape[-1], y.shape[-1]
    in_x = is_microstate(spec, MatrixTuple(x))
    in_y = is_microstate(spec.with_k(k2), MatrixTuple(y))
    if in_x and in_y:
        assert is_microstate(spec.with_k(k1 + k2), direct_sum(MatrixTuple(x), MatrixTuple(y)))


@given(spec_and_pair(), st.floats(1.0, 3.0))
def test_two_sided_inside_semi_and_eps_monotone(sp, grow):
    spec, x, _ = sp
    t = MatrixTuple(x)
    if is_microstate(spec, t):
        assert is_semi_microstate(spec, t)
        assert is_microstate(spec.with_epsilon(spec.epsilon * grow), t)


@given(spec_and_pair())
def test_membership_is_unitarily_invariant(sp):
    spec, x, _ = sp
    k = x.shape[-1]
    r = np.random.default_rng(0)
    q, _ = np.linalg.qr(r.standard_normal((k, k)) + 1j * r.standard_normal((k, k)))
    rot = q @ x @ q.conj().T
    a = constraint_norms(spec, x[None])
    b = constraint_norms(spec, rot[None])
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_metric_examples():
    base = {(1,) * p: 0.0 for p in range(1, 6)}
    moved = dict(base)
    moved[(1,)] = 0.3
    assert tracestate_metric(base, moved, M=1.0, arity=1, P_max=5) == pytest.approx(0.15)
    assert tracestate_metric(base, base, M=1.0, arity=1, P_max=5) == 0.0
    with pytest.raises(ValueError):
        tracestate_metric({(1,): 0.0}, {(1,): 0.0}, M=1.0, arity=1, P_max=2)


@given(seeds)
def test_metric_is_symmetric_and_triangular(seed):
    r = np.random.default_rng(seed)
    ms = [moments_of(MatrixTuple(random_tuple(r, 2, 3, scale=0.3)), 4) for _ in range(3)]
    d = lambda a, b: tracestate_metric(a, b, M=2.0, arity=2, P_max=4)
    assert d(ms[0], ms[1]) == pytest.approx(d(ms[1], ms[0]))
    assert d(ms[0], ms[2]) <= d(ms[0], ms[1]) + d(ms[1], ms[2]) + 1e-12


def test_tail_bound_controls_truncation():
    assert tracestate_tail_bound(20) == pytest.approx(2.0**-19)
    x = MatrixTuple.of(np.diag([1.0, -0.4, 0.7]))
    y = MatrixTuple.of(np.diag([-1.0, 0.9, 0.2]))
    mx, my = moments_of(x, 20), moments_of(y, 20)
    full = tracestate_metric(mx, my, M=1.0, arity=1, P_max=20)
    for P in (2, 5, 8):
        assert 0 <= full - tracestate_metric(mx, my, M=1.0, arity=1, P_max=P) <= tracestate_tail_bound(P)


def test_semicircular_moments():
    mom = semicircular_moments(2, 6)
    assert mom[(1, 1)] == 1 and mom[(1, 1, 1, 1)] == 2 and mom[(1,) * 6] == 5
    assert mom[(1, 2, 1, 2)] == 0 and mom[(1, 1, 2, 2)] == 1 and mom[(1, 2, 2, 1)] == 1
    assert mom[(1, 2, 3)[:2]] == 0


def test_gue_moments_approach_free_semicircular():
    x = gue_array(SamplerConfig(300, 2, 3), 0, 1)[0]
    got = moments_of(MatrixTuple(x), 4)
    ref = semicircular_moments(2, 4)
    assert max(abs(got[w] - ref[w]) for w in ref) < 0.15


def test_json_round_trip():
    spec = MicrostateSpec.standard([1.0, 2.0], [(parse_poly("X1*X2 + X2*X1", 2), 0.5)], n=1, epsilon=0.2, k=3)
    again = MicrostateSpec.from_json(json.dumps(spec.to_json()))
    assert again == spec
    assert MicrostateSpec.from_json(spec.to_json()) == spec


def test_coordinate_bounds():
    spec = MicrostateSpec.standard([1.0], [(NCPolynomial.linear([0.5], 1), 1.0)], epsilon=0.1, k=2)
    assert spec.coordinate_bounds()[0] == pytest.approx(1.1)
    free = MicrostateSpec(1, 0, (Constraint(parse_poly("X1*X1", 1), 1.0),), 0.1, 2, 1.0)
    assert free.coordinate_bounds() is None
