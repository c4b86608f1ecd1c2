from fractions import Fraction as F
import random

import pytest
from hypothesis import given, settings, strategies as st

from kochtrace.boundary import BoundaryData
from kochtrace.bvfun import (
    TreeFunction,
    bv_norm,
    bv_norm_by_values,
    clamp_W,
    from_values,
    gamma,
    trace_equals,
    trace_limit,
    value_at,
)
from kochtrace.errors import ContractViolation, ValidationError
from kochtrace.extension import indicator_extension
from kochtrace.tree import ROOT, Arc, BoundaryPoint, Side, VertexId, children, cylinder_interval, vertices_at

A = VertexId((2, 1))
B = VertexId((2, 1, 0))


def vertex_strategy(max_gen=4):
    return st.lists(st.integers(0, 4), min_size=1, max_size=max_gen).map(_clip_path)


def _clip_path(digits):
    v = ROOT
    for d in digits:
        kids = children(v)
        v = kids[d % len(kids)]
    return v


def test_gamma_norm():
    for n in range(1, 6):
        v = next(iter(vertices_at(n)))
        assert bv_norm(gamma(v)) == F(1, 3**n)


def test_constant_has_zero_norm():
    assert bv_norm(TreeFunction({}, 7)) == 0


def test_nested_pair_norm():
    f = gamma(A) + gamma(B, -1)
    assert bv_norm(f) == F(1, 9) + F(1, 27)


def test_values():
    f = gamma(A, 2) + gamma(B, 3)
    assert value_at(f, VertexId((2, 1, 0, 1))) == 5
    assert value_at(f, VertexId((2, 1, 1))) == 2
    assert value_at(f, VertexId((0,))) == 0


def test_trace_limit_gamma():
    iv = cylinder_interval(A)
    inside = BoundaryPoint.from_position(iv.start)
    assert trace_limit(gamma(A), inside) == 1
    assert trace_limit(gamma(A), BoundaryPoint.from_position(iv.start, Side.BEFORE)) == 0
    assert trace_limit(gamma(A), BoundaryPoint.from_position(F(0))) == 0


def test_trace_limit_indicator_extension():
    arc = Arc.between(F(1, 48), F(31, 48))
    h = indicator_extension(arc)
    for v in vertices_at(4):
        p = BoundaryPoint.from_position(cylinder_interval(v).start)
        for side in Side:
            q = BoundaryPoint(p.digits, side)
            assert trace_limit(h, q) == (1 if arc.contains(q) else 0)


def test_from_values_requires_closed_keys():
    with pytest.raises(ValidationError):
        from_values({ROOT: F(0), B: F(1)})


def test_json_roundtrip():
    f = gamma(A, F(1, 3)) + gamma(B, -2)
    assert TreeFunction.from_json(f.to_json()) == f


def test_clamp_fixed_point():
    arc = Arc.of_vertex(A)
    g = BoundaryData.indicator(arc)
    f = gamma(A)
    assert clamp_W(f, g) == f


def test_clamp_overshoot():
    arc = Arc.of_vertex(A)
    g = BoundaryData.indicator(arc)
    f = gamma(A) + gamma(B, 1)
    for kid in children(B):
        f = f + gamma(kid, -1)
    assert trace_equals(f, g)
    w = clamp_W(f, g)
    assert value_at(w, B) == 1
    assert bv_norm(w) < bv_norm(f)
    assert trace_equals(w, g)


def test_clamp_rejects_wrong_trace():
    g = BoundaryData.indicator(Arc.of_vertex(A))
    with pytest.raises(ContractViolation):
        clamp_W(gamma(B), g)


def _random_function_with_trace(rng, g, depth):
    """A clamped function with trace g perturbed by zero-trace bumps above the depth."""
    f = clamp_W(indicator_extension(Arc.circle()).scaled(0) + _minimal(g), g, check=False)
    for _ in range(rng.randint(1, 4)):
        gen = rng.randint(1, depth)
        v = rng.choice(list(vertices_at(gen)))
        c = F(rng.randint(-3, 3), rng.randint(1, 2))
        f = f + gamma(v, c)
        for kid in children(v):
            f = f + gamma(kid, -c)
    return f


def _minimal(g):
    from kochtrace.trace_solver import trace_norm
    return trace_norm(g)[1]


def test_clamp_random_trials():
    from kochtrace.trace_solver import random_step_data

    rng = random.Random(5)
    for _ in range(150):
        g = random_step_data(rng, 3)
        f = _random_function_with_trace(rng, g, 3)
        assert trace_equals(f, g)
        w = clamp_W(f, g)
        assert trace_equals(w, g)
        assert bv_norm(w) <= bv_norm(f)
        assert clamp_W(w, g) == w


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(vertex_strategy(), st.integers(-4, 4)), max_size=6), st.integers(-3, 3))
def test_abel_identity_and_quotient(terms, c):
    f = TreeFunction({}, 0)
    for v, a in terms:
        f = f + gamma(v, a)
    assert bv_norm(f) == bv_norm_by_values(f)
    shifted = f + TreeFunction({}, c)
    assert bv_norm(shifted) == bv_norm(f)
    for v, _ in terms:
        assert value_at(shifted, v) - value_at(f, v) == c
