from fractions import Fraction as F
import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from kochtrace.boundary import BoundaryData
from kochtrace.bvfun import bv_norm, clamp_W, gamma, trace_equals
from kochtrace.errors import ResourceLimitError
from kochtrace.trace_solver import (
    PWLConvex,
    random_step_data,
    tilde_d,
    trace_norm,
    trace_norm_bruteforce,
    verify_trace_oracle,
)
from kochtrace.tree import Arc, BoundaryPoint, VertexId, cylinder_interval, vertices_at


def bp(x):
    return BoundaryPoint.from_position(F(x))


def test_cylinder_indicator_norm():
    for n in range(1, 5):
        for v in list(vertices_at(n))[:5]:
            g = BoundaryData.indicator(Arc.of_vertex(v))
            norm, f = trace_norm(g)
            assert norm == F(1, 3**n)
            # the subtree indicator is an optimal competitor
            assert bv_norm(gamma(v)) == norm
            assert trace_equals(f, g)


def test_zero_data():
    norm, f = trace_norm(BoundaryData(()))
    assert norm == 0 and not f.coeffs
    assert trace_norm_bruteforce(BoundaryData(())) == 0


def test_bruteforce_single_cylinder():
    v = VertexId((3, 2))
    assert trace_norm_bruteforce(BoundaryData.indicator(Arc.of_vertex(v))) == F(1, 9)


def test_two_arc_depth_two_matches():
    a, b = cylinder_interval(VertexId((0, 1))), cylinder_interval(VertexId((2, 4)))
    g = BoundaryData(((Arc.between(a.start, a.end), 2), (Arc.between(b.start, b.end), -1)))
    assert trace_norm(g)[0] == trace_norm_bruteforce(g, 2)


def test_bruteforce_caps():
    g = BoundaryData.indicator(Arc.of_vertex(VertexId((0, 1, 1, 1, 1))))
    with pytest.raises(ResourceLimitError):
        trace_norm_bruteforce(g, 4)
    with pytest.raises(ResourceLimitError):
        trace_norm_bruteforce(g, 5)


def test_oracle_agreement():
    rows = verify_trace_oracle(3, 60, seed=1)
    assert all(r[3] for r in rows)


def test_minimizer_is_clamp_invariant():
    rng = random.Random(2)
    for _ in range(50):
        g = random_step_data(rng, 4, 3)
        norm, f = trace_norm(g)
        assert bv_norm(f) == norm
        assert bv_norm(clamp_W(f, g)) == norm


def test_tilde_d_examples():
    for n in range(1, 5):
        v = list(vertices_at(n))[3]
        iv = cylinder_interval(v)
        assert tilde_d(bp(iv.start), bp(iv.end % 1)) == F(1, 3**n)
    assert tilde_d(bp(F(1, 12)), bp(F(1, 12))) == 0
    x, y = bp(F(1, 48)), bp(F(31, 48))
    assert tilde_d(x, y) == tilde_d(y, x)


def test_tilde_d_metric_axioms_depth_two():
    pts = sorted({cylinder_interval(v).start for v in vertices_at(2)})
    pts = [bp(p) for p in pts[::2]]
    for x, y, z in itertools.combinations(pts, 3):
        assert tilde_d(x, y) <= tilde_d(x, z) + tilde_d(z, y)
        assert tilde_d(x, z) <= tilde_d(x, y) + tilde_d(y, z)
        assert tilde_d(y, z) <= tilde_d(y, x) + tilde_d(x, z)
        assert tilde_d(x, y) > 0


def test_tilde_d_triangle_sampled_depth_four():
    rng = random.Random(9)
    pts = sorted({cylinder_interval(v).start for v in vertices_at(4)})
    for _ in range(150):
        x, y, z = (bp(p) for p in rng.sample(pts, 3))
        assert tilde_d(x, y) <= tilde_d(x, z) + tilde_d(z, y)


def _pwl(points, left, right):
    xs, ys = zip(*points)
    return PWLConvex(tuple(map(F, xs)), tuple(map(F, ys)), F(left), F(right))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(1, 4)), min_size=1, max_size=4),
       st.integers(1, 6))
def test_pwl_algebra(terms, w):
    G = PWLConvex.constant()
    for c, a in terms:
        G = G + PWLConvex.abs_term(a, c)
        assert G.is_convex()
    clipped, lo, hi = G.clip(w)
    assert clipped.is_convex()
    for t in range(-8, 9):
        assert clipped(t) <= G(t)
        # the clip value is attained by clamping t into [lo, hi]
        s = t if lo is None or t >= lo else lo
        s = s if hi is None or s <= hi else hi
        assert clipped(t) == G(s) + w * abs(s - t)
    huge, lo, hi = G.clip(10**6)
    assert all(huge(t) == G(t) for t in range(-8, 9)) and lo is None and hi is None


def test_pwl_minimum():
    G = PWLConvex.abs_term(1, 2) + PWLConvex.abs_term(1, 5)
    value, lo, hi = G.minimum()
    assert value == 3 and (lo, hi) == (2, 5)
