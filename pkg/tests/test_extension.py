from fractions import Fraction as F
import random

import numpy as np
import pytest

from kochtrace.boundary import BoundaryData
from kochtrace.bvfun import bv_norm, gamma, trace_equals, trace_limit
from kochtrace.errors import UnsupportedInputError, ValidationError
from kochtrace.extension import (
    Samples,
    StepFunction,
    density_approximation,
    density_decay,
    indicator_extension,
    lipschitz_monotone_boundary,
    monotone_constants,
    monotone_extension,
    right_inverse_S,
)
from kochtrace.trace_solver import random_step_data, trace_norm
from kochtrace.tree import (
    Arc,
    BoundaryPoint,
    Side,
    VertexId,
    children,
    cylinder_interval,
    directional_d,
    metric_dK,
    vertices_at,
)

PANTS = VertexId((0, 1))


def bp(x):
    return BoundaryPoint.from_position(F(x))


def test_indicator_of_cylinder():
    for n in range(1, 5):
        v = list(vertices_at(n))[-2]
        f = indicator_extension(Arc.of_vertex(v))
        assert f == gamma(v)
        assert bv_norm(f) == F(1, 3**n)


def test_indicator_two_cylinders():
    a, b = VertexId((0, 1)), VertexId((0, 2, 0))
    arc = Arc.between(cylinder_interval(a).start, cylinder_interval(b).end)
    assert bv_norm(indicator_extension(arc)) == F(1, 9) + F(1, 27)


def test_indicator_full_circle():
    f = indicator_extension(Arc.circle())
    assert bv_norm(f) == 0 and f.baseline == 1


def test_indicator_trace_exhaustive_depth_four():
    rng = random.Random(4)
    ends = sorted({cylinder_interval(v).start for v in vertices_at(3)})
    probes = [cylinder_interval(v).start for v in vertices_at(5)]
    for _ in range(6):
        a, b = rng.sample(ends, 2)
        arc = Arc.between(a, b)
        h = indicator_extension(arc)
        assert trace_equals(h, BoundaryData.indicator(arc))
        for pos in probes[::7]:
            for side in Side:
                p = BoundaryPoint.from_position(pos, side)
                assert trace_limit(h, p) == (1 if arc.contains(p) else 0)


def _staircase():
    iv = cylinder_interval(PANTS)
    kids = [cylinder_interval(c).start for c in children(PANTS)]
    arc = Arc.between(iv.start, iv.end)
    return StepFunction(arc, 0, tuple((bp(s), 1) for s in kids[1:]))


def test_monotone_zero():
    F0 = StepFunction(Arc.of_vertex(PANTS), 0)
    ext = monotone_extension(F0)
    assert not ext.function.coeffs and ext.norm == 0 and ext.constant is None


def test_monotone_single_jump():
    iv = cylinder_interval(PANTS)
    s = cylinder_interval(children(PANTS)[2]).start
    step = StepFunction(Arc.between(iv.start, iv.end), 0, ((bp(s), 1),))
    ext = monotone_extension(step)
    sub = Arc.between(s, iv.end)
    assert ext.norm == directional_d(sub) == F(3, 27)
    assert ext.norm <= metric_dK(bp(iv.start), bp(iv.end))


def test_monotone_staircase_by_hand():
    # jumps at the starts of children 1..4 give tails of 4, 3, 2, 1 cylinders of generation 3
    ext = monotone_extension(_staircase())
    assert ext.chain_bound == F(4 + 3 + 2 + 1, 27)
    assert ext.norm == F(1 + 2 + 3 + 4, 27)
    assert ext.constant == F(5, 6)
    assert trace_equals(ext.function, _staircase().as_boundary_data())


def test_monotone_linearity():
    a = _staircase()
    b = StepFunction(a.arc, 2, a.jumps[:2])
    combo = StepFunction(a.arc, 2 * a.base + 3 * b.base,
                         tuple((p, 2 * d) for p, d in a.jumps) + tuple((p, 3 * d) for p, d in b.jumps))
    lhs = monotone_extension(combo).function
    rhs = monotone_extension(a).function.scaled(2) + monotone_extension(b).function.scaled(3)
    assert lhs == rhs


def test_monotone_rejections():
    iv = cylinder_interval(PANTS)
    arc = Arc.between(iv.start, iv.end)
    kids = [cylinder_interval(c).start for c in children(PANTS)]
    with pytest.raises(ValidationError):
        monotone_extension(StepFunction(arc, 0, ((bp(kids[1]), 1), (bp(kids[2]), -1))))
    with pytest.raises(ValidationError):
        StepFunction(arc, 0, ((bp(F(1, 2)), 1),))
    with pytest.raises(UnsupportedInputError):
        monotone_extension(StepFunction(arc.reversed(), 1))


def test_monotone_constants_below_chain_limit():
    rows = monotone_constants([3, 4], 20, seed=3)
    assert all(0 < r[2] <= r[3] <= F(5, 3) for r in rows)


def test_bisection_constant():
    arc = Arc.of_vertex(PANTS)
    res = lipschitz_monotone_boundary(2, 2, arc, 3)
    assert [v for _, v in res.samples] == [2, 2]


def test_bisection_first_split():
    res = lipschitz_monotone_boundary(0, 1, Arc.of_vertex(PANTS), 1)
    assert [v for _, v in res.samples] == [0, F(1, 2), 1]


def test_bisection_dyadic():
    res = lipschitz_monotone_boundary(0, 1, Arc.between(0, F(1, 3)), 3)
    values = [v for _, v in res.samples]
    assert values == [F(k, 8) for k in range(9)]
    assert res.lipschitz > 0 and res.worst_balance > 0


def test_right_inverse_examples():
    v = VertexId((4, 2, 1))
    f = right_inverse_S(BoundaryData.indicator(Arc.of_vertex(v)))
    assert bv_norm(f) == F(1, 27) and f.coeffs == gamma(v).coeffs
    assert not right_inverse_S(BoundaryData(())).coeffs


def test_right_inverse_trace_identity():
    rng = random.Random(8)
    for _ in range(40):
        g = random_step_data(rng, 3)
        f = right_inverse_S(g)
        assert trace_equals(f, g)
        for v in list(vertices_at(5))[::11]:
            p = BoundaryPoint.from_position(cylinder_interval(v).start)
            assert trace_limit(f, p) == g.value(p)
        assert bv_norm(f) == trace_norm(g)[0]


def test_density_constant():
    s = Samples(4, np.full(len(list(vertices_at(4))), 3, dtype=np.int64), 2)
    res = density_approximation(s, 2)
    assert res.norm == 0
    assert res.g_k.coefficients() == {F(3, 2)}


def test_density_h_has_trace_residual():
    s = Samples.circle_distance(5, F(1, 3))
    res = density_approximation(s, 2)
    h = res.to_tree_function()
    assert bv_norm(h) == res.norm


def test_density_dK_decay():
    norms = [density_approximation(Samples.dK_to_point(k + 4, F(0)), k).norm for k in (2, 3, 4)]
    ratios = [float(b / a) for a, b in zip(norms, norms[1:])]
    assert all(abs(r - 4 / 9) < 0.05 for r in ratios)


def test_density_linear_bound():
    res = density_approximation(Samples.curve_linear(7, 2, 1), 3)
    assert res.constant is not None and res.constant < 10


def test_density_rows():
    rows = density_decay([2, 3], names=("tent",))
    assert rows[0][3] is None and rows[1][3] < 4 / 9 + 0.05


def test_density_too_coarse():
    with pytest.raises(UnsupportedInputError):
        density_approximation(Samples.dK_to_point(3, F(0)), 4)
