from fractions import Fraction as F

import pytest

from kochtrace.boundary import BoundaryData
from kochtrace.errors import ValidationError
from kochtrace.tree import Arc, BoundaryPoint, Side, VertexId, cylinder_interval


def test_pieces_tile_circle():
    g = BoundaryData(((Arc.between(F(1, 48), F(1, 6)), F(2)),))
    assert g.pieces == ((0, F(1, 48), 0), (F(1, 48), F(1, 6), 2), (F(1, 6), 1, 0))
    assert g.breakpoints == [F(1, 48), F(1, 6)]


def test_wrapping_arc():
    g = BoundaryData.indicator(Arc.between(F(5, 6), F(1, 6)))
    assert g.value(BoundaryPoint.from_position(F(0))) == 1
    assert g.value(BoundaryPoint.from_position(F(1, 6))) == 0
    assert g.value(BoundaryPoint.from_position(F(1, 6), Side.BEFORE)) == 1
    assert g.breakpoints == [F(1, 6), F(5, 6)]


def test_overlapping_arcs_rejected():
    with pytest.raises(ValidationError):
        BoundaryData(((Arc.between(0, F(1, 3)), 1), (Arc.between(F(1, 6), F(1, 2)), 1)))


def test_from_overlapping_sums():
    g = BoundaryData.from_overlapping([(Arc.between(0, F(1, 3)), 1),
                                      (Arc.between(F(1, 6), F(1, 2)), 2)])
    assert [v for _, _, v in g.pieces] == [1, 3, 2, 0]


def test_constant_on_vertex_and_depth():
    v = VertexId((1, 2, 3))
    g = BoundaryData.indicator(Arc.of_vertex(v), F(1, 2))
    assert g.constant_on_vertex(v) == F(1, 2)
    assert g.constant_on_vertex(VertexId((1, 2))) is None
    assert g.reduction_depth == 3


def test_canonical_merges_and_json_roundtrip():
    a = cylinder_interval(VertexId((0, 1)))
    b = cylinder_interval(VertexId((0, 2)))
    g = BoundaryData(((Arc.between(a.start, a.end), 1), (Arc.between(b.start, b.end), 1)))
    assert len(g.canonical().terms) == 1
    assert BoundaryData.from_json(g.to_json()) == g


def test_sub_and_shift():
    g = BoundaryData.indicator(Arc.between(0, F(1, 2)))
    assert (g - g).is_zero
    assert g.shifted(1).coefficients() == {1, 2}


def test_circle_indicator_is_constant():
    g = BoundaryData.indicator(Arc.circle(), 3)
    assert g.reduction_depth == 0 and g.coefficients() == {3}
