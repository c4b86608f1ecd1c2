from fractions import Fraction as F
import xml.etree.ElementTree as ET

import pytest

from kochtrace.errors import ResourceLimitError, ValidationError
from kochtrace.geometry import (
    WhitneyPolygon,
    adjacency_graph,
    build_whitney_polygons,
    contact,
    export_svg,
    generate_koch,
    polygons_from_json,
    polygons_to_json,
    validate_whitney,
    verify_norm_equivalence,
)
from kochtrace.tree import ROOT, Kind, VertexId, children

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def polys3():
    return build_whitney_polygons(3)


def test_koch_segment_counts():
    assert generate_koch(0).segment_count == 3
    assert generate_koch(1).segment_count == 12
    k3 = generate_koch(3)
    assert k3.segment_count == 192
    assert k3.perimeter == 3 * F(4, 3)**3
    for n in range(5):
        k = generate_koch(n)
        assert k.is_closed() and k.is_simple()
        assert k.segment_count == 3 * 4**n


def test_koch_limits():
    with pytest.raises(ValueError):
        generate_koch(-1)
    with pytest.raises(ResourceLimitError):
        generate_koch(11)


def test_whitney_counts():
    assert len(build_whitney_polygons(0)) == 1
    p1 = build_whitney_polygons(1)
    assert len(p1) == 7
    assert all(p.kind is Kind.PANTS for p in p1 if not p.id.is_root)
    assert len(build_whitney_polygons(2)) == 37


def test_root_adjacency():
    g = adjacency_graph(build_whitney_polygons(1))
    assert sorted(g.neighbors(ROOT)) == sorted(children(ROOT))
    assert len(g.edges) == 6 + 6  # pants also share edges with their neighbours on both sides


def test_pants_adjacent_to_parent_and_children(polys3):
    g = adjacency_graph(polys3)
    v = VertexId((2, 1))
    nbrs = set(g.neighbors(v))
    assert v.parent in nbrs
    assert set(children(v)) <= nbrs
    for a, b in g.edges:
        assert a != b and g.length(a, b) == g.length(b, a) > 0


def test_parent_child_edges_form_tree(polys3):
    g = adjacency_graph(polys3)
    for p in polys3:
        if not p.id.is_root:
            assert g.length(p.id, p.id.parent) > 0


def test_point_contact_gives_no_edge():
    tri_a = WhitneyPolygon(VertexId((0,)), Kind.PANTS, ((F(0), F(0)), (F(1), F(0)), (F(0), F(1))))
    tri_b = WhitneyPolygon(VertexId((1,)), Kind.PANTS, ((F(1), F(0)), (F(2), F(0)), (F(1), F(1))))
    # the triangles meet only at the vertex (1, 0)
    assert contact(tri_a, tri_b) == "touch"
    assert adjacency_graph([tri_a, tri_b]).edges == {}


def test_json_roundtrip(polys3):
    back = polygons_from_json(polygons_to_json(polys3))
    assert [p.vertices for p in back] == [p.vertices for p in polys3]


def _count_svg(path, tag):
    root = ET.parse(path).getroot()
    return len(root.findall(f"{SVG}{tag}"))


def test_svg_exports(tmp_path):
    out = tmp_path / "w.svg"
    export_svg(build_whitney_polygons(2), out)
    assert _count_svg(out, "polygon") == 37
    export_svg([], tmp_path / "e.svg")
    assert ET.parse(tmp_path / "e.svg").getroot().tag == f"{SVG}svg"
    export_svg(generate_koch(1), tmp_path / "k.svg")
    line = ET.parse(tmp_path / "k.svg").getroot().find(f"{SVG}polyline")
    assert len(line.get("points").split()) == 12 + 1


def test_svg_deterministic(tmp_path):
    polys = build_whitney_polygons(2)
    export_svg(polys, tmp_path / "a.svg")
    export_svg(polys, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_validation_depth_three(polys3):
    report = validate_whitney(polys3)
    assert report.ok
    assert report.check("bounded_neighbours").details["root_shared_edges"] == 6
    sim = report.check("bilipschitz").details["similarity_classes"]
    assert sim == {"pants": 1, "palace": 1}
    table = report.check("volume_vs_distance").details["area_over_dist_sq"]
    assert table["pants"][2] == table["pants"][3]
    assert table["palace"][2] == table["palace"][3]


def test_validation_rejects_orphans(polys3):
    broken = [p for p in polys3 if p.id != VertexId((0,))]
    with pytest.raises(ValidationError) as err:
        validate_whitney(broken)
    assert "/0/0" in str(err.value.args) or err.value.args


def test_validation_rejects_overlap(polys3):
    moved = list(polys3)
    i = next(i for i, p in enumerate(moved) if p.id == VertexId((0, 1)))
    j = next(i for i, p in enumerate(moved) if p.id == VertexId((0, 2)))
    moved[j] = WhitneyPolygon(moved[j].id, moved[j].kind, moved[i].vertices)
    assert not validate_whitney(moved).check("disjoint_and_covering").holds


def test_norm_equivalence_small():
    rows = verify_norm_equivalence([3], 20, seed=1)
    depth, n, lo, hi, _ = rows[0]
    assert depth == 3 and n == 20 and 0 < lo <= hi
