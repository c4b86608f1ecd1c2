"""Koch snowflake approximants and an explicit self-similar Whitney covering.

Points are stored in the oblique lattice frame ``(a, b) -> a*nu1 + b*nu2`` with
``nu1 = (1, 0)`` and ``nu2 = (1/2, sqrt(3)/2)``, so every construction point
is rational.  In this frame the squared Euclidean length of ``(a, b)`` is
``a*a + a*b + b*b`` and areas carry a factor ``sqrt(3)``; areas below are
reported as rational multiples of ``sqrt(3)``.

The initial triangle has side 1, one side on the horizontal axis, and is
traversed counterclockwise from the origin.  The tree's torus position ``t``
corresponds to the arc fraction ``t + 1/12`` of the curve measured from the
origin; cylinder endpoints are reflex vertices of the approximants and pants
cylinders are the convex two-segment tips.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .boundary import _frac, frac_to_json
from .errors import ResourceLimitError, ValidationError
from .tree import ROOT, Kind, VertexId, children, vertices_at, _interval

Point = tuple[Fraction, Fraction]

DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
_DIR_ARRAY = np.array(DIRS, dtype=np.int64)
RHO = Fraction(1, 2)  # ray length at generation n is RHO * 3**-n
MAX_KOCH_DEPTH = 10
MAX_WHITNEY_DEPTH = 8
ARC_OFFSET = Fraction(1, 12)


# -- lattice-frame arithmetic -------------------------------------------------

def sq_norm(a, b) -> Fraction:
    """Squared Euclidean length of the oblique vector ``(a, b)``."""
    return a * a + a * b + b * b


def _dot(u: Point, v: Point) -> Fraction:
    return u[0] * v[0] + (u[0] * v[1] + u[1] * v[0]) / 2 + u[1] * v[1]


def _sub(p: Point, q: Point) -> Point:
    return (p[0] - q[0], p[1] - q[1])


def _cross(o: Point, p: Point, q: Point) -> Fraction:
    """Orientation of ``o, p, q`` (positive for a left turn)."""
    return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])


def lattice_length(v: Point) -> Fraction | None:
    """Euclidean length of a vector parallel to a lattice direction, else None."""
    a, b = v
    if a == 0 or b == 0 or a == -b:
        return max(abs(a), abs(b), abs(a + b))
    return None


def to_cartesian(p: Point) -> tuple[float, float]:
    return (float(p[0]) + float(p[1]) / 2, float(p[1]) * math.sqrt(3) / 2)


def point_segment_sq(x: Point, p: Point, q: Point) -> Fraction:
    d = _sub(q, p)
    dd = _dot(d, d)
    t = _dot(_sub(x, p), d) / dd if dd else Fraction(0)
    t = min(max(t, Fraction(0)), Fraction(1))
    foot = (p[0] + t * d[0], p[1] + t * d[1])
    diff = _sub(x, foot)
    return _dot(diff, diff)


def _segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    d1, d2 = _cross(q1, q2, p1), _cross(q1, q2, p2)
    d3, d4 = _cross(p1, p2, q1), _cross(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True

    def on(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return ((d1 == 0 and on(q1, q2, p1)) or (d2 == 0 and on(q1, q2, p2))
            or (d3 == 0 and on(p1, p2, q1)) or (d4 == 0 and on(p1, p2, q2)))


def segment_segment_sq(p1: Point, p2: Point, q1: Point, q2: Point) -> Fraction:
    if _segments_cross(p1, p2, q1, q2):
        return Fraction(0)
    return min(point_segment_sq(p1, q1, q2), point_segment_sq(p2, q1, q2),
               point_segment_sq(q1, p1, p2), point_segment_sq(q2, p1, p2))


def point_json(p: Point) -> list:
    return [frac_to_json(p[0]), frac_to_json(p[1])]


def point_from_json(obj) -> Point:
    return (_frac(obj[0]), _frac(obj[1]))


# -- Koch approximants ----------------------------------------------------------

@lru_cache(maxsize=4)
def koch_directions(n: int) -> np.ndarray:
    """Lattice direction index of every segment of ``K_n`` in curve order."""
    d = np.array([0, 2, 4], dtype=np.int64)
    for _ in range(n):
        d = ((d[:, None] + np.array([0, -1, 1, 0])) % 6).ravel()
    return d


@lru_cache(maxsize=4)
def koch_int_vertices(n: int) -> np.ndarray:
    """Vertices of ``K_n`` in units of ``3**-n``, starting at the origin."""
    steps = _DIR_ARRAY[koch_directions(n)]
    out = np.zeros((len(steps), 2), dtype=np.int64)
    np.cumsum(steps[:-1], axis=0, out=out[1:])
    return out


@dataclass(frozen=True, eq=False)
class KochPolyline:
    """The closed polyline ``K_n`` (first vertex not repeated)."""

    generation: int
    int_vertices: np.ndarray = field(repr=False)

    @property
    def scale(self) -> int:
        return 3**self.generation

    @property
    def segment_count(self) -> int:
        return len(self.int_vertices)

    @property
    def side_length(self) -> Fraction:
        return Fraction(1, self.scale)

    @property
    def perimeter(self) -> Fraction:
        return self.segment_count * self.side_length

    @property
    def vertices(self) -> list[Point]:
        s = self.scale
        return [(Fraction(int(a), s), Fraction(int(b), s)) for a, b in self.int_vertices]

    def is_closed(self) -> bool:
        steps = _DIR_ARRAY[koch_directions(self.generation)]
        return not steps.sum(axis=0).any()

    def is_simple(self) -> bool:
        # unit segments of the triangular lattice can only meet at lattice points
        return len(np.unique(self.int_vertices, axis=0)) == self.segment_count

    def to_json(self) -> dict:
        return {"generation": self.generation,
                "vertices": [point_json(p) for p in self.vertices]}


def generate_koch(n: int, max_depth: int = MAX_KOCH_DEPTH) -> KochPolyline:
    if n < 0:
        raise ValueError("generation must be nonnegative")
    if n > max_depth:
        raise ResourceLimitError(f"Koch depth {n} exceeds the maximum {max_depth}")
    return KochPolyline(n, koch_int_vertices(n))


def curve_index(t: Fraction, n: int) -> int:
    """Index of the ``K_n`` vertex at torus position ``t``."""
    x = (Fraction(t) + ARC_OFFSET) % 1 * (3 * 4**n)
    if x.denominator != 1:
        raise ValueError(f"position {t} is not a vertex of K_{n}")
    return int(x)


def leaf_curve_points(depth: int) -> np.ndarray:
    """Integer coordinates (units ``3**-depth``) of the starts of all generation-``depth`` cylinders."""
    from .levels import levels

    starts = levels(depth).leaf_starts()
    idx = (starts + 4**(depth - 1)) % (3 * 4**depth)
    return koch_int_vertices(depth)[idx]


# -- Whitney polygons ------------------------------------------------------------

@dataclass(frozen=True)
class WhitneyPolygon:
    id: VertexId
    kind: Kind
    vertices: tuple[Point, ...]

    @property
    def generation(self) -> int:
        return self.id.generation

    def edges(self) -> list[tuple[Point, Point]]:
        vs = self.vertices
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    @cached_property
    def area(self) -> Fraction:
        """Area divided by ``sqrt(3)``."""
        s = sum((p[0] * q[1] - q[0] * p[1] for p, q in self.edges()), Fraction(0))
        return s / 4

    @cached_property
    def perimeter(self) -> Fraction:
        total = Fraction(0)
        for p, q in self.edges():
            length = lattice_length(_sub(q, p))
            if length is None:
                raise ValidationError("edge is not parallel to a lattice direction", [str(self.id)])
            total += length
        return total

    def is_convex(self) -> bool:
        vs = self.vertices
        n = len(vs)
        return all(_cross(vs[i], vs[(i + 1) % n], vs[(i + 2) % n]) >= 0 for i in range(n))

    def contains(self, x: Point, strict: bool = False) -> bool:
        """Membership for a convex counterclockwise polygon."""
        for p, q in self.edges():
            c = _cross(p, q, x)
            if c < 0 or (strict and c == 0):
                return False
        return True

    def centroid(self) -> Point:
        n = len(self.vertices)
        return (sum((p[0] for p in self.vertices), Fraction(0)) / n,
                sum((p[1] for p in self.vertices), Fraction(0)) / n)

    def bbox(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        a = [p[0] for p in self.vertices]
        b = [p[1] for p in self.vertices]
        return min(a), min(b), max(a), max(b)

    def to_json(self) -> dict:
        return {"id": str(self.id), "kind": self.kind.value,
                "vertices": [point_json(p) for p in self.vertices]}

    @classmethod
    def from_json(cls, obj: dict) -> WhitneyPolygon:
        try:
            return cls(VertexId.parse(obj["id"]), Kind(obj["kind"]),
                       tuple(point_from_json(p) for p in obj["vertices"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed polygon: {exc}") from exc


def ray_length(generation: int) -> Fraction:
    return RHO / 3**generation


class _Curve:
    """Curve points and inward ray directions at cylinder endpoints."""

    def __init__(self, depth: int) -> None:
        self.depth = depth
        self.dirs = koch_directions(depth)
        self.verts = koch_int_vertices(depth)
        self.scale = 3**depth

    def point(self, t: Fraction) -> Point:
        i = curve_index(t, self.depth)
        a, b = self.verts[i]
        return (Fraction(int(a), self.scale), Fraction(int(b), self.scale))

    def ray(self, t: Fraction) -> tuple[int, int]:
        i = curve_index(t, self.depth)
        d_out, d_in = int(self.dirs[i]), int(self.dirs[i - 1])
        if (d_in - d_out) % 6 != 1:  # pragma: no cover - construction invariant
            raise AssertionError(f"position {t} is not a reflex vertex")
        # bisector of the interior angle at a reflex vertex
        return DIRS[(d_out + 2) % 6]

    def pushed(self, t: Fraction, r: Fraction) -> Point:
        (a, b), (da, db) = self.point(t), self.ray(t)
        return (a + r * da, b + r * db)


def _ccw(vs: list[Point]) -> tuple[Point, ...]:
    s = sum((p[0] * q[1] - q[0] * p[1] for p, q in zip(vs, vs[1:] + vs[:1])), Fraction(0))
    return tuple(vs if s > 0 else vs[::-1])


def _polygon(v: VertexId, curve: _Curve) -> WhitneyPolygon:
    gen = v.generation
    if v.is_root:
        corners = [curve.pushed(Fraction(k, 6), ray_length(1)) for k in range(6)]
        return WhitneyPolygon(v, Kind.STAR, _ccw(corners))
    start, length = _interval(v.path)
    ends = [_interval(c.path)[0] for c in children(v)] + [start + length]
    top = [curve.pushed(t % 1, ray_length(gen + 1)) for t in ends]
    bottom = [curve.pushed(start, ray_length(gen)), curve.pushed((start + length) % 1, ray_length(gen))]
    return WhitneyPolygon(v, v.kind, _ccw(bottom + top[::-1]))


def build_whitney_polygons(n: int) -> list[WhitneyPolygon]:
    """Root polygon and all polygons of generations ``1..n`` in tree order."""
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if n > MAX_WHITNEY_DEPTH:
        raise ResourceLimitError(f"Whitney depth {n} exceeds {MAX_WHITNEY_DEPTH}")
    curve = _Curve(n + 1)
    out = [_polygon(ROOT, curve)]
    for gen in range(1, n + 1):
        out.extend(_polygon(v, curve) for v in vertices_at(gen))
    return out


def polygons_to_json(polygons: Sequence[WhitneyPolygon]) -> dict:
    gen = max((p.generation for p in polygons), default=0)
    return {"generation": gen, "polygons": [p.to_json() for p in polygons]}


def polygons_from_json(obj: dict) -> list[WhitneyPolygon]:
    try:
        return [WhitneyPolygon.from_json(p) for p in obj["polygons"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed polygon set: {exc}") from exc


# -- adjacency --------------------------------------------------------------------

@dataclass(frozen=True)
class WhitneyGraph:
    vertices: frozenset
    edges: dict  # (VertexId, VertexId) with first < second -> shared length

    def neighbors(self, v: VertexId) -> list[VertexId]:
        return [b if a == v else a for a, b in self.edges if v in (a, b)]

    def degrees(self) -> dict[VertexId, int]:
        deg = {v: 0 for v in self.vertices}
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def length(self, a: VertexId, b: VertexId) -> Fraction:
        return self.edges.get((a, b) if a < b else (b, a), Fraction(0))


def _line_key(p: Point, q: Point):
    da, db = q[0] - p[0], q[1] - p[1]
    if db == 0:
        return (0, p[1]), (min(p[0], q[0]), max(p[0], q[0]))
    if da == 0:
        return (1, p[0]), (min(p[1], q[1]), max(p[1], q[1]))
    if da == -db:
        return (2, p[0] + p[1]), (min(p[1], q[1]), max(p[1], q[1]))
    return None, None


def adjacency_graph(polygons: Sequence[WhitneyPolygon]) -> WhitneyGraph:
    """Edges between polygons whose boundaries overlap in a segment of positive length."""
    lines: dict = {}
    for poly in polygons:
        for p, q in poly.edges():
            key, span = _line_key(p, q)
            if key is None:
                raise ValidationError("edge is not parallel to a lattice direction", [str(poly.id)])
            lines.setdefault(key, []).append((span[0], span[1], poly.id))
    shared: dict = {}
    for spans in lines.values():
        spans.sort()
        active: list = []
        for lo, hi, pid in spans:
            active = [s for s in active if s[1] > lo]
            for alo, ahi, aid in active:
                if aid == pid:
                    continue
                overlap = min(hi, ahi) - lo
                if overlap > 0:
                    key = (aid, pid) if aid < pid else (pid, aid)
                    shared[key] = shared.get(key, Fraction(0)) + overlap
            active.append((lo, hi, pid))
    return WhitneyGraph(frozenset(p.id for p in polygons), shared)


# -- distances to the curve ----------------------------------------------------------

class _SegmentGrid:
    """Bucket the segments of ``K_m`` by grid cells for nearest-segment queries."""

    def __init__(self, m: int, cell_exp: int) -> None:
        self.m = m
        self.verts = koch_int_vertices(m)
        self.next = np.roll(self.verts, -1, axis=0)
        self.scale = 3**m
        self.cell = 3**(m - cell_exp)  # cell side in integer units
        cells = {}
        for ends in (self.verts, self.next):
            keys = ends // self.cell
            for i, (cx, cy) in enumerate(map(tuple, keys)):
                cells.setdefault((cx, cy), set()).add(i)
        self.cells = cells

    def candidates(self, lo: Point, hi: Point) -> np.ndarray:
        c0 = [math.floor(x * self.scale / self.cell) for x in lo]
        c1 = [math.floor(x * self.scale / self.cell) for x in hi]
        out: set = set()
        for cx in range(c0[0], c1[0] + 1):
            for cy in range(c0[1], c1[1] + 1):
                out |= self.cells.get((cx, cy), set())
        return np.array(sorted(out), dtype=np.int64)


def _float_seg_dist(P0, P1, Q0, Q1) -> np.ndarray:
    """Approximate Cartesian distances between segment arrays (for shortlisting)."""
    def cart(x):
        return np.stack([x[..., 0] + x[..., 1] / 2, x[..., 1] * math.sqrt(3) / 2], axis=-1)

    P0, P1, Q0, Q1 = map(cart, (P0, P1, Q0, Q1))

    def pt_seg(X, A, B):
        d = B - A
        dd = (d * d).sum(-1)
        t = np.clip(((X - A) * d).sum(-1) / np.where(dd == 0, 1, dd), 0, 1)
        return np.sqrt((((A + t[..., None] * d) - X) ** 2).sum(-1))

    return np.minimum.reduce([pt_seg(P0, Q0, Q1), pt_seg(P1, Q0, Q1),
                              pt_seg(Q0, P0, P1), pt_seg(Q1, P0, P1)])


def _dot2(u, v) -> int:
    """Twice the oblique inner product, for integer vectors."""
    return 2 * u[0] * v[0] + u[0] * v[1] + u[1] * v[0] + 2 * u[1] * v[1]


def _int_point_segment(x, p, q) -> Fraction:
    """Squared distance (times 2) from ``x`` to ``[p, q]``, integer coordinates."""
    d = (q[0] - p[0], q[1] - p[1])
    xp = (x[0] - p[0], x[1] - p[1])
    dd = _dot2(d, d)
    t = _dot2(xp, d)
    if t <= 0:
        return Fraction(_dot2(xp, xp))
    if t >= dd:
        xq = (x[0] - q[0], x[1] - q[1])
        return Fraction(_dot2(xq, xq))
    return Fraction(_dot2(xp, xp) * dd - t * t, dd)


def _int_segment_segment(p1, p2, q1, q2) -> Fraction:
    def orient(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return Fraction(0)
    return min(_int_point_segment(p1, q1, q2), _int_point_segment(p2, q1, q2),
               _int_point_segment(q1, p1, p2), _int_point_segment(q2, p1, p2))


def distance_sq_to_curve(poly: WhitneyPolygon, grid: _SegmentGrid, bound: Fraction) -> Fraction:
    """Exact squared distance from a polygon to ``K_m``, assuming it is at most ``bound``.

    Candidates are shortlisted in floating point and then compared exactly in
    integer units of ``1 / (2 * 3**m)``.
    """
    a0, b0, a1, b1 = poly.bbox()
    margin = 2 * bound
    idx = grid.candidates((a0 - margin, b0 - margin), (a1 + margin, b1 + margin))
    if len(idx) == 0:
        raise AssertionError("no curve segment near polygon")  # pragma: no cover
    s = float(grid.scale)
    Q0 = grid.verts[idx] / s
    Q1 = grid.next[idx] / s
    edges = poly.edges()
    P = np.array([[[float(p[0]), float(p[1])], [float(q[0]), float(q[1])]] for p, q in edges])
    d = _float_seg_dist(P[:, None, 0], P[:, None, 1], Q0[None], Q1[None])
    best = d.min()
    ei, si = np.nonzero(d <= best + 1e-9)
    unit = 2 * grid.scale

    def to_int(p):
        a, b = p[0] * unit, p[1] * unit
        if a.denominator != 1 or b.denominator != 1:
            raise ValueError("polygon vertex is off the half-lattice of the curve")
        return (int(a), int(b))

    ints = [(to_int(p), to_int(q)) for p, q in edges]
    exact = None
    for e, k in zip(ei, si):
        j = int(idx[k])
        q0 = (2 * int(grid.verts[j, 0]), 2 * int(grid.verts[j, 1]))
        q1 = (2 * int(grid.next[j, 0]), 2 * int(grid.next[j, 1]))
        val = _int_segment_segment(*ints[e], q0, q1)
        exact = val if exact is None else min(exact, val)
    return exact / (2 * unit * unit)


def point_in_curve(points: np.ndarray, m: int) -> np.ndarray:
    """Crossing-number test of integer points (units ``3**-m``) against ``K_m``."""
    V = koch_int_vertices(m)
    W = np.roll(V, -1, axis=0)
    out = np.zeros(len(points), dtype=bool)
    for k, (x, y) in enumerate(points):
        cond = (V[:, 1] > y) != (W[:, 1] > y)
        a0, b0, a1, b1 = V[cond, 0], V[cond, 1], W[cond, 0], W[cond, 1]
        # x-coordinate of the crossing compared exactly: x < a0 + (y-b0)(a1-a0)/(b1-b0)
        num = (y - b0) * (a1 - a0)
        den = b1 - b0
        lhs = (x - a0) * den
        crosses = np.where(den > 0, lhs < num, lhs > num)
        out[k] = bool(np.count_nonzero(crosses) % 2)
    return out


def point_curve_distance_sq(x: Point, m: int) -> Fraction:
    V = koch_int_vertices(m)
    W = np.roll(V, -1, axis=0)
    s = 3**m
    X = np.array([[float(x[0]), float(x[1])]])
    d = _float_seg_dist(X[None, :, :].repeat(len(V), 0)[:, 0], X[None, :, :].repeat(len(V), 0)[:, 0],
                        V / s, W / s)
    best = d.min()
    exact = None
    for j in np.nonzero(d <= best + 1e-9)[0]:
        q0 = (Fraction(int(V[j, 0]), s), Fraction(int(V[j, 1]), s))
        q1 = (Fraction(int(W[j, 0]), s), Fraction(int(W[j, 1]), s))
        val = point_segment_sq(x, q0, q1)
        exact = val if exact is None else min(exact, val)
    return exact


# -- SVG ---------------------------------------------------------------------------------

KIND_FILL = {Kind.STAR: "#f4c542", Kind.PANTS: "#4a7bd0", Kind.PALACE: "#9bd33c"}


def export_svg(items, path, *, width: int = 800, stroke: str = "#222222",
               stroke_width: float = 0.6) -> None:
    """Write polygons (filled by kind) and Koch polylines as an SVG 1.1 file."""
    if isinstance(items, (KochPolyline, WhitneyPolygon)):
        items = [items]
    shapes = []
    for item in items:
        if isinstance(item, KochPolyline):
            vs = item.vertices
            shapes.append(("polyline", [to_cartesian(p) for p in vs + vs[:1]], None))
        else:
            shapes.append(("polygon", [to_cartesian(p) for p in item.vertices],
                           KIND_FILL[item.kind]))
    pts = [p for _, ps, _ in shapes for p in ps]
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    span = max(x1 - x0, y1 - y0, 1e-12)
    k = (width - 20) / span
    height = int(round((y1 - y0) * k)) + 20

    def fmt(p):
        return f"{(p[0] - x0) * k + 10:.4f},{(y1 - p[1]) * k + 10:.4f}"

    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">']
    for tag, ps, fill in shapes:
        attrs = f'fill="{fill}"' if fill else 'fill="none"'
        lines.append(f'<{tag} points="{" ".join(fmt(p) for p in ps)}" {attrs} '
                     f'stroke="{stroke}" stroke-width="{stroke_width}"/>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# -- validation --------------------------------------------------------------------

_AXES = ((0, 1), (1, 0), (1, 1))  # functionals b, a, a + b; normal to the three lattice directions


def _extents(poly: WhitneyPolygon) -> list[tuple[Fraction, Fraction]]:
    out = []
    for axis in _AXES:
        vals = [axis[0] * p[0] + axis[1] * p[1] for p in poly.vertices]
        out.append((min(vals), max(vals)))
    return out


def contact(p: WhitneyPolygon, q: WhitneyPolygon, _ext=None) -> str:
    """``"separate"``, ``"touch"`` or ``"overlap"`` for convex lattice polygons.

    Every edge is parallel to a lattice direction, so the three functionals
    normal to those directions are a complete set of separating axes.
    """
    ep = _ext[0] if _ext else _extents(p)
    eq = _ext[1] if _ext else _extents(q)
    touching = False
    for (lo1, hi1), (lo2, hi2) in zip(ep, eq):
        if hi1 < lo2 or hi2 < lo1:
            return "separate"
        if hi1 == lo2 or hi2 == lo1:
            touching = True
    return "touch" if touching else "overlap"


def _candidate_pairs(polygons: Sequence[WhitneyPolygon]) -> list[tuple[int, int]]:
    boxes = np.array([[float(x) for x in p.bbox()] for p in polygons])
    order = np.argsort(boxes[:, 0])
    pairs = []
    active: list[int] = []
    for i in order:
        a0, b0, a1, b1 = boxes[i]
        active = [j for j in active if boxes[j, 2] >= a0 - 1e-12]
        for j in active:
            if boxes[j, 1] <= b1 + 1e-12 and b0 <= boxes[j, 3] + 1e-12:
                pairs.append((min(i, j), max(i, j)))
        active.append(i)
    return pairs


def similarity_signature(poly: WhitneyPolygon) -> tuple:
    """Rotation-invariant shape code: scaled edge lengths and relative directions."""
    scale = 3**poly.generation
    codes = []
    for p, q in poly.edges():
        v = _sub(q, p)
        length = lattice_length(v)
        unit = (v[0] / length, v[1] / length)
        codes.append((length * scale, DIRS.index((int(unit[0]), int(unit[1])))))
    n = len(codes)
    best = None
    for s in range(n):
        rot = codes[s:] + codes[:s]
        d0 = rot[0][1]
        cand = tuple((length, (d - d0) % 6) for length, d in rot)
        best = cand if best is None or cand < best else best
    return best


def _inradius_ratio(poly: WhitneyPolygon) -> Fraction:
    """``(lambda / tau)**2`` about the vertex centroid of a convex polygon."""
    c = poly.centroid()
    lam = None
    for p, q in poly.edges():
        d = _sub(q, p)
        area2 = _cross(p, q, c)  # oblique determinant; Euclidean factor sqrt(3)/2
        val = Fraction(3, 4) * area2 * area2 / _dot(d, d)
        lam = val if lam is None else min(lam, val)
    tau = max(_dot(_sub(v, c), _sub(v, c)) for v in poly.vertices)
    return lam / tau


@dataclass
class PropertyCheck:
    name: str
    holds: bool
    details: dict


@dataclass
class ValidationReport:
    depth: int
    checks: list[PropertyCheck]

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    def check(self, name: str) -> PropertyCheck:
        return next(c for c in self.checks if c.name == name)

    def to_json(self) -> dict:
        def enc(x):
            if isinstance(x, Fraction):
                return frac_to_json(x)
            if isinstance(x, dict):
                return {str(k): enc(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [enc(v) for v in x]
            return x

        return {"depth": self.depth, "ok": self.ok,
                "checks": [{"name": c.name, "holds": c.holds, "details": enc(c.details)}
                           for c in self.checks]}

    def rows(self) -> list[tuple]:
        return [(self.depth, c.name, int(c.holds)) for c in self.checks]


def _structural(polygons: Sequence[WhitneyPolygon]) -> None:
    seen, offenders = set(), []
    for p in polygons:
        if p.id in seen:
            offenders.append(str(p.id))
        seen.add(p.id)
    if ROOT not in seen:
        raise ValidationError("polygon set has no root", ["/"])
    for p in polygons:
        bad = (len(p.vertices) < 3 or (not p.id.is_root and p.id.parent not in seen)
               or p.kind is not p.id.kind or p.area <= 0 or not p.is_convex()
               or any(lattice_length(_sub(q, r)) is None for r, q in p.edges()))
        if bad:
            offenders.append(str(p.id))
    if offenders:
        raise ValidationError("malformed polygons", offenders)


def _by_generation(values: dict, start: int) -> tuple[bool, dict]:
    """Group ``(kind, gen) -> set`` and test equality with generation ``start``."""
    table: dict = {}
    for (kind, gen), vals in values.items():
        table.setdefault(kind, {})[gen] = (min(vals), max(vals))
    stable = True
    for kind, per_gen in table.items():
        ref = per_gen.get(start)
        for gen, v in per_gen.items():
            if gen >= start and ref is not None and v != ref:
                stable = False
    return stable, table


def validate_whitney(polygons: Sequence[WhitneyPolygon], *, dist_offset: int = 2,
                     covering_samples: int = 2000, covering_constant: Fraction = Fraction(1),
                     seed: int = 0) -> ValidationReport:
    """Check the six Whitney properties with exact predicates.

    Distances of generation-``n`` polygons are measured to ``K_{n + dist_offset}``.
    Per-kind constants must agree exactly from generation 2 onward.
    """
    _structural(polygons)
    depth = max(p.generation for p in polygons)
    index = {p.id: p for p in polygons}
    checks: list[PropertyCheck] = []

    # 1. uniformly bi-Lipschitz boundaries: one similarity class per kind
    classes: dict = {}
    for p in polygons:
        if not p.id.is_root:
            classes.setdefault(p.kind.value, set()).add(similarity_signature(p))
    checks.append(PropertyCheck(
        "bilipschitz", all(len(s) == 1 for s in classes.values()),
        {"similarity_classes": {k: len(s) for k, s in classes.items()}, "all_convex": True}))

    # 2. disjoint interiors, containment and covering
    pairs = _candidate_pairs(polygons)
    overlaps, touching = [], {p.id: set() for p in polygons}
    ext = [_extents(p) for p in polygons]
    for i, j in pairs:
        rel = contact(polygons[i], polygons[j], (ext[i], ext[j]))
        if rel == "overlap":
            overlaps.append((str(polygons[i].id), str(polygons[j].id)))
        elif rel == "touch":
            touching[polygons[i].id].add(polygons[j].id)
            touching[polygons[j].id].add(polygons[i].id)

    dists: dict[VertexId, Fraction] = {}
    for gen in range(depth + 1):
        m = gen + dist_offset
        grid = _SegmentGrid(m, max(gen, 1))
        for v in ([ROOT] if gen == 0 else vertices_at(gen)):
            if v in index:
                dists[v] = distance_sq_to_curve(index[v], grid, ray_length(gen + 1))
    inside = all(d > 0 for d in dists.values())
    cover = _covering(polygons, depth, covering_samples, seed)
    graph = adjacency_graph(polygons)
    connected = _connected(graph)
    checks.append(PropertyCheck(
        "disjoint_and_covering",
        not overlaps and inside and connected and cover["uncovered_constant"] <= covering_constant,
        {"overlapping_pairs": overlaps[:10], "clear_of_curve": inside, "connected": connected,
         **cover}))

    # 3. volume comparable to squared distance (area in units of sqrt(3))
    vol = {}
    for v, d in dists.items():
        vol.setdefault((index[v].kind.value, v.generation), set()).add(index[v].area / d)
    stable3, table3 = _by_generation(vol, 2)
    checks.append(PropertyCheck("volume_vs_distance", stable3 and inside,
                                {"dist_offset": dist_offset, "area_over_dist_sq": table3}))

    # 4. neighbours across shared edges have comparable size; edges are typed by
    # (shallower kind, deeper kind, generation gap) since some types first occur late
    ratios: dict = {}
    for (a, b), length in graph.edges.items():
        pa, pb = index[a], index[b]
        if (a.generation, a.kind.value) > (b.generation, b.kind.value):
            pa, pb = pb, pa
        key = (pa.kind.value, pb.kind.value, pb.generation - pa.generation)
        ratios.setdefault((key, pb.generation), set()).add(
            (pb.area / pa.area, pb.perimeter / pa.perimeter,
             length / pa.perimeter, length / pb.perimeter))
    by_type: dict = {}
    for (key, gen), vals in ratios.items():
        by_type.setdefault(key, {})[gen] = vals
    stable4 = True
    for key, per_gen in by_type.items():
        late = [v for g, v in per_gen.items() if g >= 2]
        stable4 &= all(v == late[0] for v in late)
    flat = [r for vals in ratios.values() for r in vals]
    worst4 = {
        "area_ratio": max(max(r[0], 1 / r[0]) for r in flat),
        "perimeter_ratio": max(max(r[1], 1 / r[1]) for r in flat),
        "shared_fraction": min(min(r[2], r[3]) for r in flat),
    }
    checks.append(PropertyCheck(
        "neighbour_comparability", stable4,
        {"edge_types": len(by_type), "worst": worst4,
         "first_generation": {"/".join(map(str, k)): min(v) for k, v in by_type.items()}}))

    # 5. bounded number of touching polygons
    deg = {v: len(s) for v, s in touching.items()}
    edge_deg = graph.degrees()
    per_gen = {}
    for v, d in deg.items():
        g = v.generation
        cur = per_gen.get(g, (0, 0))
        per_gen[g] = (max(cur[0], d), max(cur[1], edge_deg[v]))
    interior = [per_gen[g] for g in per_gen if 2 <= g < depth]
    stable5 = all(x == interior[0] for x in interior)
    checks.append(PropertyCheck(
        "bounded_neighbours", stable5,
        {"max_touching": max(deg.values()), "max_shared_edges": max(edge_deg.values()),
         "root_shared_edges": edge_deg[ROOT], "per_generation": per_gen}))

    # 6. uniformly star-shaped about the vertex centroid
    star = {}
    for p in polygons:
        star.setdefault((p.kind.value, p.generation), set()).add(_inradius_ratio(p))
    stable6, table6 = _by_generation(star, 1)
    centres_inside = all(p.contains(p.centroid(), strict=True) for p in polygons)
    checks.append(PropertyCheck("star_shaped", stable6 and centres_inside,
                                {"inradius_sq_over_circumradius_sq": table6}))
    return ValidationReport(depth, checks)


def _connected(graph: WhitneyGraph) -> bool:
    adj: dict = {v: [] for v in graph.vertices}
    for a, b in graph.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {ROOT}
    stack = [ROOT]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(graph.vertices)


def _covering(polygons: Sequence[WhitneyPolygon], depth: int, samples: int, seed: int) -> dict:
    """Sample points of ``K_{depth+2}`` and measure how far uncovered ones reach inside."""
    m = depth + 2
    scale = 3**m
    rng = np.random.default_rng(seed)
    V = koch_int_vertices(m)
    lo, hi = V.min(axis=0), V.max(axis=0)
    pts = np.stack([rng.integers(lo[0], hi[0] + 1, samples),
                    rng.integers(lo[1], hi[1] + 1, samples)], axis=1)
    inside = point_in_curve(pts, m)
    cell = 3.0**-max(depth - 1, 0)
    buckets: dict = {}
    for k, p in enumerate(polygons):
        a0, b0, a1, b1 = (float(x) for x in p.bbox())
        for cx in range(math.floor(a0 / cell), math.floor(a1 / cell) + 1):
            for cy in range(math.floor(b0 / cell), math.floor(b1 / cell) + 1):
                buckets.setdefault((cx, cy), []).append(k)
    worst = Fraction(0)
    tested = uncovered = 0
    for (a, b), ok in zip(pts, inside):
        if not ok:
            continue
        tested += 1
        x = (Fraction(int(a), scale), Fraction(int(b), scale))
        key = (math.floor(float(x[0]) / cell), math.floor(float(x[1]) / cell))
        if any(polygons[k].contains(x) for k in buckets.get(key, ())):
            continue
        uncovered += 1
        d2 = point_curve_distance_sq(x, m)
        worst = max(worst, d2 * 9**depth)
    return {"samples_inside": tested, "uncovered": uncovered,
            "uncovered_constant": _sqrt_ceiling(worst)}


def _sqrt_ceiling(x: Fraction) -> Fraction:
    """Smallest ``k/64`` with ``(k/64)**2 >= x``."""
    k = math.isqrt(int(math.ceil(x * 4096)))
    while Fraction(k, 64)**2 < x:
        k += 1
    return Fraction(k, 64)


# -- graph and tree norms ----------------------------------------------------------

class NormComparison:
    """Piecewise-constant norms on a covering: all graph edges versus tree edges.

    ``bv_G = sum |f_A| vol(A) + sum_graph |f_A - f_B| l(shared)`` and ``bv_T``
    is the same with the parent-child edges only.  Tree edges must be graph
    edges, which makes ``bv_T <= bv_G`` hold term by term.
    """

    def __init__(self, polygons: Sequence[WhitneyPolygon], graph: WhitneyGraph | None = None):
        graph = graph or adjacency_graph(polygons)
        self.ids = [p.id for p in polygons]
        self.index = {v: i for i, v in enumerate(self.ids)}
        self.depth = max(v.generation for v in self.ids)
        self.by_generation: dict[int, list[VertexId]] = {}
        for v in self.ids:
            self.by_generation.setdefault(v.generation, []).append(v)
        self.volume = np.array([float(p.area) * math.sqrt(3) for p in polygons])
        missing = [str(v) for v in self.ids
                   if not v.is_root and graph.length(v, v.parent) == 0]
        if missing:
            raise ValidationError("tree edges without a shared boundary segment", missing)
        g_a, g_b, g_l = [], [], []
        for (a, b), length in graph.edges.items():
            g_a.append(self.index[a])
            g_b.append(self.index[b])
            g_l.append(float(length))
        self.graph = (np.array(g_a), np.array(g_b), np.array(g_l))
        t_a, t_b, t_l = [], [], []
        for v in self.ids:
            if not v.is_root:
                t_a.append(self.index[v])
                t_b.append(self.index[v.parent])
                t_l.append(float(graph.length(v, v.parent)))
        self.tree = (np.array(t_a), np.array(t_b), np.array(t_l))

    def norms(self, values: np.ndarray) -> tuple[float, float]:
        """``(bv_T, bv_G)`` for vertex values listed in polygon order."""
        values = np.asarray(values, dtype=float)
        vol = float(np.abs(values) @ self.volume)
        a, b, length = self.tree
        tree = float(np.abs(values[a] - values[b]) @ length)
        a, b, length = self.graph
        full = float(np.abs(values[a] - values[b]) @ length)
        return vol + tree, vol + full

    def subtree(self, v: VertexId) -> np.ndarray:
        """Polygon indices of ``v`` and its descendants."""
        paths = self._sorted_paths
        lo = bisect.bisect_left(paths, v.path)
        hi = bisect.bisect_left(paths, v.path + (len(paths),))
        return self._order[lo:hi]

    @cached_property
    def _order(self) -> np.ndarray:
        return np.array(sorted(range(len(self.ids)), key=lambda i: self.ids[i].path))

    @cached_property
    def _sorted_paths(self) -> list[tuple[int, ...]]:
        return [self.ids[i].path for i in self._order]


def random_piecewise_values(cmp: NormComparison, rng: np.random.Generator, kind: str) -> np.ndarray:
    """Integer vertex values: independent draws (``"iid"``) or a sum of subtree indicators (``"gamma"``)."""
    n = len(cmp.ids)
    if kind == "iid":
        return rng.integers(-5, 6, n)
    vals = np.zeros(n, dtype=np.int64)
    for _ in range(int(rng.integers(1, 4))):
        # generation first, so shallow subtrees are as likely as deep ones
        gen = int(rng.integers(1, cmp.depth + 1))
        level = cmp.by_generation[gen]
        v = level[int(rng.integers(len(level)))]
        vals[cmp.subtree(v)] += int(rng.choice([-3, -2, -1, 1, 2, 3]))
    return vals


def verify_norm_equivalence(depths: Sequence[int], samples: int, seed: int = 0) -> list[tuple]:
    """Rows ``(depth, samples, min_ratio, max_ratio, 0.0)`` of ``bv_G / bv_T``.

    Half of the functions are independent vertex values, half sums of subtree
    indicators; ``bv_T <= bv_G`` is asserted for each.
    """
    rows = []
    for depth in depths:
        cmp = NormComparison(build_whitney_polygons(depth))
        rng = np.random.default_rng([seed, depth])
        ratios = []
        for i in range(samples):
            vals = random_piecewise_values(cmp, rng, "iid" if i % 2 == 0 else "gamma")
            tree, full = cmp.norms(vals)
            if tree == 0:
                continue
            if full < tree * (1 - 1e-12):
                raise AssertionError("graph norm below tree norm")  # pragma: no cover
            ratios.append(full / tree)
        rows.append((depth, len(ratios), min(ratios), max(ratios), 0.0))
    return rows
