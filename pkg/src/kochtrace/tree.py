"""The combinatorial Whitney tree of the snowflake and its boundary circle.

Every non-root vertex owns a half-open interval ("cylinder") of the unit
circle.  At generation ``n`` a palace cylinder has length ``1/(3*4**n)`` and
a pants cylinder twice that; children partition their parent in boundary
order.  Boundary points are addressed by finite digit strings
``(i1, i2, ...)`` with ``i1 in {0,1,2}`` and ``ij in {0,1,2,3}``, mapped to
``i1/3 + sum_j ij/(3*4**(j-1))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

from .errors import ResourceLimitError, UnsupportedInputError


class Kind(str, enum.Enum):
    STAR = "star"
    PANTS = "pants"
    PALACE = "palace"


class Side(str, enum.Enum):
    """Which branch to follow at a point that is a cylinder endpoint.

    ``AFTER`` follows the boundary just counterclockwise of the point,
    ``BEFORE`` the boundary just clockwise of it.
    """

    BEFORE = "before"
    AFTER = "after"


CHILD_KINDS: dict[Kind, tuple[Kind, ...]] = {
    Kind.STAR: (Kind.PANTS,) * 6,
    Kind.PANTS: (Kind.PALACE, Kind.PANTS, Kind.PANTS, Kind.PANTS, Kind.PALACE),
    Kind.PALACE: (Kind.PALACE, Kind.PANTS, Kind.PALACE),
}

# cylinder length in units of the generation's palace length
WIDTH = {Kind.PANTS: 2, Kind.PALACE: 1}

MAX_DIGITS = 64


def unit_length(generation: int) -> Fraction:
    """Length of a palace cylinder at ``generation`` (``1/12`` at generation 1)."""
    return Fraction(1, 3 * 4**generation)


def edge_weight(generation: int) -> Fraction:
    """Weight ``3**-n`` of the tree edge entering generation ``n``."""
    return Fraction(1, 3**generation)


@lru_cache(maxsize=None)
def _kind_of(path: tuple[int, ...]) -> Kind:
    kind = Kind.STAR
    for i in path:
        kids = CHILD_KINDS[kind]
        if not 0 <= i < len(kids):
            raise ValueError(f"child index {i} out of range for a {kind.value} vertex")
        kind = kids[i]
    return kind


@dataclass(frozen=True, order=True)
class VertexId:
    """A vertex of the tree, given by child indices from the root."""

    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        _kind_of(self.path)

    @property
    def generation(self) -> int:
        return len(self.path)

    @property
    def kind(self) -> Kind:
        return _kind_of(self.path)

    @property
    def is_root(self) -> bool:
        return not self.path

    @property
    def parent(self) -> VertexId:
        if not self.path:
            raise ValueError("the root has no parent")
        return VertexId(self.path[:-1])

    def child(self, i: int) -> VertexId:
        return VertexId(self.path + (i,))

    def ancestors(self) -> list[VertexId]:
        """Root-first chain of ancestors, ``self`` included."""
        return [VertexId(self.path[:k]) for k in range(len(self.path) + 1)]

    def is_ancestor_of(self, other: VertexId) -> bool:
        """True when ``other`` lies in the subtree rooted at ``self``."""
        return other.path[: len(self.path)] == self.path

    def __str__(self) -> str:
        return "".join(f"/{i}" for i in self.path) or "/"

    @classmethod
    def parse(cls, text: str) -> VertexId:
        text = text.strip()
        if not text.startswith("/"):
            raise ValueError(f"vertex id must start with '/': {text!r}")
        parts = [p for p in text.split("/") if p]
        return cls(tuple(int(p) for p in parts))


ROOT = VertexId()


def children(v: VertexId) -> list[VertexId]:
    """Children of ``v`` in boundary (counterclockwise) order."""
    return [v.child(i) for i in range(len(CHILD_KINDS[v.kind]))]


def vertices_at(generation: int) -> Iterator[VertexId]:
    """All vertices of one generation in boundary order."""
    layer = [ROOT]
    for _ in range(generation):
        layer = [c for v in layer for c in children(v)]
    yield from layer


def level_counts(generation: int) -> tuple[int, int]:
    """``(#pants, #palace)`` at a generation via ``(p, q) -> (3p+q, 2p+2q)``."""
    if generation == 0:
        return (0, 0)
    p, q = 6, 0
    for _ in range(generation - 1):
        p, q = 3 * p + q, 2 * p + 2 * q
    return p, q


@dataclass(frozen=True)
class TorusInterval:
    """Half-open interval ``[start, start + length)`` of the unit circle."""

    start: Fraction
    length: Fraction

    @property
    def end(self) -> Fraction:
        return self.start + self.length


@lru_cache(maxsize=1 << 18)
def _interval(path: tuple[int, ...]) -> tuple[Fraction, Fraction]:
    if not path:
        return Fraction(0), Fraction(1)
    start = Fraction(0)
    kind = Kind.STAR
    for gen, i in enumerate(path, start=1):
        unit = unit_length(gen)
        kids = CHILD_KINDS[kind]
        start += unit * sum(WIDTH[k] for k in kids[:i])
        kind = kids[i]
    return start, unit_length(len(path)) * WIDTH[kind]


def cylinder_interval(v: VertexId) -> TorusInterval:
    """The torus interval of the boundary points whose branch passes ``v``."""
    if v.is_root:
        raise ValueError("the root cylinder is the whole circle, not an interval")
    start, length = _interval(v.path)
    return TorusInterval(start, length)


def _interval_or_circle(v: VertexId) -> tuple[Fraction, Fraction]:
    start, length = _interval(v.path)
    return start, start + length


# -- boundary points -----------------------------------------------------


@lru_cache(maxsize=1 << 16)
def _digits_to_position(digits: tuple[int, ...]) -> Fraction:
    if not digits:
        return Fraction(0)
    pos = Fraction(digits[0], 3)
    for j, d in enumerate(digits[1:], start=2):
        pos += Fraction(d, 3 * 4 ** (j - 1))
    return pos


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the boundary circle with a branch-selecting side marker."""

    digits: tuple[int, ...]
    side: Side = Side.AFTER

    def __post_init__(self) -> None:
        digits = tuple(int(d) for d in self.digits)
        if digits and digits[0] not in (0, 1, 2):
            raise ValueError(f"first digit must be 0, 1 or 2, got {digits[0]}")
        if any(d not in (0, 1, 2, 3) for d in digits[1:]):
            raise ValueError(f"later digits must be in 0..3: {digits}")
        if len(digits) > MAX_DIGITS:
            raise ResourceLimitError(f"digit string longer than {MAX_DIGITS}")
        while digits and digits[-1] == 0:
            digits = digits[:-1]
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "side", Side(self.side))

    @property
    def position(self) -> Fraction:
        return _digits_to_position(self.digits)

    def with_side(self, side: Side) -> BoundaryPoint:
        return BoundaryPoint(self.digits, side)

    @classmethod
    def from_position(cls, position: Fraction, side: Side = Side.AFTER) -> BoundaryPoint:
        position = Fraction(position) % 1
        scaled = 3 * position
        first = int(scaled)
        frac = scaled - first
        digits = [first]
        while frac:
            if len(digits) >= MAX_DIGITS:
                raise UnsupportedInputError(
                    f"position {position} has no finite digit expansion")
            frac *= 4
            d = int(frac)
            digits.append(d)
            frac -= d
        return cls(tuple(digits), side)

    def to_json(self) -> dict:
        return {"digits": list(self.digits), "side": self.side.value}

    @classmethod
    def from_json(cls, obj: dict) -> BoundaryPoint:
        return cls(tuple(obj["digits"]), Side(obj.get("side", "after")))


def torus_position(p: BoundaryPoint) -> Fraction:
    return p.position


def koch_index_position(digits: Sequence[int]) -> Fraction:
    """Digit map with weights ``4**-j`` for ``j >= 2``.

    This is the raw segment-index parametrisation of the curve.  Its image
    has gaps on the circle, so the tree uses :func:`torus_position` instead.
    """
    if not digits:
        return Fraction(0)
    return Fraction(digits[0], 3) + sum(
        (Fraction(d, 4**j) for j, d in enumerate(digits[1:], start=2)), Fraction(0))


def metric_d(x: BoundaryPoint, y: BoundaryPoint) -> Fraction:
    """Circle distance between torus positions."""
    delta = abs(x.position - y.position)
    return min(delta, 1 - delta)


def _contains(a: Fraction, b: Fraction, pos: Fraction, side: Side) -> bool:
    if side is Side.AFTER:
        return a <= pos < b
    return a < pos <= b


def _effective(pos: Fraction, side: Side) -> Fraction:
    # p - eps at position 0 lives at the far end of the circle
    if side is Side.BEFORE and pos == 0:
        return Fraction(1)
    return pos


def locate(position: Fraction, side: Side, generation: int) -> VertexId:
    """The generation-``generation`` vertex on the branch of a position."""
    pos = _effective(Fraction(position), side)
    v = ROOT
    for _ in range(generation):
        for c in children(v):
            a, b = _interval_or_circle(c)
            if _contains(a, b, pos, side):
                v = c
                break
        else:  # pragma: no cover - children always partition the parent
            raise AssertionError("children do not partition the parent cylinder")
    return v


def branch(p: BoundaryPoint, depth: int) -> list[VertexId]:
    """Root-first chain ``root, A_1, ..., A_depth`` of the branch of ``p``."""
    v = locate(p.position, p.side, depth)
    return v.ancestors()


def _minimal_generation(position: Fraction) -> int | None:
    """Smallest n with ``position`` a multiple of ``unit_length(n)``; None if none."""
    for n in range(1, MAX_DIGITS):
        if (position / unit_length(n)).denominator == 1:
            return n
    return None


@lru_cache(maxsize=1 << 16)
def endpoint_generation(position: Fraction) -> int | None:
    """First generation at which ``position`` is a cylinder endpoint, or None.

    Positions for which this is None are not finitely decomposable: the
    nested cylinders around them never have the point on their boundary.
    """
    position = Fraction(position) % 1
    m = _minimal_generation(position) if position else 1
    if m is None:
        return None
    for gen in range(1, m + 1):
        v = locate(position, Side.AFTER, gen)
        if _interval(v.path)[0] == position:
            return gen
    return None


def is_rational(p: BoundaryPoint | Fraction) -> bool:
    pos = p.position if isinstance(p, BoundaryPoint) else Fraction(p)
    return endpoint_generation(pos % 1) is not None


# -- arcs ----------------------------------------------------------------


@dataclass(frozen=True)
class Arc:
    """Counterclockwise half-open arc ``[start, end)``.

    ``start == end`` is the empty arc unless ``full`` is set, in which case the
    arc is the whole circle.
    """

    start: BoundaryPoint
    end: BoundaryPoint
    full: bool = False

    @classmethod
    def between(cls, start: Fraction, end: Fraction) -> Arc:
        return cls(BoundaryPoint.from_position(start), BoundaryPoint.from_position(end))

    @classmethod
    def circle(cls) -> Arc:
        origin = BoundaryPoint(())
        return cls(origin, origin, full=True)

    @classmethod
    def of_vertex(cls, v: VertexId) -> Arc:
        if v.is_root:
            return cls.circle()
        iv = cylinder_interval(v)
        return cls.between(iv.start, iv.end % 1)

    @property
    def is_empty(self) -> bool:
        return not self.full and self.start.position == self.end.position

    def reversed(self) -> Arc:
        """The complementary arc ``[end, start)``."""
        if self.full:
            return Arc(self.start, self.end)
        if self.is_empty:
            return Arc(self.start, self.end, full=True)
        return Arc(self.end, self.start)

    def pieces(self) -> list[tuple[Fraction, Fraction]]:
        """The arc as disjoint half-open sub-intervals of ``[0, 1]``."""
        if self.full:
            return [(Fraction(0), Fraction(1))]
        s, e = self.start.position, self.end.position
        if s == e:
            return []
        if s < e:
            return [(s, e)]
        out = [(s, Fraction(1))]
        if e > 0:
            out.insert(0, (Fraction(0), e))
        return out

    def length(self) -> Fraction:
        return sum((b - a for a, b in self.pieces()), Fraction(0))

    def contains(self, p: BoundaryPoint) -> bool:
        """Side-aware membership of the point ``p +- 0`` in the arc."""
        pos = _effective(p.position, p.side)
        return any(_contains(a, b, pos, p.side) for a, b in self.pieces())

    def to_json(self) -> dict:
        out = {"start": self.start.to_json(), "end": self.end.to_json()}
        if self.full:
            out["full"] = True
        return out

    @classmethod
    def from_json(cls, obj: dict) -> Arc:
        return cls(BoundaryPoint.from_json(obj["start"]), BoundaryPoint.from_json(obj["end"]),
                   bool(obj.get("full", False)))


def relation(a: Fraction, b: Fraction, pieces: Sequence[tuple[Fraction, Fraction]]) -> str:
    """Relation of ``[a, b)`` to a union of disjoint intervals: inside/outside/partial."""
    overlap = Fraction(0)
    for lo, hi in pieces:
        lo2, hi2 = max(a, lo), min(b, hi)
        if hi2 > lo2:
            overlap += hi2 - lo2
    if overlap == 0:
        return "outside"
    if overlap == b - a:
        return "inside"
    return "partial"


def require_rational(arc: Arc) -> None:
    if arc.full or arc.is_empty:
        return
    for p in (arc.start, arc.end):
        if not is_rational(p):
            raise UnsupportedInputError(
                f"arc endpoint {p.digits} is not a cylinder endpoint")


def maximal_cylinder_decomposition(arc: Arc) -> list[VertexId]:
    """Maximal disjoint cylinders whose union is ``arc``, in arc order."""
    if arc.full:
        return [ROOT]
    if arc.is_empty:
        return []
    require_rational(arc)
    pieces = arc.pieces()
    found: list[VertexId] = []
    stack = list(reversed(children(ROOT)))
    while stack:
        v = stack.pop()
        a, b = _interval_or_circle(v)
        rel = relation(a, b, pieces)
        if rel == "inside":
            found.append(v)
        elif rel == "partial":
            stack.extend(reversed(children(v)))
    start = arc.start.position
    found.sort(key=lambda v: (_interval(v.path)[0] - start) % 1)
    return found


def directional_d(arc: Arc) -> Fraction:
    """``sum 3**-n(k)`` over the maximal decomposition of the arc."""
    return sum((edge_weight(v.generation) for v in maximal_cylinder_decomposition(arc)),
               Fraction(0))


def metric_dK(x: BoundaryPoint, y: BoundaryPoint) -> Fraction:
    """Smaller of the two directional cylinder sums between ``x`` and ``y``."""
    if x.position == y.position:
        return Fraction(0)
    return min(directional_d(Arc(x, y)), directional_d(Arc(y, x)))


def short_arc(x: BoundaryPoint, y: BoundaryPoint) -> Arc:
    """The direction between x and y achieving ``metric_dK`` (ties: ``[x, y)``)."""
    forward = Arc(x, y)
    return forward if directional_d(forward) <= directional_d(forward.reversed()) else forward.reversed()


def tree_summary(depth: int) -> dict:
    """Counts, kinds and cylinder intervals through ``depth`` (JSON-ready)."""
    levels = []
    for gen in range(1, depth + 1):
        p, q = level_counts(gen)
        levels.append({"generation": gen, "pants": p, "palace": q, "total": p + q})
    intervals = [
        {"id": str(v), "kind": v.kind.value,
         "start": [iv.start.numerator, iv.start.denominator],
         "length": [iv.length.numerator, iv.length.denominator]}
        for gen in range(1, depth + 1)
        for v in vertices_at(gen)
        for iv in [cylinder_interval(v)]
    ]
    return {"depth": depth, "levels": levels, "cylinders": intervals}


def random_branch(rng, length: int, prefix: Sequence[int] = ()) -> tuple[int, ...]:
    """A uniformly random path of ``length`` digits extending ``prefix``.

    ``rng`` is a :class:`random.Random`.
    """
    path = list(prefix)
    kind = VertexId(tuple(path)).kind
    while len(path) < length:
        i = rng.randrange(len(CHILD_KINDS[kind]))
        path.append(i)
        kind = CHILD_KINDS[kind][i]
    return tuple(path)


def truncation(path: Sequence[int], depth: int) -> Fraction:
    """Start of the generation-``depth`` cylinder on a branch."""
    return _interval(tuple(path[:depth]))[0]
