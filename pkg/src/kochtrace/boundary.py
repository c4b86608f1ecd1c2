"""Piecewise-constant boundary data ``g = sum_j a_j 1[x_j, y_j)``."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .errors import ValidationError
from .tree import (
    Arc,
    BoundaryPoint,
    Side,
    VertexId,
    _effective,
    _interval_or_circle,
    endpoint_generation,
    require_rational,
)


def _frac(x) -> Fraction:
    if isinstance(x, (list, tuple)):
        return Fraction(int(x[0]), int(x[1]))
    return Fraction(x)


def frac_to_json(x: Fraction) -> list[int]:
    x = Fraction(x)
    return [x.numerator, x.denominator]


@dataclass(frozen=True)
class BoundaryData:
    """Finite sum of coefficient-weighted indicators of pairwise disjoint arcs.

    Points outside every arc carry the value 0.
    """

    terms: tuple[tuple[Arc, Fraction], ...] = ()

    def __post_init__(self) -> None:
        terms = tuple((arc, _frac(c)) for arc, c in self.terms)
        object.__setattr__(self, "terms", terms)
        bad = []
        for i, (arc, _) in enumerate(terms):
            try:
                require_rational(arc)
            except ValueError:
                bad.append(i)
        if bad:
            raise ValidationError("arc endpoints must be cylinder endpoints", bad)
        spans = sorted((lo, hi, i) for i, (arc, _) in enumerate(terms) for lo, hi in arc.pieces())
        overlaps = [(a[2], b[2]) for a, b in zip(spans, spans[1:]) if b[0] < a[1]]
        if overlaps:
            raise ValidationError("arcs must be pairwise disjoint", overlaps)

    # -- piecewise view ---------------------------------------------------

    @cached_property
    def pieces(self) -> tuple[tuple[Fraction, Fraction, Fraction], ...]:
        """Maximal constant pieces ``(lo, hi, value)`` tiling ``[0, 1)`` in order."""
        spans = sorted((lo, hi, c) for arc, c in self.terms for lo, hi in arc.pieces())
        raw = []
        at = Fraction(0)
        for lo, hi, c in spans:
            if lo > at:
                raw.append((at, lo, Fraction(0)))
            raw.append((lo, hi, c))
            at = hi
        if at < 1:
            raw.append((at, Fraction(1), Fraction(0)))
        return _merge(raw)

    @cached_property
    def _starts(self) -> list[Fraction]:
        return [lo for lo, _, _ in self.pieces]

    @property
    def breakpoints(self) -> list[Fraction]:
        """Circle positions where the data changes value."""
        pcs = self.pieces
        if len(pcs) == 1:
            return []
        out = [lo for lo, _, _ in pcs[1:]]
        if pcs[0][2] != pcs[-1][2]:
            out.insert(0, Fraction(0))
        return out

    def constant_on(self, a: Fraction, b: Fraction):
        """The value of ``g`` on ``[a, b)`` if constant there, else None."""
        i = bisect.bisect_right(self._starts, a) - 1
        lo, hi, value = self.pieces[i]
        return value if b <= hi else None

    def constant_on_vertex(self, v: VertexId):
        return self.constant_on(*_interval_or_circle(v))

    def value(self, p: BoundaryPoint) -> Fraction:
        """Side-aware value ``g(p +- 0)``."""
        pos = _effective(p.position, p.side)
        if p.side is Side.AFTER:
            i = bisect.bisect_right(self._starts, pos) - 1
        else:
            i = bisect.bisect_left(self._starts, pos) - 1
        return self.pieces[i][2]

    @property
    def reduction_depth(self) -> int:
        """Generation below which every cylinder sees a constant value."""
        gens = [endpoint_generation(b) for b in self.breakpoints]
        return max(gens, default=0)

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for _, _, v in self.pieces)

    def coefficients(self) -> set[Fraction]:
        return {v for _, _, v in self.pieces}

    # -- constructions ----------------------------------------------------

    def canonical(self) -> BoundaryData:
        """Same function with adjacent equal arcs merged and zero arcs dropped."""
        return BoundaryData.from_pieces(self.pieces)

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[Fraction, Fraction, Fraction]]) -> BoundaryData:
        """Build from pieces tiling ``[0, 1)``; values on the complement of arcs are 0."""
        merged = [list(p) for p in _merge(pieces)]
        if len(merged) == 1:
            v = merged[0][2]
            return cls(((Arc.circle(), v),)) if v else cls(())
        if merged[0][2] == merged[-1][2]:
            first = merged.pop(0)
            merged[-1][1] = first[1] + 1
        terms = []
        for lo, hi, v in merged:
            if v:
                terms.append((Arc.between(lo, hi % 1), v))
        return cls(tuple(terms))

    @classmethod
    def from_overlapping(cls, terms: Iterable[tuple[Arc, Fraction]]) -> BoundaryData:
        """Sum of possibly overlapping arc indicators, rewritten with disjoint arcs."""
        delta: dict[Fraction, Fraction] = {Fraction(0): Fraction(0), Fraction(1): Fraction(0)}
        for arc, c in terms:
            require_rational(arc)
            c = _frac(c)
            for lo, hi in arc.pieces():
                delta[lo] = delta.get(lo, Fraction(0)) + c
                delta[hi] = delta.get(hi, Fraction(0)) - c
        cuts = sorted(delta)
        pieces = []
        level = Fraction(0)
        for lo, hi in zip(cuts, cuts[1:]):
            level += delta[lo]
            pieces.append((lo, hi, level))
        return cls.from_pieces(pieces)

    @classmethod
    def indicator(cls, arc: Arc, coeff: Fraction = Fraction(1)) -> BoundaryData:
        if arc.is_empty:
            return cls(())
        return cls(((arc, Fraction(coeff)),))

    def __add__(self, other: BoundaryData) -> BoundaryData:
        return BoundaryData.from_overlapping(self.terms + other.terms)

    def __neg__(self) -> BoundaryData:
        return self.scaled(-1)

    def __sub__(self, other: BoundaryData) -> BoundaryData:
        return self + (-other)

    def scaled(self, c) -> BoundaryData:
        c = Fraction(c)
        if c == 0:
            return BoundaryData(())
        return BoundaryData(tuple((arc, c * v) for arc, v in self.terms))

    def shifted(self, c) -> BoundaryData:
        """``g + c`` (equal to ``g`` in the quotient by constants)."""
        return self + BoundaryData.indicator(Arc.circle(), c)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {"terms": [{"arc": arc.to_json(), "coeff": frac_to_json(c)}
                          for arc, c in self.terms]}

    @classmethod
    def from_json(cls, obj: dict) -> BoundaryData:
        try:
            return cls(tuple((Arc.from_json(t["arc"]), _frac(t["coeff"]))
                             for t in obj["terms"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed boundary data: {exc}") from exc


def _merge(pieces) -> tuple[tuple[Fraction, Fraction, Fraction], ...]:
    """Join consecutive pieces carrying equal values."""
    out: list[list] = []
    for lo, hi, v in pieces:
        v = Fraction(v)
        if out and out[-1][2] == v:
            out[-1][1] = hi
        else:
            out.append([Fraction(lo), Fraction(hi), v])
    return tuple((lo, hi, v) for lo, hi, v in out)
