"""Finitely supported functions on the Whitney tree.

A :class:`TreeFunction` is stored through its Abel decomposition
``f = baseline + sum_A coeffs[A] * gamma^A`` where ``gamma^A`` is the
indicator of the subtree rooted at ``A``; so ``coeffs[A] = f_A - f_parent(A)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .boundary import BoundaryData, _frac, frac_to_json
from .errors import ContractViolation, ValidationError
from .tree import (
    ROOT,
    BoundaryPoint,
    VertexId,
    children,
    edge_weight,
    locate,
    vertices_at,
)


@dataclass(frozen=True, eq=False)
class TreeFunction:
    coeffs: Mapping[VertexId, Fraction] = field(default_factory=dict)
    baseline: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        baseline = _frac(self.baseline)
        clean: dict[VertexId, Fraction] = {}
        for v, c in self.coeffs.items():
            c = _frac(c)
            if v.is_root:
                baseline += c
            elif c:
                clean[v] = clean.get(v, Fraction(0)) + c
        object.__setattr__(self, "coeffs", {v: c for v, c in clean.items() if c})
        object.__setattr__(self, "baseline", baseline)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreeFunction):
            return NotImplemented
        return self.baseline == other.baseline and self.coeffs == other.coeffs

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        body = ", ".join(f"{v}: {c}" for v, c in sorted(self.coeffs.items()))
        return f"TreeFunction(baseline={self.baseline}, {{{body}}})"

    @property
    def support_depth(self) -> int:
        return max((v.generation for v in self.coeffs), default=0)

    def __add__(self, other: TreeFunction) -> TreeFunction:
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            coeffs[v] = coeffs.get(v, Fraction(0)) + c
        return TreeFunction(coeffs, self.baseline + other.baseline)

    def __neg__(self) -> TreeFunction:
        return self.scaled(-1)

    def __sub__(self, other: TreeFunction) -> TreeFunction:
        return self + (-other)

    def scaled(self, c) -> TreeFunction:
        c = Fraction(c)
        return TreeFunction({v: c * x for v, x in self.coeffs.items()}, c * self.baseline)

    def modulo_constants(self) -> TreeFunction:
        return TreeFunction(self.coeffs, 0)

    def to_json(self) -> dict:
        return {
            "baseline": frac_to_json(self.baseline),
            "coeffs": {str(v): frac_to_json(c) for v, c in sorted(self.coeffs.items())},
        }

    @classmethod
    def from_json(cls, obj: dict) -> TreeFunction:
        try:
            coeffs = {VertexId.parse(k): _frac(v) for k, v in obj.get("coeffs", {}).items()}
            return cls(coeffs, _frac(obj.get("baseline", [0, 1])))
        except (TypeError, ValueError, KeyError) as exc:
            raise ValidationError(f"malformed tree function: {exc}") from exc


def gamma(v: VertexId, c=1) -> TreeFunction:
    """``c`` times the indicator of the subtree rooted at ``v``."""
    return TreeFunction({v: Fraction(c)})


def from_values(values: Mapping[VertexId, Fraction]) -> TreeFunction:
    """Tree function with prescribed vertex values.

    The key set must be closed under taking parents; every vertex outside it
    inherits the value of its nearest listed ancestor.
    """
    if ROOT not in values:
        raise ValidationError("values must include the root")
    coeffs = {}
    for v, x in values.items():
        if v.is_root:
            continue
        if v.parent not in values:
            raise ValidationError("value set is not closed under parents", [str(v)])
        coeffs[v] = Fraction(x) - Fraction(values[v.parent])
    return TreeFunction(coeffs, Fraction(values[ROOT]))


def bv_norm(f: TreeFunction) -> Fraction:
    """``sum_A |f_A - f_parent(A)| 3**-gen(A)`` (zero on constants)."""
    return sum((abs(c) * edge_weight(v.generation) for v, c in f.coeffs.items()), Fraction(0))


def value_at(f: TreeFunction, v: VertexId) -> Fraction:
    total = f.baseline
    coeffs = f.coeffs
    for k in range(1, len(v.path) + 1):
        c = coeffs.get(VertexId(v.path[:k]))
        if c:
            total += c
    return total


def bv_norm_by_values(f: TreeFunction) -> Fraction:
    """The tree norm recomputed from vertex values on every edge to the support depth."""
    total = Fraction(0)
    for gen in range(1, f.support_depth + 1):
        w = edge_weight(gen)
        for v in vertices_at(gen):
            total += w * abs(value_at(f, v) - value_at(f, v.parent))
    return total


def trace_limit(f: TreeFunction, p: BoundaryPoint) -> Fraction:
    """Stable value of ``f`` along the branch of ``p``."""
    v = locate(p.position, p.side, f.support_depth)
    return value_at(f, v)


def _support_ancestors(f: TreeFunction) -> set[tuple[int, ...]]:
    """Paths of vertices with support strictly below them."""
    out = set()
    for v in f.coeffs:
        for k in range(len(v.path)):
            out.add(v.path[:k])
    return out


def trace_equals(f: TreeFunction, g: BoundaryData) -> bool:
    """Exact check that ``Tr f = g`` at every boundary point, both sides."""
    above = _support_ancestors(f)
    stack = [ROOT]
    while stack:
        v = stack.pop()
        const = g.constant_on_vertex(v)
        if v.path not in above:
            if const is None or value_at(f, v) != const:
                return False
        else:
            stack.extend(children(v))
    return True


def trace_difference(f: TreeFunction, h: TreeFunction) -> bool:
    """True when ``f`` and ``h`` have identical traces everywhere."""
    diff = f - h
    return trace_equals(diff, BoundaryData(()))


def clamp_W(f: TreeFunction, g: BoundaryData, check: bool = True) -> TreeFunction:
    """Fix ``f`` to the data's constant on every cylinder where the data is constant.

    Vertices whose cylinder straddles a jump of ``g`` keep their value.  The
    result has the same trace and no larger norm.
    """
    if check and not trace_equals(f, g):
        raise ContractViolation("clamp_W requires Tr f = g")
    root_const = g.constant_on_vertex(ROOT)
    if root_const is not None:
        return TreeFunction({}, root_const)
    values: dict[VertexId, Fraction] = {ROOT: value_at(f, ROOT)}
    stack = list(children(ROOT))
    while stack:
        v = stack.pop()
        const = g.constant_on_vertex(v)
        if const is not None:
            values[v] = const
        else:
            values[v] = value_at(f, v)
            stack.extend(children(v))
    return from_values(values)


def sum_functions(fs: Iterable[TreeFunction]) -> TreeFunction:
    total = TreeFunction()
    for f in fs:
        total = total + f
    return total
