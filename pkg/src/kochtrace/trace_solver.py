"""Exact quotient trace norms by convex piecewise-linear message passing.

For piecewise-constant data ``g`` every cylinder on which ``g`` is constant
is fixed to that constant (the W clamp does not increase the norm), so the
minimisation of ``sum 3**-n |f_A - f_parent|`` only involves the finitely many
vertices whose cylinders straddle a jump of ``g``.  Those are solved bottom-up:
each subtree reports its optimal cost as a convex PWL function of the parent
value.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Sequence

import numpy as np

from .boundary import BoundaryData
from .bvfun import TreeFunction, from_values
from .errors import ResourceLimitError
from .tree import ROOT, Arc, BoundaryPoint, VertexId, children, edge_weight

ZERO = Fraction(0)


@dataclass(frozen=True)
class PWLConvex:
    """Convex piecewise-linear function of one variable.

    Stored by its breakpoints ``xs`` (strictly increasing, at least one), the
    values ``ys`` there and the two outer slopes.
    """

    xs: tuple[Fraction, ...]
    ys: tuple[Fraction, ...]
    left: Fraction
    right: Fraction

    def __post_init__(self) -> None:
        if not self.xs or len(self.xs) != len(self.ys):
            raise ValueError("need matching, non-empty breakpoint and value lists")

    @classmethod
    def constant(cls, c=0) -> PWLConvex:
        return cls((ZERO,), (Fraction(c),), ZERO, ZERO)

    @classmethod
    def abs_term(cls, w, c) -> PWLConvex:
        """``t -> w |t - c|``."""
        w = Fraction(w)
        return cls((Fraction(c),), (ZERO,), -w, w)

    def slopes(self) -> list[Fraction]:
        """``[left, s_1, ..., right]``: slope of each linear piece, left to right."""
        inner = [(y1 - y0) / (x1 - x0)
                 for x0, x1, y0, y1 in zip(self.xs, self.xs[1:], self.ys, self.ys[1:])]
        return [self.left, *inner, self.right]

    def is_convex(self) -> bool:
        s = self.slopes()
        return all(a <= b for a, b in zip(s, s[1:]))

    def __call__(self, t) -> Fraction:
        t = Fraction(t)
        xs, ys = self.xs, self.ys
        if t <= xs[0]:
            return ys[0] + self.left * (t - xs[0])
        if t >= xs[-1]:
            return ys[-1] + self.right * (t - xs[-1])
        i = bisect.bisect_right(xs, t)
        x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
        return y0 + (y1 - y0) * (t - x0) / (x1 - x0)

    def __add__(self, other: PWLConvex) -> PWLConvex:
        xs = sorted(set(self.xs) | set(other.xs))
        ys = [self(x) + other(x) for x in xs]
        return PWLConvex(tuple(xs), tuple(ys), self.left + other.left,
                         self.right + other.right).simplified()

    def simplified(self) -> PWLConvex:
        """Drop breakpoints where the slope does not change."""
        if len(self.xs) == 1:
            return self
        s = self.slopes()
        keep = [i for i in range(len(self.xs)) if s[i] != s[i + 1]]
        if not keep:
            keep = [0]
        return PWLConvex(tuple(self.xs[i] for i in keep), tuple(self.ys[i] for i in keep),
                         self.left, self.right)

    def clip(self, w) -> tuple[PWLConvex, Fraction | None, Fraction | None]:
        """Infimal convolution with ``w|.|``: ``t -> min_s G(s) + w|s - t|``.

        Returns the transformed function and the interval ``[lo, hi]`` (None
        meaning unbounded) onto which an optimal ``s`` is obtained by clamping
        ``t``.
        """
        w = Fraction(w)
        s = self.slopes()
        k = len(self.xs)
        if self.right < -w or self.left > w:
            raise ValueError("clipped function is unbounded below")
        # s[i + 1] is the slope just right of xs[i]; s[i] the slope just left of it
        lo_i = None if self.left >= -w else next(i for i in range(k) if s[i + 1] >= -w)
        hi_i = None if self.right <= w else max(i for i in range(k) if s[i] <= w)
        a = 0 if lo_i is None else lo_i
        b = k - 1 if hi_i is None else hi_i
        clipped = PWLConvex(
            self.xs[a:b + 1], self.ys[a:b + 1],
            self.left if lo_i is None else -w,
            self.right if hi_i is None else w,
        )
        lo = None if lo_i is None else self.xs[lo_i]
        hi = None if hi_i is None else self.xs[hi_i]
        return clipped, lo, hi

    def minimum(self) -> tuple[Fraction, Fraction | None, Fraction | None]:
        """``(min value, leftmost minimiser, rightmost minimiser)``; None = unbounded."""
        if self.left > 0 or self.right < 0:
            raise ValueError("function is unbounded below")
        s = self.slopes()
        k = len(self.xs)
        lo = None if self.left == 0 else self.xs[next(i for i in range(k) if s[i + 1] >= 0)]
        hi = None if self.right == 0 else self.xs[max(i for i in range(k) if s[i] <= 0)]
        at = lo if lo is not None else (hi if hi is not None else self.xs[0])
        return self(at), lo, hi


def _clamp(t: Fraction, lo: Fraction | None, hi: Fraction | None) -> Fraction:
    if lo is not None and t < lo:
        return lo
    if hi is not None and t > hi:
        return hi
    return t


@dataclass(frozen=True)
class TraceSolution:
    norm: Fraction
    minimizer: TreeFunction
    free_vertices: tuple[VertexId, ...]


def _solve(g: BoundaryData) -> TraceSolution:
    root_const = g.constant_on_vertex(ROOT)
    if root_const is not None:
        return TraceSolution(ZERO, TreeFunction({}, root_const), ())

    windows: dict[VertexId, tuple[Fraction | None, Fraction | None]] = {}
    fixed: dict[VertexId, Fraction] = {}
    free: list[VertexId] = [ROOT]

    def collect(v: VertexId) -> PWLConvex:
        total = PWLConvex.constant()
        for c in children(v):
            w = edge_weight(c.generation)
            const = g.constant_on_vertex(c)
            if const is not None:
                fixed[c] = const
                total = total + PWLConvex.abs_term(w, const)
            else:
                free.append(c)
                message, lo, hi = collect(c).clip(w)
                windows[c] = (lo, hi)
                total = total + message
        return total

    root_cost = collect(ROOT)
    norm, lo, hi = root_cost.minimum()
    # any minimiser will do in the quotient; prefer 0, else the nearest end
    root_value = _clamp(ZERO, lo, hi)

    values: dict[VertexId, Fraction] = {ROOT: root_value}
    for v in free[1:]:  # pre-order, parents first
        values[v] = _clamp(values[v.parent], *windows[v])
    values.update(fixed)
    minimizer = from_values(values)
    return TraceSolution(norm, minimizer, tuple(free))


def trace_norm(g: BoundaryData) -> tuple[Fraction, TreeFunction]:
    """``(||g||, f)`` with ``f`` a clamped norm minimiser among tree functions with trace ``g``."""
    sol = _solve(g)
    return sol.norm, sol.minimizer


def solve(g: BoundaryData) -> TraceSolution:
    return _solve(g)


def free_vertices(g: BoundaryData) -> list[VertexId]:
    """Vertices whose cylinder straddles a jump of ``g``, parents before children."""
    if g.constant_on_vertex(ROOT) is not None:
        return []
    out = []
    stack = [ROOT]
    while stack:
        v = stack.pop()
        out.append(v)
        for c in reversed(children(v)):
            if g.constant_on_vertex(c) is None:
                stack.append(c)
    return out


def trace_norm_bruteforce(g: BoundaryData, depth_cap: int = 4,
                          max_assignments: int = 5_000_000) -> Fraction:
    """Exhaustive minimum over free-vertex values drawn from ``{0} U coefficients``.

    The objective, as a function of one free value with the others fixed, is
    convex piecewise linear with kinks at neighbouring values, so restricting
    to the finite value set loses nothing; the winning assignment is re-checked
    against every single-vertex move.
    """
    if depth_cap > 4:
        raise ResourceLimitError("brute force depth cap is at most 4")
    if g.reduction_depth > depth_cap:
        raise ResourceLimitError(
            f"data needs depth {g.reduction_depth} > cap {depth_cap}")
    free = free_vertices(g)
    if not free:
        return ZERO
    candidates = sorted(g.coefficients() | {ZERO})
    k, n = len(candidates), len(free)
    if k**n > max_assignments:
        raise ResourceLimitError(f"{k}**{n} assignments exceed {max_assignments}")

    index = {v: i for i, v in enumerate(free)}
    free_edges: list[tuple[int, int, Fraction]] = []   # (parent, child, weight)
    fixed_edges: list[tuple[int, Fraction, Fraction]] = []  # (parent, const, weight)
    for v in free:
        for c in children(v):
            w = edge_weight(c.generation)
            if c in index:
                free_edges.append((index[v], index[c], w))
            else:
                fixed_edges.append((index[v], g.constant_on_vertex(c), w))

    scale_v = lcm(*(x.denominator for x in candidates))
    scale_w = 3**(depth_cap + 1)
    ivals = np.array([int(x * scale_v) for x in candidates], dtype=np.int64)
    grid = np.indices((k,) * n, dtype=np.int8).reshape(n, -1)
    vals = ivals[grid]
    cost = np.zeros(grid.shape[1], dtype=np.int64)
    for p, c, w in free_edges:
        cost += int(w * scale_w) * np.abs(vals[p] - vals[c])
    for p, const, w in fixed_edges:
        cost += int(w * scale_w) * np.abs(vals[p] - int(const * scale_v))
    best = int(np.argmin(cost))
    assignment = [candidates[i] for i in grid[:, best]]

    def objective(x: Sequence[Fraction]) -> Fraction:
        total = sum((w * abs(x[p] - x[c]) for p, c, w in free_edges), ZERO)
        return total + sum((w * abs(x[p] - const) for p, const, w in fixed_edges), ZERO)

    value = objective(assignment)
    for i in range(n):
        for alt in candidates:
            trial = list(assignment)
            trial[i] = alt
            if objective(trial) < value:  # pragma: no cover - would be an oracle bug
                raise AssertionError("enumeration optimum is not locally optimal")
    assert value == Fraction(int(cost[best]), scale_v * scale_w)
    return value


@lru_cache(maxsize=1 << 16)
def _tilde_d_positions(x: Fraction, y: Fraction) -> Fraction:
    forward = BoundaryData.indicator(Arc.between(x, y))
    backward = BoundaryData.indicator(Arc.between(y, x))
    a = _solve(forward).norm
    b = _solve(backward).norm
    if a != b:  # pragma: no cover - complementary indicators differ by a constant
        raise AssertionError(f"orientation dependence in tilde_d: {a} != {b}")
    return a


def tilde_d(x: BoundaryPoint, y: BoundaryPoint) -> Fraction:
    """Trace norm of the indicator of the arc between ``x`` and ``y``."""
    px, py = x.position, y.position
    if px == py:
        return ZERO
    if py < px:
        px, py = py, px
    return _tilde_d_positions(px, py)


def random_step_data(rng, depth: int, max_arcs: int = 2) -> BoundaryData:
    """Seeded data: up to ``max_arcs`` disjoint arcs between generation-``depth`` endpoints.

    ``rng`` is a :class:`random.Random`; coefficients are small halves.
    """
    from .levels import levels

    starts = levels(depth).leaf_starts()
    den = 3 * 4**depth
    k = rng.randint(1, max_arcs)
    pts = sorted(Fraction(int(starts[i]), den) for i in rng.sample(range(len(starts)), 2 * k))
    terms = tuple((Arc.between(pts[2 * i], pts[2 * i + 1]),
                   Fraction(rng.choice((-3, -2, -1, 1, 2, 3)), rng.choice((1, 2))))
                  for i in range(k))
    return BoundaryData(terms)


def verify_trace_oracle(depth: int, samples: int, seed: int = 0) -> list[tuple]:
    """Rows ``(sample, norm, oracle, match)`` comparing the solver with brute force.

    Instances whose enumeration would exceed the oracle's budget are redrawn.
    """
    import random

    rng = random.Random(seed)
    rows = []
    while len(rows) < samples:
        g = random_step_data(rng, depth)
        try:
            oracle = trace_norm_bruteforce(g, depth_cap=max(depth, g.reduction_depth))
        except ResourceLimitError:
            continue
        norm = _solve(g).norm
        rows.append((len(rows), norm, oracle, norm == oracle))
    return rows
