"""Extension operators from boundary data to tree functions."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable

import numpy as np

from .boundary import BoundaryData, _frac, frac_to_json
from .bvfun import TreeFunction, bv_norm, from_values, sum_functions
from .errors import ResourceLimitError, UnsupportedInputError, ValidationError
from .tree import (
    ROOT,
    Arc,
    BoundaryPoint,
    VertexId,
    children,
    directional_d,
    edge_weight,
    maximal_cylinder_decomposition,
    metric_dK,
    random_branch,
    require_rational,
    truncation,
    vertices_at,
    _interval,
)
from .levels import MAX_ARRAY_DEPTH, levels
from .trace_solver import solve

MAX_BISECTION_DEPTH = 12
MAX_SAMPLE_DEPTH = MAX_ARRAY_DEPTH


# -- indicators ---------------------------------------------------------------

def indicator_extension(arc: Arc) -> TreeFunction:
    """``sum gamma^A`` over the maximal cylinder decomposition of the arc."""
    if arc.full:
        return TreeFunction({}, 1)
    return TreeFunction({v: Fraction(1) for v in maximal_cylinder_decomposition(arc)})


# -- monotone step functions ---------------------------------------------------

@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on an arc, zero off the arc.

    Takes the value ``base`` from the arc start and jumps by ``delta`` at each
    listed point.
    """

    arc: Arc
    base: Fraction
    jumps: tuple[tuple[BoundaryPoint, Fraction], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", _frac(self.base))
        jumps = tuple((p, _frac(d)) for p, d in self.jumps)
        start = self.arc.start.position
        offsets = [(p.position - start) % 1 for p, _ in jumps]
        span = self.arc.length()
        bad = [i for i, off in enumerate(offsets) if not 0 < off < span]
        if bad:
            raise ValidationError("jump points must lie inside the arc", bad)
        order = sorted(range(len(jumps)), key=offsets.__getitem__)
        object.__setattr__(self, "jumps", tuple(jumps[i] for i in order))

    @property
    def is_monotone(self) -> bool:
        deltas = [d for _, d in self.jumps]
        return all(d >= 0 for d in deltas) or all(d <= 0 for d in deltas)

    @property
    def start_value(self) -> Fraction:
        return self.base

    @property
    def end_value(self) -> Fraction:
        """Limit of the function as the arc end is approached from inside."""
        return self.base + sum((d for _, d in self.jumps), Fraction(0))

    @property
    def total_mass(self) -> Fraction:
        return sum((abs(d) for _, d in self.jumps), Fraction(0))

    def __call__(self, p: BoundaryPoint) -> Fraction:
        if not self.arc.contains(p):
            return Fraction(0)
        value = self.base
        for q, d in self.jumps:
            if Arc(q, self.arc.end).contains(p):
                value += d
        return value

    def as_boundary_data(self) -> BoundaryData:
        terms = [(self.arc, self.base)]
        terms += [(Arc(q, self.arc.end), d) for q, d in self.jumps]
        return BoundaryData.from_overlapping(terms)

    def to_json(self) -> dict:
        return {
            "arc": self.arc.to_json(),
            "base": frac_to_json(self.base),
            "jumps": [{"at": p.to_json(), "delta": frac_to_json(d)} for p, d in self.jumps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> StepFunction:
        try:
            jumps = tuple((BoundaryPoint.from_json(j["at"]), _frac(j["delta"]))
                          for j in obj.get("jumps", []))
            return cls(Arc.from_json(obj["arc"]), _frac(obj.get("base", [0, 1])), jumps)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed step function: {exc}") from exc


@dataclass(frozen=True)
class MonotoneExtension:
    function: TreeFunction
    norm: Fraction
    d_K: Fraction
    scale: Fraction      # (|F(x)| + |F(x) - F(y)|) * d_K(x, y)
    chain_bound: Fraction  # |F(x)| d(arc) + sum_i |delta_i| d([s_i, y))

    @property
    def constant(self) -> Fraction | None:
        """Observed ``norm / scale``; None when the scale vanishes."""
        return self.norm / self.scale if self.scale else None


def monotone_extension(F: StepFunction) -> MonotoneExtension:
    """Finite Lebesgue-Stieltjes extension of a monotone step function.

    ``h = F(x) * ext([x, y)) + sum_i delta_i * ext([s_i, y))``.  The arc must be
    the direction realising ``d_K`` between its endpoints.
    """
    arc = F.arc
    if arc.full or arc.is_empty:
        raise UnsupportedInputError("monotone extension needs a proper arc")
    require_rational(arc)
    if not F.is_monotone:
        raise ValidationError("step function is not monotone along the arc")
    d_arc = directional_d(arc)
    d_k = metric_dK(arc.start, arc.end)
    if d_arc != d_k:
        raise UnsupportedInputError("arc is not the d_K-short direction")
    parts = [indicator_extension(arc).scaled(F.base)]
    chain = abs(F.base) * d_arc
    for q, d in F.jumps:
        sub = Arc(q, arc.end)
        parts.append(indicator_extension(sub).scaled(d))
        chain += abs(d) * directional_d(sub)
    h = sum_functions(parts)
    scale = (abs(F.start_value) + abs(F.start_value - F.end_value)) * d_k
    return MonotoneExtension(h, bv_norm(h), d_k, scale, chain)


MONOTONE_SPLIT_GENERATION = 3


@dataclass(frozen=True)
class StepShape:
    """A step function whose points are random branches, evaluated at any depth.

    All branches leave distinct generation-``MONOTONE_SPLIT_GENERATION``
    cylinders, so their truncations keep the same cyclic order at every depth
    from that generation on.
    """

    x: tuple[int, ...]
    y: tuple[int, ...]
    base: Fraction
    jumps: tuple[tuple[tuple[int, ...], Fraction], ...]

    def at_depth(self, depth: int) -> StepFunction:
        x = BoundaryPoint.from_position(truncation(self.x, depth))
        y = BoundaryPoint.from_position(truncation(self.y, depth))
        jumps = tuple((BoundaryPoint.from_position(truncation(b, depth)), d)
                      for b, d in self.jumps)
        return StepFunction(Arc(x, y), self.base, jumps)


def random_step_shape(rng: random.Random, depths, max_jumps: int = 4) -> StepShape:
    """Seeded monotone step shape whose arc is the ``d_K``-short direction at every depth."""
    length = max(depths)
    split = MONOTONE_SPLIT_GENERATION
    cells = list(vertices_at(split))
    while True:
        k = rng.randint(1, max_jumps)
        picks = rng.sample(cells, k + 2)
        branches = [random_branch(rng, length, v.path) for v in picks]
        x, y = branches[0], branches[1]
        ok = True
        for depth in depths:
            a = BoundaryPoint.from_position(truncation(x, depth))
            b = BoundaryPoint.from_position(truncation(y, depth))
            if directional_d(Arc(a, b)) != metric_dK(a, b):
                ok = False
                break
        if not ok:
            continue
        lo, hi = truncation(x, split), truncation(y, split)
        inside = [br for br in branches[2:] if 0 < (truncation(br, split) - lo) % 1 < (hi - lo) % 1]
        if not inside:
            continue
        sign = rng.choice((1, -1))
        jumps = tuple((br, Fraction(sign * rng.randint(1, 5))) for br in inside)
        return StepShape(x, y, Fraction(rng.randint(-5, 5)), jumps)


def monotone_constants(depths, samples: int, seed: int = 0) -> list[tuple]:
    """Rows ``(depth, samples, min C, max C, 0.0)`` for ``norm / scale`` of seeded shapes.

    Every sample is also checked against the exact chain bound
    ``norm <= chain_bound``.
    """
    depths = sorted(depths)
    if depths[0] < MONOTONE_SPLIT_GENERATION:
        raise UnsupportedInputError(f"depths start at {MONOTONE_SPLIT_GENERATION}")
    rng = random.Random(seed)
    shapes = [random_step_shape(rng, depths) for _ in range(samples)]
    rows = []
    for depth in depths:
        consts = []
        for shape in shapes:
            ext = monotone_extension(shape.at_depth(depth))
            if ext.norm > ext.chain_bound:  # pragma: no cover - triangle inequality
                raise AssertionError("extension norm exceeds its chain bound")
            if ext.constant is not None:
                consts.append(ext.constant)
        rows.append((depth, len(consts), min(consts), max(consts), 0.0))
    return rows


# -- Lipschitz monotone boundary functions -----------------------------------

@dataclass(frozen=True)
class BisectionResult:
    samples: tuple[tuple[Fraction, Fraction], ...]  # (position, value) along the arc
    lipschitz: Fraction                              # w.r.t. d_K over all sample pairs
    worst_balance: Fraction                          # min over splits of min(part)/whole


def _split_pieces(arc: Arc) -> list[VertexId]:
    pieces = maximal_cylinder_decomposition(arc)
    while len(pieces) == 1:
        pieces = children(pieces[0])
    return pieces


def lipschitz_monotone_boundary(a, b, arc: Arc, depth: int) -> BisectionResult:
    """Midpoint-average values on a recursive bisection of the arc.

    Each sub-arc is split at the boundary between consecutive maximal cylinders
    closest to its ``d``-midpoint (leftmost on ties); a single cylinder is
    replaced by its children first.
    """
    if depth > MAX_BISECTION_DEPTH:
        raise ResourceLimitError(f"bisection depth {depth} exceeds {MAX_BISECTION_DEPTH}")
    if arc.full or arc.is_empty:
        raise UnsupportedInputError("bisection needs a proper arc")
    require_rational(arc)
    a, b = Fraction(a), Fraction(b)
    start, end = arc.start.position, arc.end.position
    values: dict[Fraction, Fraction] = {}
    worst = Fraction(1)

    def split(z: Fraction, t: Fraction, fz: Fraction, ft: Fraction, level: int) -> None:
        nonlocal worst
        if level == depth:
            return
        sub = Arc.between(z, t)
        pieces = _split_pieces(sub)
        weights = [edge_weight(v.generation) for v in pieces]
        total = sum(weights, Fraction(0))
        acc, best = Fraction(0), None
        for i, w in enumerate(weights[:-1]):
            acc += w
            gap = abs(2 * acc - total)
            if best is None or gap < best[0]:
                best = (gap, i, acc)
        _, i, left = best
        worst = min(worst, min(left, total - left) / total)
        s = _interval(pieces[i + 1].path)[0]
        fs = (fz + ft) / 2
        values[s] = fs
        split(z, s, fz, fs, level + 1)
        split(s, t, fs, ft, level + 1)

    if a != b:
        split(start, end, a, b, 0)
    samples = [(start, a)]
    samples += sorted(values.items(), key=lambda kv: (kv[0] - start) % 1)
    samples.append((end, b))

    points = [BoundaryPoint.from_position(p) for p, _ in samples]
    lip = Fraction(0)
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            df = abs(samples[i][1] - samples[j][1])
            if df:
                lip = max(lip, df / metric_dK(points[i], points[j]))
    return BisectionResult(tuple(samples), lip, worst)


# -- right inverse --------------------------------------------------------------

def right_inverse_S(g: BoundaryData) -> TreeFunction:
    """A norm-minimal tree function with trace ``g`` (clamped form)."""
    return solve(g).minimizer


# -- density of piecewise-constant data ---------------------------------------

@dataclass(frozen=True)
class Samples:
    """Function values at the starts of all cylinders of one generation.

    ``numerators[i] / denominator`` is the value at the start of the ``i``-th
    cylinder of generation ``depth`` in boundary order; together these are all
    cylinder endpoints of that generation.
    """

    depth: int
    numerators: np.ndarray
    denominator: int

    @classmethod
    def from_function(cls, f: Callable[[Fraction], Fraction], depth: int) -> Samples:
        starts = [_interval(v.path)[0] for v in vertices_at(depth)]
        vals = [Fraction(f(s)) for s in starts]
        den = lcm(*(v.denominator for v in vals))
        return cls(depth, np.array([int(v * den) for v in vals], dtype=np.int64), den)

    @classmethod
    def dK_to_point(cls, depth: int, point: Fraction) -> Samples:
        """``d_K(., point)`` for a cylinder endpoint of generation ``<= depth``."""
        lv = levels(depth)
        return cls(depth, lv.dK_to(lv.leaf_index(point)), 3**depth)

    @classmethod
    def circle_distance(cls, depth: int, point: Fraction) -> Samples:
        """``d(., point)`` for a point that is a cylinder endpoint of generation ``<= depth``."""
        lv = levels(depth)
        den = 3 * 4**depth
        starts = lv.leaf_starts()
        x0 = Fraction(point) * den
        if x0.denominator != 1:
            raise UnsupportedInputError("reference point is not a sample position")
        diff = np.abs(starts - int(x0))
        return cls(depth, np.minimum(diff, den - diff), den)

    @classmethod
    def curve_linear(cls, depth: int, a: int = 1, b: int = 0) -> Samples:
        """``a*u + b*v`` at the points of ``K_depth``, oblique coordinates ``(u, v)``.

        The restriction of a linear function of the plane, so Lipschitz for
        the Euclidean distance along the snowflake.
        """
        from .geometry import leaf_curve_points

        pts = leaf_curve_points(depth)
        return cls(depth, a * pts[:, 0] + b * pts[:, 1], 3**depth)

    @classmethod
    def curve_sq_distance(cls, depth: int, point: Fraction) -> Samples:
        """Squared Euclidean distance on ``K_depth`` to the curve point at ``point``."""
        from .geometry import leaf_curve_points

        pts = leaf_curve_points(depth)
        lv = levels(depth)
        ref = pts[lv.leaf_index(point)]
        da, db = (pts - ref).T
        return cls(depth, da * da + da * db + db * db, 9**depth)

    def lipschitz_dK(self) -> Fraction:
        """Largest jump between neighbouring samples divided by their ``d_K`` distance.

        Consecutive sample points bound a single cylinder of generation
        ``depth``, so their distance is ``3**-depth``.
        """
        v = self.numerators
        jump = int(np.max(np.abs(np.roll(v, -1) - v)))
        return Fraction(jump * 3**self.depth, self.denominator)


@dataclass(frozen=True)
class DensityResult:
    k: int
    sample_depth: int
    g_k: BoundaryData
    norm: Fraction          # bv norm of h, truncated at the sample depth
    lipschitz: Fraction
    bound_scale: Fraction   # K (4/9)**k
    _minima: tuple = ()

    @property
    def constant(self) -> Fraction | None:
        return self.norm / self.bound_scale if self.bound_scale else None

    def to_tree_function(self) -> TreeFunction:
        """``h`` as an explicit tree function (only for small sample depths)."""
        if self.sample_depth > 6:
            raise ResourceLimitError("explicit h is limited to sample depth 6")
        minima, den = self._minima
        values = {ROOT: Fraction(0)}
        for gen in range(1, self.sample_depth + 1):
            for v, m in zip(vertices_at(gen), minima[gen - 1]):
                if gen <= self.k:
                    values[v] = Fraction(0)
                else:
                    anc = VertexId(v.path[:self.k])
                    values[v] = Fraction(int(m), den) - self.g_k.constant_on_vertex(anc)
        return from_values(values)


def density_approximation(samples: Samples, k: int) -> DensityResult:
    """Piecewise-constant approximation by generation-``k`` cylinder minima.

    ``g_k`` is the minimum of the samples on each generation-``k`` cylinder and
    ``h_A`` the minimum of ``f - g_k`` over the samples in ``D_inf(A)``; the
    tree is truncated at the sample depth.
    """
    D = samples.depth
    if k < 1:
        raise ValueError("k must be at least 1")
    if D < k:
        raise UnsupportedInputError(f"samples of depth {D} are too coarse for k={k}")
    if D > MAX_SAMPLE_DEPTH:
        raise ResourceLimitError(f"sample depth {D} exceeds {MAX_SAMPLE_DEPTH}")
    lv = levels(D)
    v = samples.numerators
    minima = [np.minimum(v, np.roll(v, -1))]
    for gen in range(D - 1, 0, -1):
        first = np.flatnonzero(np.diff(lv.parents[gen], prepend=-1))
        minima.insert(0, np.minimum.reduceat(minima[0], first))
    # h_A - h_parent = min_A f - min_parent f below generation k, and h = 0 above
    total = 0
    for gen in range(k + 1, D + 1):
        diff = minima[gen - 1] - minima[gen - 2][lv.parents[gen - 1]]
        total += 3**(D - gen) * int(diff.sum())
    norm = Fraction(total, samples.denominator * 3**D)

    den = samples.denominator
    level_k = minima[k - 1]
    pieces = []
    for vert, m in zip(vertices_at(k), level_k):
        lo, length = _interval(vert.path)
        pieces.append((lo, lo + length, Fraction(int(m), den)))
    g_k = BoundaryData.from_pieces(pieces)
    K = samples.lipschitz_dK()
    return DensityResult(k, D, g_k, norm, K, K * Fraction(4, 9)**k,
                         (tuple(minima), den))


DENSITY_FUNCTIONS = ("linear", "sq-distance", "tent")
DENSITY_OFFSET = 4  # sample depth is k + DENSITY_OFFSET


def density_samples(name: str, depth: int) -> Samples:
    """The fixed Lipschitz test functions used for density decay."""
    if name == "linear":
        return Samples.curve_linear(depth, 2, 1)
    if name == "sq-distance":
        return Samples.curve_sq_distance(depth, Fraction(0))
    if name == "tent":
        return Samples.circle_distance(depth, Fraction(1, 3))
    raise ValueError(f"unknown test function {name!r}; expected one of {DENSITY_FUNCTIONS}")


def density_decay(ks, names=DENSITY_FUNCTIONS, offset: int = DENSITY_OFFSET) -> list[tuple]:
    """Rows ``(function, k, norm, ratio to previous k)``; ratio is None for the first k."""
    rows = []
    for name in names:
        prev = None
        for k in ks:
            norm = density_approximation(density_samples(name, k + offset), k).norm
            rows.append((name, k, norm, None if prev is None else norm / prev))
            prev = norm
    return rows
