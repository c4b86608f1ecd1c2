"""Molecules, Arens-Eells norms by exact transportation, and the map Psi.

A molecule is a finitely supported, zero-sum weight on boundary points.  Its
Arens-Eells norm for a metric ``rho`` equals the optimal cost of moving the
positive part onto the negative part with unit cost ``rho`` (transport
duality), which is solved with networkx's network simplex on integer data.
Points are identified by torus position: both sides of a position are
branches converging to the same point of the snowflake.
"""

from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import mpmath
import networkx as nx

from .boundary import BoundaryData, _frac, frac_to_json
from .errors import ResourceLimitError, ValidationError
from .levels import levels
from .trace_solver import _tilde_d_positions, solve
from .tree import Arc, BoundaryPoint, random_branch, truncation

METRICS = ("tilde_d", "d", "d_alpha")
ALPHA_DPS = 60          # working precision for d ** log_4(3)
COST_SCALE = 10**40     # integer rounding of irrational costs
MAX_BRUTEFORCE_PAIRS = 6


# -- molecules -----------------------------------------------------------------

def _position(p) -> Fraction:
    if isinstance(p, BoundaryPoint):
        return p.position
    return Fraction(p) % 1


@dataclass(frozen=True, eq=False)
class Molecule:
    """Weights on boundary points, keyed by torus position."""

    atoms: Mapping[Fraction, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[Fraction, Fraction] = {}
        for p, w in self.atoms.items():
            pos = _position(p)
            clean[pos] = clean.get(pos, Fraction(0)) + _frac(w)
        object.__setattr__(self, "atoms", {p: w for p, w in sorted(clean.items()) if w})

    @classmethod
    def pair(cls, x, y, a=1) -> Molecule:
        """``a * (1_x - 1_y)``."""
        a = Fraction(a)
        return cls({_position(x): a}) + cls({_position(y): -a})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[object, object, object]]) -> Molecule:
        total = cls()
        for x, y, a in pairs:
            total = total + cls.pair(x, y, a)
        return total

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Molecule) and self.atoms == other.atoms

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: Molecule) -> Molecule:
        atoms = dict(self.atoms)
        for p, w in other.atoms.items():
            atoms[p] = atoms.get(p, Fraction(0)) + w
        return Molecule(atoms)

    def scaled(self, c) -> Molecule:
        c = Fraction(c)
        return Molecule({p: c * w for p, w in self.atoms.items()})

    def __neg__(self) -> Molecule:
        return self.scaled(-1)

    def __sub__(self, other: Molecule) -> Molecule:
        return self + (-other)

    @property
    def is_balanced(self) -> bool:
        return sum(self.atoms.values(), Fraction(0)) == 0

    @property
    def is_zero(self) -> bool:
        return not self.atoms

    def to_json(self) -> dict:
        return {"atoms": [{"point": BoundaryPoint.from_position(p).to_json(),
                           "weight": frac_to_json(w)} for p, w in self.atoms.items()]}

    @classmethod
    def from_json(cls, obj: dict) -> Molecule:
        try:
            return cls({BoundaryPoint.from_json(a["point"]).position: _frac(a["weight"])
                        for a in obj["atoms"]})
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed molecule: {exc}") from exc


# -- metrics ---------------------------------------------------------------------

def tilde_d_pos(x: Fraction, y: Fraction) -> Fraction:
    """Trace norm of the indicator of the arc between two positions."""
    if x == y:
        return Fraction(0)
    return _tilde_d_positions(min(x, y), max(x, y))


def d_pos(x: Fraction, y: Fraction) -> Fraction:
    delta = abs(x - y)
    return min(delta, 1 - delta)


@dataclass(frozen=True)
class Enclosure:
    """Certified interval ``[lo, hi]`` for a real number."""

    lo: mpmath.mpf
    hi: mpmath.mpf

    @property
    def mid(self) -> mpmath.mpf:
        with mpmath.workdps(ALPHA_DPS):
            return (self.lo + self.hi) / 2

    @property
    def width(self) -> mpmath.mpf:
        with mpmath.workdps(ALPHA_DPS):
            return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi




@lru_cache(maxsize=1 << 16)
def d_alpha_pos(x: Fraction, y: Fraction) -> Enclosure:
    """``d(x, y) ** log_4(3)`` as a certified interval."""
    d = d_pos(x, y)
    if d == 0:
        return Enclosure(mpmath.mpf(0), mpmath.mpf(0))
    iv = mpmath.iv
    with mpmath.workdps(ALPHA_DPS):
        iv.dps = ALPHA_DPS
        alpha = iv.log(3) / iv.log(4)
        val = iv.exp(alpha * iv.log(iv.mpf(d.numerator) / d.denominator))
        return Enclosure(mpmath.mpf(val.a), mpmath.mpf(val.b))


def _metric(name: str) -> Callable[[Fraction, Fraction], object]:
    try:
        return {"tilde_d": tilde_d_pos, "d": d_pos, "d_alpha": d_alpha_pos}[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; expected one of {METRICS}") from None


# -- transport -------------------------------------------------------------------

def _split(m: Molecule):
    if not m.is_balanced:
        raise ValidationError("molecule weights do not sum to zero",
                              [str(p) for p in m.atoms])
    pos = [(p, w) for p, w in m.atoms.items() if w > 0]
    neg = [(p, -w) for p, w in m.atoms.items() if w < 0]
    return pos, neg


def transport(supply: Sequence[Fraction], demand: Sequence[Fraction],
              cost: Sequence[Sequence[int]]) -> tuple[int, dict]:
    """Exact balanced transportation with integer costs and rational masses.

    Returns the optimal cost in units of ``1 / lcm(mass denominators)`` and the
    flow dictionary.
    """
    scale = math.lcm(*(x.denominator for x in (*supply, *demand)))
    g = nx.DiGraph()
    for i, s in enumerate(supply):
        g.add_node(("p", i), demand=-int(s * scale))
    for j, t in enumerate(demand):
        g.add_node(("n", j), demand=int(t * scale))
    for i in range(len(supply)):
        for j in range(len(demand)):
            g.add_edge(("p", i), ("n", j), weight=cost[i][j])
    value, flow = nx.network_simplex(g)
    return value, flow, scale


def ae_transport(m: Molecule, metric: str = "tilde_d"):
    """``(norm, plan)`` with ``plan`` a list of ``(source, target, mass)`` moves.

    The norm is an exact ``Fraction`` for ``tilde_d`` and ``d`` and an
    :class:`Enclosure` for ``d_alpha``; irrational costs are rounded down to
    multiples of ``1/COST_SCALE``, so ``[OPT(rounded), OPT(rounded) + mass/COST_SCALE]``
    contains the true optimum.
    """
    rho = _metric(metric)
    pos, neg = _split(m)
    if not pos:
        zero = Enclosure(mpmath.mpf(0), mpmath.mpf(0)) if metric == "d_alpha" else Fraction(0)
        return zero, []
    if metric == "d_alpha":
        with mpmath.workdps(ALPHA_DPS):
            costs = [[int(mpmath.floor(rho(p, q).lo * COST_SCALE)) for q, _ in neg]
                     for p, _ in pos]
        cden = None
    else:
        raw = [[rho(p, q) for q, _ in neg] for p, _ in pos]
        cden = math.lcm(*(c.denominator for row in raw for c in row))
        costs = [[int(c * cden) for c in row] for row in raw]
    value, flow, scale = transport([w for _, w in pos], [w for _, w in neg], costs)
    plan = [(pos[i][0], neg[j][0], Fraction(amount, scale))
            for i in range(len(pos)) for (_, j), amount in sorted(flow[("p", i)].items())
            if amount]
    if cden is not None:
        return Fraction(value, scale * cden), plan
    mass = sum((w for _, w in pos), Fraction(0))
    with mpmath.workdps(ALPHA_DPS):
        lo = mpmath.mpf(value) / (scale * COST_SCALE)
        hi = lo + mpmath.mpf(mass.numerator) / (mass.denominator * COST_SCALE)
    return Enclosure(lo, hi), plan


def ae_norm(m: Molecule, metric: str = "tilde_d"):
    """Arens-Eells norm of a molecule; see :func:`ae_transport`."""
    return ae_transport(m, metric)[0]


def ae_norm_bruteforce(m: Molecule, metric: str = "tilde_d") -> Fraction:
    """Minimum over perfect matchings of unit positive and negative atoms."""
    if metric == "d_alpha":
        raise ValueError("the matching oracle works with rational metrics only")
    rho = _metric(metric)
    pos, neg = _split(m)
    if any(w.denominator != 1 for _, w in pos + neg):
        raise ValueError("matching oracle needs integer weights")
    left = [p for p, w in pos for _ in range(int(w))]
    right = [q for q, w in neg for _ in range(int(w))]
    if len(left) > MAX_BRUTEFORCE_PAIRS:
        raise ResourceLimitError(f"{len(left)} unit pairs exceed {MAX_BRUTEFORCE_PAIRS}")
    if not left:
        return Fraction(0)
    return min(sum((rho(p, q) for p, q in zip(left, perm)), Fraction(0))
               for perm in itertools.permutations(right))


# -- the map Psi --------------------------------------------------------------------

def psi(m: Molecule) -> BoundaryData:
    """``sum W_i 1_[p_i, p_(i+1))`` with ``W_i`` the partial sums of the sorted atoms.

    This is the image of the chain ``sum W_i m_(p_i p_(i+1))``, a representation
    of ``m``.
    """
    if not m.is_balanced:
        raise ValidationError("molecule weights do not sum to zero")
    pts = list(m.atoms)
    pieces = []
    running = Fraction(0)
    for a, b in zip(pts, pts[1:]):
        running += m.atoms[a]
        pieces.append((a, b, running))
    if not pieces:
        return BoundaryData(())
    return BoundaryData.from_overlapping((Arc.between(a, b), w) for a, b, w in pieces)


def psi_of_representation(pairs: Iterable[tuple[object, object, object]]) -> BoundaryData:
    """``sum a_j 1_[x_j, y_j)`` for a representation ``sum a_j m_(x_j y_j)``."""
    return BoundaryData.from_overlapping(
        (Arc.between(_position(x), _position(y)), Fraction(a))
        for x, y, a in pairs if _position(x) != _position(y))


def psi_norm(m: Molecule) -> Fraction:
    return solve(psi(m)).norm


# -- sampling and reports ---------------------------------------------------------

def random_positions(rng: random.Random, depth: int, count: int) -> list[Fraction]:
    """Distinct random cylinder endpoints of generation ``<= depth``."""
    starts = levels(depth).leaf_starts()
    den = 3 * 4**depth
    picks = rng.sample(range(len(starts)), count)
    return [Fraction(int(starts[i]), den) for i in picks]


def random_branch_pair(rng: random.Random, length: int, max_common: int = 4):
    """Two branches sharing a random prefix of ``0..max_common`` digits, then splitting."""
    common = random_branch(rng, rng.randint(0, max_common))
    while True:
        x = random_branch(rng, length, common)
        y = random_branch(rng, length, common)
        if x[len(common)] != y[len(common)]:
            return x, y


def random_molecule(rng: random.Random, depth: int, max_pairs: int = 3,
                    max_weight: int = 3) -> Molecule:
    """Nonzero integer combination of ``m_(xy)`` with points at ``depth``."""
    while True:
        k = rng.randint(1, max_pairs)
        pts = random_positions(rng, depth, 2 * k)
        m = Molecule.from_pairs((pts[2 * j], pts[2 * j + 1], rng.randint(1, max_weight))
                                for j in range(k))
        if not m.is_zero:
            return m


@dataclass(frozen=True)
class RatioRow:
    depth: int
    samples: int
    min_ratio: float
    max_ratio: float
    enclosure_width: float

    def as_tuple(self) -> tuple:
        return (self.depth, self.samples, self.min_ratio, self.max_ratio, self.enclosure_width)


CSV_HEADER = ("depth", "samples", "min_ratio", "max_ratio", "enclosure_width")


@dataclass
class Report:
    rows: list[RatioRow]
    ok: bool
    failures: list[str] = field(default_factory=list)

    def row(self, depth: int) -> RatioRow:
        return next(r for r in self.rows if r.depth == depth)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _isomorphism_sample(m: Molecule) -> tuple[Fraction, Fraction]:
    return ae_norm(m, "tilde_d"), psi_norm(m)


def verify_isomorphism(depths: Sequence[int], samples: int, seed: int = 0,
                       threads: int = 1) -> Report:
    """Check ``||Psi(m)|| <= ||m||_AE`` exactly and record the reverse ratio per depth."""
    rows, failures = [], []
    for depth in depths:
        rng = random.Random(f"{seed}:{depth}")
        mols = [random_molecule(rng, depth) for _ in range(samples)]
        results = _map(_isomorphism_sample, mols, threads)
        ratios = []
        for m, (ae, tr) in zip(mols, results):
            if tr > ae:
                failures.append(f"depth {depth}: {m.to_json()}")
            ratios.append(ae / tr)
        rows.append(RatioRow(depth, samples, float(min(ratios)), float(max(ratios)), 0.0))
    return Report(rows, not failures, failures)


def _metric_sample(pair: tuple[Fraction, Fraction]) -> tuple[Fraction, Enclosure]:
    x, y = pair
    return tilde_d_pos(x, y), d_alpha_pos(x, y)


def metric_compare(depths: Sequence[int], samples: int, seed: int = 0,
                   threads: int = 1) -> Report:
    """Ratios ``tilde_d / d**log_4(3)`` over seeded pairs of cylinder endpoints.

    For each generation ``m`` up to ``max(depths)``, ``samples`` pairs of
    generation-``m`` endpoints are drawn with a random common prefix, so all
    scales appear.  The row for ``depth`` covers every pair of generation at
    most ``depth``; rows are therefore nested.
    """
    rows, failures = [], []
    lo = hi = None
    width = mpmath.mpf(0)
    count = 0
    for gen in range(1, max(depths) + 1):
        rng = random.Random(f"{seed}:{gen}")
        pairs = [random_branch_pair(rng, gen, max_common=gen - 1) for _ in range(samples)]
        pairs = [(truncation(x, gen), truncation(y, gen)) for x, y in pairs]
        results = _map(_metric_sample, pairs, threads)
        with mpmath.workdps(ALPHA_DPS):
            for (x, y), (td, da) in zip(pairs, results):
                tdm = mpmath.mpf(td.numerator) / td.denominator
                r_lo, r_hi = tdm / da.hi, tdm / da.lo
                lo = r_lo if lo is None else min(lo, r_lo)
                hi = r_hi if hi is None else max(hi, r_hi)
                rel = (da.hi - da.lo) / da.lo
                width = max(width, rel)
                if rel >= mpmath.mpf(10)**-30:
                    failures.append(f"generation {gen}: wide enclosure at {x}, {y}")
        count += len(pairs)
        if gen in depths:
            rows.append(RatioRow(gen, count, float(lo), float(hi), float(width)))
    return Report(rows, not failures, failures)
