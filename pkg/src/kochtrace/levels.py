"""Array view of the Whitney tree truncated at a fixed generation.

Vertices of each generation are stored in boundary order, so every cylinder
of the deepest generation is addressed by an integer.  Distances are kept as
integers in units of ``3**-depth`` to stay exact inside numpy.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ResourceLimitError, UnsupportedInputError
from .tree import CHILD_KINDS, Kind

MAX_ARRAY_DEPTH = 10

_CODE = {Kind.PANTS: 0, Kind.PALACE: 1}
_TABLE = [np.array([_CODE[k] for k in CHILD_KINDS[kind]]) for kind in (Kind.PANTS, Kind.PALACE)]


class Levels:
    """Per-generation arrays for generations ``1..depth``.

    ``kinds[j]``, ``parents[j]``, ``slot[j]`` and ``nsib[j]`` describe generation
    ``j + 1``: kind code (0 pants, 1 palace), index of the parent in the
    previous generation, position among siblings and number of siblings.
    """

    def __init__(self, depth: int) -> None:
        if not 1 <= depth <= MAX_ARRAY_DEPTH:
            raise ResourceLimitError(f"array depth must lie in 1..{MAX_ARRAY_DEPTH}")
        self.depth = depth
        kinds = [np.zeros(6, dtype=np.int8)]
        parents = [np.zeros(6, dtype=np.int64)]
        slot = [np.arange(6, dtype=np.int64)]
        nsib = [np.full(6, 6, dtype=np.int64)]
        for _ in range(depth - 1):
            k = kinds[-1]
            counts = np.where(k == 0, 5, 3)
            parent = np.repeat(np.arange(len(k)), counts)
            first = np.concatenate(([0], np.cumsum(counts)[:-1]))
            pos = np.arange(len(parent)) - first[parent]
            child = np.where(k[parent] == 0, _TABLE[0][np.minimum(pos, 4)],
                             _TABLE[1][np.minimum(pos, 2)])
            kinds.append(child.astype(np.int8))
            parents.append(parent)
            slot.append(pos)
            nsib.append(counts[parent])
        self.kinds, self.parents, self.slot, self.nsib = kinds, parents, slot, nsib

    @property
    def size(self) -> int:
        return len(self.kinds[-1])

    def leaf_starts(self) -> np.ndarray:
        """Starts of the deepest cylinders in units of ``1 / (3 * 4**depth)``."""
        widths = np.where(self.kinds[-1] == 0, 2, 1)
        return np.concatenate(([0], np.cumsum(widths)[:-1]))

    def leaf_index(self, position: Fraction) -> int:
        """Index of the deepest cylinder starting at ``position``."""
        x = Fraction(position) % 1 * (3 * 4**self.depth)
        starts = self.leaf_starts()
        i = int(np.searchsorted(starts, int(x))) if x.denominator == 1 else -1
        if i < 0 or i >= len(starts) or starts[i] != x:
            raise UnsupportedInputError(f"{position} is not an endpoint of generation {self.depth}")
        return i

    def ancestor_slots(self) -> np.ndarray:
        """``(depth, size)`` array: sibling position of each leaf's generation-``j+1`` ancestor."""
        return self._per_leaf()[0]

    @lru_cache(maxsize=None)
    def _per_leaf(self):
        D, N = self.depth, self.size
        anc = np.empty((D, N), dtype=np.int64)
        anc[D - 1] = np.arange(N)
        for j in range(D - 1, 0, -1):
            anc[j - 1] = self.parents[j][anc[j]]
        slots = np.stack([self.slot[j][anc[j]] for j in range(D)])
        nsibs = np.stack([self.nsib[j][anc[j]] for j in range(D)])
        weights = np.array([3**(D - j - 1) for j in range(D)], dtype=np.int64)[:, None]
        # running sums over generations 1..j+1 of before/after sibling weights
        before = np.cumsum(weights * slots, axis=0)
        after = np.cumsum(weights * (nsibs - slots - 1), axis=0)
        nonzero = slots != 0
        last = np.where(nonzero.any(axis=0), D - 1 - np.argmax(nonzero[::-1], axis=0), -1)
        return slots, anc, before, after, last, weights[:, 0]

    def directional(self, s: np.ndarray, e: np.ndarray) -> np.ndarray:
        """``d([x_s, x_e))`` in units of ``3**-depth`` for leaf-start index arrays.

        ``x_i`` is the start of leaf ``i``; ``s == e`` gives 0.
        """
        slots, anc, before, after, last, W = self._per_leaf()
        D = self.depth
        s = np.asarray(s, dtype=np.int64)
        e = np.asarray(e, dtype=np.int64)

        def suffix(idx, lvl):
            # d of [x_idx, end of its generation-(lvl+1) ancestor)
            m = last[idx]
            inner = m > lvl
            mm = np.maximum(m, 0)
            tail = after[mm, idx] - after[lvl, idx] + W[mm]
            return np.where(inner, tail, W[lvl])

        # wrapping arcs split at 0 without merging
        wrap = e < s
        to_end = suffix(s, np.zeros_like(s)) + W[0] * (6 - slots[0, s] - 1)
        from_zero = before[D - 1, e]

        # level of the first differing ancestor
        differ = anc[:, s] != anc[:, e]
        lvl = np.argmax(differ, axis=0)
        a = slots[lvl, s]
        b = slots[lvl, e]
        middle = (b - a - 1) * W[lvl]
        prefix = before[D - 1, e] - before[lvl, e]
        direct = suffix(s, lvl) + middle + prefix
        out = np.where(wrap, to_end + from_zero, direct)
        out = np.where(s == e, 0, out)
        return out

    def dK_to(self, p: int) -> np.ndarray:
        """``d_K(x_i, x_p)`` for every leaf start ``x_i``, in units of ``3**-depth``."""
        idx = np.arange(self.size)
        pp = np.full(self.size, p)
        return np.minimum(self.directional(pp, idx), self.directional(idx, pp))


@lru_cache(maxsize=4)
def levels(depth: int) -> Levels:
    return Levels(depth)
