"""Point-set descriptors used to declare integrand supports and rectangle components.

Two concrete kinds: finite atom sets on discrete spaces, and finite unions of
half-open intervals [a, b) on the unit interval.  Half-open semantics make
disjointness decidable without measure-zero boundary ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SetError(ValueError):
    pass


@dataclass(frozen=True)
class AtomSet:
    """Finite collection of atom identifiers on a discrete space."""

    ids: frozenset

    def __init__(self, ids):
        object.__setattr__(self, "ids", frozenset(ids))
        if not self.ids:
            raise SetError("empty atom set")

    def contains(self, pts):
        pts = np.asarray(pts)
        members = self.ids
        return np.array([p in members for p in pts.ravel()]).reshape(pts.shape)

    def intersects(self, other: "AtomSet") -> bool:
        return bool(self.ids & other.ids)

    def intersection(self, other: "AtomSet"):
        common = self.ids & other.ids
        return AtomSet(common) if common else None

    def union(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.ids | other.ids)


def _normalize_intervals(intervals):
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    merged = []
    for a, b in ivs:
        if b <= a:
            raise SetError(f"degenerate interval [{a}, {b})")
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of half-open intervals [a, b), stored sorted and merged."""

    intervals: tuple

    def __init__(self, intervals):
        object.__setattr__(self, "intervals", _normalize_intervals(intervals))

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (pts >= a) & (pts < b)
        return out

    def intersects(self, other: "IntervalUnion") -> bool:
        for a, b in self.intervals:
            for c, d in other.intervals:
                if max(a, c) < min(b, d):
                    return True
        return False

    def intersection(self, other: "IntervalUnion"):
        pieces = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo < hi:
                    pieces.append((lo, hi))
        return IntervalUnion(pieces) if pieces else None

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.intervals + other.intervals)


def pairwise_disjoint(sets) -> bool:
    sets = list(sets)
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if sets[i].intersects(sets[j]):
                return False
    return True
