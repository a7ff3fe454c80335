"""Measure-theoretic substrate: a base space with control measure, plus an
equivalent probability measure used for base-point sampling.

Three space kinds are supported: finite discrete spaces, the unit interval
with a density against Lebesgue, and renewal-path spaces (built by
:mod:`extremax.regen`).  The equivalent probability measure is always the
normalized control measure, so the density ratio (control measure over
sampling measure) is the constant total mass.  Alternative equivalent
measures, needed by the integrability diagnostics, are expressed with
:class:`EquivalentMeasure`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .sets import AtomSet, IntervalUnion, SetError, pairwise_disjoint


class SpaceError(ValueError):
    pass


class SpaceKind(enum.Enum):
    FINITE_DISCRETE = "finite_discrete"
    UNIT_INTERVAL = "unit_interval"
    RENEWAL_PATH = "renewal_path"


@dataclass(frozen=True)
class DensityFn:
    """Density of the control measure against Lebesgue on [0, 1]."""

    fn: Optional[Callable[[np.ndarray], np.ndarray]]
    constant: bool = False

    def __call__(self, x):
        if self.fn is None:
            return np.ones_like(np.asarray(x, dtype=float))
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class EquivalentMeasure:
    """A probability measure equivalent to the control measure.

    ``sample(rng, size)`` draws base points, ``psi(pts)`` evaluates the
    density ratio d(control)/d(this measure) at those points.
    """

    sample: Callable[[np.random.Generator, int], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    label: str = "default"
    psi_bound: Optional[float] = None  # finite when psi is bounded


_CDF_GRID = 1 << 14


@dataclass(frozen=True)
class MeasureSpace:
    kind: SpaceKind
    total_mass: float
    # discrete payload
    atom_ids: Tuple = ()
    atom_weights: Optional[np.ndarray] = None
    # unit-interval payload
    density: Optional[DensityFn] = None
    _cdf_xs: Optional[np.ndarray] = field(default=None, repr=False)
    _cdf_ps: Optional[np.ndarray] = field(default=None, repr=False)
    # renewal payload (opaque sampler installed by extremax.regen)
    _base_sampler: Optional[Callable] = field(default=None, repr=False)
    label: str = ""

    # -- equivalent probability measure: normalized control measure --------

    def sample_base(self, rng: np.random.Generator, size: int):
        """Draw ``size`` i.i.d. base points from the normalized control measure."""
        if self.kind is SpaceKind.FINITE_DISCRETE:
            p = self.atom_weights / self.total_mass
            idx = rng.choice(len(self.atom_ids), size=size, p=p)
            return np.array([self.atom_ids[i] for i in idx], dtype=object)
        if self.kind is SpaceKind.UNIT_INTERVAL:
            u = rng.random(size)
            if self.density is None or self.density.fn is None:
                return u
            return np.interp(u, self._cdf_ps, self._cdf_xs)
        return self._base_sampler(rng, size)

    def psi(self, pts):
        """Density ratio of the control measure against the sampling measure.

        With the normalized-control-measure convention this is identically
        the total mass; in particular it is 1 when the control measure is
        itself a probability measure.
        """
        return np.full(np.shape(pts) or (), self.total_mass, dtype=float)

    @property
    def psi_constant(self) -> float:
        return self.total_mass

    def default_measure(self) -> EquivalentMeasure:
        return EquivalentMeasure(
            sample=self.sample_base,
            psi=self.psi,
            label="normalized-control",
            psi_bound=self.total_mass,
        )

    # -- masses -------------------------------------------------------------

    def set_mass(self, s) -> float:
        """Control-measure mass of an atom set or interval union."""
        if self.kind is SpaceKind.FINITE_DISCRETE:
            if not isinstance(s, AtomSet):
                raise SpaceError("discrete space expects AtomSet")
            lut = dict(zip(self.atom_ids, self.atom_weights))
            missing = [i for i in s.ids if i not in lut]
            if missing:
                raise SpaceError(f"unknown atoms {missing!r}")
            return float(sum(lut[i] for i in s.ids))
        if self.kind is SpaceKind.UNIT_INTERVAL:
            if not isinstance(s, IntervalUnion):
                raise SpaceError("interval space expects IntervalUnion")
            if self.density is None or self.density.fn is None:
                return s.length
            total = 0.0
            for a, b in s.intervals:
                xs = np.linspace(a, b, 257)
                ys = self.density(xs)
                total += float(np.trapezoid(ys, xs))
            return total
        raise SpaceError("set_mass is not defined for renewal-path spaces")


def make_discrete_space(atoms: Sequence[Tuple[object, float]]) -> MeasureSpace:
    """Finite discrete space from (atom id, weight) pairs.

    The sampling measure is the normalized control measure, so the density
    ratio equals the total mass at every atom.
    """
    atoms = list(atoms)
    if not atoms:
        raise SpaceError("empty atom list")
    ids = tuple(a for a, _ in atoms)
    if len(set(ids)) != len(ids):
        raise SpaceError("duplicate atom ids")
    w = np.array([float(x) for _, x in atoms])
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise SpaceError("atom weights must be positive and finite")
    return MeasureSpace(
        kind=SpaceKind.FINITE_DISCRETE,
        total_mass=float(w.sum()),
        atom_ids=ids,
        atom_weights=w,
        label="discrete",
    )


def make_unit_interval(density: Optional[DensityFn] = None) -> MeasureSpace:
    """Unit interval with control measure density * Lebesgue (Lebesgue if None).

    Base points are drawn from the normalized control measure by inverse CDF
    (tabulated for non-uniform densities).
    """
    if density is None or density.fn is None:
        return MeasureSpace(
            kind=SpaceKind.UNIT_INTERVAL,
            total_mass=1.0,
            density=None,
            label="lebesgue[0,1]",
        )
    xs = np.linspace(0.0, 1.0, _CDF_GRID + 1)
    ys = density(xs)
    if np.any(~np.isfinite(ys)) or np.any(ys < 0):
        raise SpaceError("density must be finite and nonnegative on [0,1]")
    cdf = np.concatenate([[0.0], np.cumsum((ys[1:] + ys[:-1]) * 0.5 * np.diff(xs))])
    total = float(cdf[-1])
    if not np.isfinite(total) or total <= 0:
        raise SpaceError("density must have positive finite total mass")
    return MeasureSpace(
        kind=SpaceKind.UNIT_INTERVAL,
        total_mass=total,
        density=density,
        _cdf_xs=xs,
        _cdf_ps=cdf / total,
        label="interval-with-density",
    )


# -- off-diagonal rectangles ---------------------------------------------


@dataclass(frozen=True)
class Rectangle:
    """Product of pairwise disjoint component sets: an off-diagonal rectangle."""

    components: tuple

    def __init__(self, components):
        components = tuple(components)
        if len(components) < 1:
            raise SetError("rectangle needs at least one component")
        if not pairwise_disjoint(components):
            raise SetError("rectangle components must be pairwise disjoint")
        object.__setattr__(self, "components", components)

    @property
    def order(self) -> int:
        return len(self.components)


def _atomize(space: MeasureSpace, sets):
    """Refine the relevant part of the space into disjoint cells.

    Returns (cells, masses) where each input set is a union of cells.
    """
    if space.kind is SpaceKind.FINITE_DISCRETE:
        cells = [AtomSet([i]) for i in space.atom_ids]
        masses = [space.set_mass(c) for c in cells]
        return cells, np.array(masses)
    cuts = {0.0, 1.0}
    for s in sets:
        for a, b in s.intervals:
            cuts.add(a)
            cuts.add(b)
    edges = sorted(cuts)
    cells, masses = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            c = IntervalUnion([(a, b)])
            cells.append(c)
            masses.append(space.set_mass(c))
    return cells, np.array(masses)


def product_mass(space: MeasureSpace, k: int, rectangles) -> float:
    """Product-measure mass of a finite union of off-diagonal rectangles.

    Exact for discrete spaces and interval boxes: coordinates are refined
    into disjoint cells and covered cell products are counted once.
    """
    if isinstance(rectangles, Rectangle):
        rectangles = [rectangles]
    rects = list(rectangles)
    for r in rects:
        if r.order != k:
            raise SpaceError(f"rectangle order {r.order} != k={k}")
    if not rects:
        return 0.0
    all_sets = [c for r in rects for c in r.components]
    cells, masses = _atomize(space, all_sets)
    # map each component to the cell indices it covers
    cover = []
    for r in rects:
        comp_cells = []
        for comp in r.components:
            idx = [
                i
                for i, c in enumerate(cells)
                if comp.intersects(c)
            ]
            comp_cells.append(idx)
        cover.append(comp_cells)
    seen = set()
    total = 0.0
    for comp_cells in cover:
        for tup in itertools.product(*comp_cells):
            if len(set(tup)) != len(tup):
                # cells are disjoint, so a repeated cell can only happen if two
                # components overlap, which Rectangle construction forbids
                raise SpaceError("rectangle touches the diagonal")
            if tup not in seen:
                seen.add(tup)
                total += float(np.prod(masses[list(tup)]))
    return total
