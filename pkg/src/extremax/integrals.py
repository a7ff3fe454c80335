"""Samplers for single and multiple extremal integrals.

Scalar samplers run on a shared seeded stream so that max-linearity,
monotonicity, symmetrization and the other pathwise identities hold exactly
on the realization.  Batched samplers (for replicated distributional tests)
vectorize the same evaluation across replicates.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .integrands import (
    BoxIndicator,
    Integrand,
    MaxCombo,
    PowerIntegrand,
    max_symmetrize,
)
from .lepage import (
    LePageStream,
    TruncationPolicy,
    TruncationReport,
    eval_truncated,
    lepage_sup,
    truncation_bound,
)
from .sets import AtomSet
from .spaces import MeasureSpace, Rectangle, SpaceKind


@dataclass(frozen=True)
class JointSample:
    values: np.ndarray
    stream_seed: int
    reports: Tuple[TruncationReport, ...]


@dataclass(frozen=True)
class ProductDecomposition:
    terms: np.ndarray  # S^(0) .. S^(p^q)

    @property
    def max(self) -> float:
        return float(np.max(self.terms))


def derived_seed(seed: int, *key: int) -> int:
    """Deterministic 63-bit seed derived from a master seed and a key path."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def sample_integral(f: Integrand, alpha: float, space: MeasureSpace, seed: int,
                    policy: TruncationPolicy = TruncationPolicy()):
    """One draw of the order-k extremal integral of f.  Returns (value, report)."""
    stream = LePageStream(space, seed)
    return lepage_sup(f, alpha, stream, policy)


def sample_joint(fs: Sequence[Integrand], alpha: float, space: MeasureSpace,
                 seed: int, policy: TruncationPolicy = TruncationPolicy()) -> JointSample:
    """Joint draw of several integrals on one shared stream.

    All integrands are re-evaluated at a common prefix length (the largest
    the adaptive policy selects), so pathwise identities among them are exact.
    """
    stream = LePageStream(space, seed)
    firsts = [lepage_sup(f, alpha, stream, policy) for f in fs]
    n_common = max(rep.n_used for _, rep in firsts)
    view = stream.view(n_common)
    values = []
    reports = []
    for f, (_, rep) in zip(fs, firsts):
        if rep.n_used == n_common:
            values.append(eval_truncated(f, alpha, view))
            reports.append(TruncationReport(n_common, rep.remainder_bound, rep.converged))
        else:
            v = eval_truncated(f, alpha, view)
            env = f.envelope
            bound = None
            if env is not None:
                g = np.concatenate([view.gammas[:1], [view.next_gamma]])
                bound = truncation_bound(
                    env * space.psi_constant ** (f.k / alpha), alpha, f.k, g
                )
            values.append(v)
            reports.append(TruncationReport(n_common, bound, rep.converged))
    return JointSample(np.array(values), int(seed), tuple(reports))


def sample_decoupled(f: Integrand, alpha: float, space: MeasureSpace, seed: int,
                     policy: TruncationPolicy = TruncationPolicy(),
                     n_axes: Optional[int] = None) -> float:
    """One draw of the decoupled variant: k independent streams, full index grid.

    Each axis is truncated at the prefix length the adaptive policy selects
    for the coupled sampler on the same seed, so order comparisons are
    like-for-like.
    """
    if n_axes is None:
        probe = LePageStream(space, seed)
        _, rep = lepage_sup(f, alpha, probe, policy)
        n_axes = rep.n_used
    views = []
    for axis in range(f.k):
        s = LePageStream(space, derived_seed(seed, 101, axis))
        views.append(s.view(n_axes))
    return _decoupled_eval(f, alpha, views)


def _decoupled_eval(f: Integrand, alpha: float, views) -> float:
    k = f.k
    if k == 1:
        return eval_truncated(f, alpha, views[0])
    if isinstance(f, PowerIntegrand):
        return _decoupled_eval(f.base, alpha * f.exponent, views) ** f.exponent
    if isinstance(f, MaxCombo):
        return max(c * _decoupled_eval(t, alpha, views) for c, t in f.terms)
    if isinstance(f, BoxIndicator):
        out = f.coef
        for comp, v in zip(f.components, views):
            m = comp.contains(v.points)
            if not m.any():
                return 0.0
            out *= float(v.weights(alpha)[m].max())
        return out
    # generic: enumerate the full product grid
    n = len(views[0])
    if n ** k > 4_000_000:
        raise ValueError("decoupled grid too large for a generic integrand")
    idx = [np.arange(n)] * k
    grids = np.meshgrid(*idx, indexing="ij")
    pts = tuple(views[r].points[grids[r].ravel()] for r in range(k))
    w = np.ones(n ** k)
    for r in range(k):
        w = w * views[r].weights(alpha)[grids[r].ravel()]
    vals = f(*pts) * w
    return float(np.max(vals))


def sample_product_decomposition(f: Integrand, g: Integrand, alpha: float,
                                 space: MeasureSpace, seed: int,
                                 n: int = 64) -> ProductDecomposition:
    """Draw the coupled decomposition terms whose maximum reproduces, in law,
    the product of the two integrals.

    Requires symmetric integrands; asymmetric inputs are max-symmetrized
    first with a warning.  Term r glues r shared arrivals (squared weight)
    with p+q-2r free arrivals.
    """
    if not f.symmetric:
        warnings.warn("asymmetric left factor: max-symmetrizing")
        f = max_symmetrize(f)
    if not g.symmetric:
        warnings.warn("asymmetric right factor: max-symmetrizing")
        g = max_symmetrize(g)
    p, q = f.k, g.k
    stream = LePageStream(space, seed)
    view = stream.view(n)
    w1 = view.weights(alpha)        # psi^(1/a) Gamma^(-1/a)
    w2 = w1 * w1                    # shared arrivals carry the squared factor
    pts = view.points
    terms = []
    for r in range(0, min(p, q) + 1):
        best = 0.0
        nf, ng = p - r, q - r
        for shared in itertools.combinations(range(n), r):
            wsh = float(np.prod(w2[list(shared)])) if r else 1.0
            rest = [i for i in range(n) if i not in shared]
            for fpart in itertools.combinations(rest, nf):
                rest2 = [i for i in rest if i not in fpart]
                wf = float(np.prod(w1[list(fpart)])) if nf else 1.0
                args_f = [pts[list(shared + fpart)][i] for i in range(p)] if p else []
                fa = (
                    float(f(*[np.asarray([a]) for a in args_f])[0]) if p else 1.0
                )
                if fa == 0.0:
                    continue
                for gpart in itertools.combinations(rest2, ng):
                    wg = float(np.prod(w1[list(gpart)])) if ng else 1.0
                    args_g = [pts[list(shared + gpart)][i] for i in range(q)]
                    ga = float(g(*[np.asarray([a]) for a in args_g])[0])
                    if ga == 0.0:
                        continue
                    cand = fa * ga * wsh * wf * wg
                    if cand > best:
                        best = cand
        terms.append(best)
    return ProductDecomposition(np.array(terms))


def maxid_thinned_sample(fs: Sequence[Integrand], n_div: int, alpha: float,
                         space: MeasureSpace, seed: int,
                         policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    """Label every arrival uniformly in {1..n_div}, evaluate each integrand on
    every label class separately, and return the componentwise maximum.

    With n_div=1 this is pathwise identical to `sample_joint`.  For order-1
    integrands the label classes partition the index tuples, so the
    reconstruction is pathwise exact at any n_div; for orders >= 2 the
    label-homogeneous tuple set is strictly smaller (see tests).
    """
    if n_div < 1:
        raise ValueError("n_div must be >= 1")
    stream = LePageStream(space, seed)
    firsts = [lepage_sup(f, alpha, stream, policy) for f in fs]
    n_common = max(rep.n_used for _, rep in firsts)
    stream.extend(n_common + 1)
    label_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(911,))
    )
    labels = label_rng.integers(1, n_div + 1, size=n_common)
    out = np.zeros(len(fs))
    for r in range(1, n_div + 1):
        mask = labels == r
        sub = stream.subview(n_common, mask)
        for i, f in enumerate(fs):
            v = eval_truncated(f, alpha, sub) if mask.any() else 0.0
            if v > out[i]:
                out[i] = v
    return out


def decompose_offdiagonal_set(space: MeasureSpace, tuples) -> List[Rectangle]:
    """Exact disjoint rectangle cover of a finite off-diagonal set on a
    discrete space (singleton products)."""
    if space.kind is not SpaceKind.FINITE_DISCRETE:
        raise ValueError("exact decomposition is defined on discrete spaces")
    rects = []
    for tup in tuples:
        if len(set(tup)) != len(tup):
            raise ValueError(f"tuple {tup!r} touches the diagonal")
        rects.append(Rectangle([AtomSet([a]) for a in tup]))
    return rects


# -- batched samplers ------------------------------------------------------
#
# Replicated distributional tests need millions of draws; the scalar stream
# machinery is too slow for that.  For box/max-combination integrands the
# truncated supremum is a product of per-component first-hit arrival factors,
# which vectorizes across replicates.  Draws differ from the scalar stream
# layout but are deterministic given the block rng.


def _first_hit_gammas(space: MeasureSpace, components, rng, count,
                      chunk: int = 64, max_chunks: int = 1024):
    """Arrival time at the first base point falling in each component.

    Returns an array (count, n_components); rows lacking a hit after the cap
    get +inf (probability vanishes geometrically in the cap).
    """
    ncomp = len(components)
    out = np.full((count, ncomp), np.inf)
    need = np.ones(count, dtype=bool)
    base = np.zeros(count)
    for _ in range(max_chunks):
        idx = np.flatnonzero(need)
        if idx.size == 0:
            break
        m = idx.size
        incr = rng.exponential(size=(m, chunk))
        gam = base[idx, None] + np.cumsum(incr, axis=1)
        pts = space.sample_base(rng, m * chunk).reshape(m, chunk)
        for c, comp in enumerate(components):
            rows = ~np.isfinite(out[idx, c])
            if not rows.any():
                continue
            mask = comp.contains(pts[rows])
            has = mask.any(axis=1)
            first = np.argmax(mask, axis=1)
            sub = idx[rows]
            out[sub[has], c] = gam[rows][has, first[has]]
        base[idx] = gam[:, -1]
        need[idx] = ~np.isfinite(out[idx]).all(axis=1)
    return out


def _box_values_from_hits(f: Integrand, alpha: float, space: MeasureSpace,
                          comp_index, hits) -> np.ndarray:
    if isinstance(f, PowerIntegrand):
        return _box_values_from_hits(f.base, alpha * f.exponent, space,
                                     comp_index, hits) ** f.exponent
    if isinstance(f, MaxCombo):
        vals = [c * _box_values_from_hits(t, alpha, space, comp_index, hits)
                for c, t in f.terms]
        return np.maximum.reduce(vals)
    if isinstance(f, BoxIndicator):
        a = 1.0 / alpha
        psi = space.psi_constant
        out = np.full(hits.shape[0], f.coef)
        for comp in f.components:
            g = hits[:, comp_index[comp]]
            out = out * np.where(np.isfinite(g), psi ** a * g ** (-a), 0.0)
        return out
    raise ValueError("batched sampling supports box/max/power integrands only")


def _collect_components(f: Integrand, acc):
    if isinstance(f, PowerIntegrand):
        _collect_components(f.base, acc)
    elif isinstance(f, MaxCombo):
        for _, t in f.terms:
            _collect_components(t, acc)
    elif isinstance(f, BoxIndicator):
        for comp in f.components:
            acc.setdefault(comp, comp)
    else:
        raise ValueError("batched sampling supports box/max/power integrands only")


def sample_joint_block(fs: Sequence[Integrand], alpha: float, space: MeasureSpace,
                       rng: np.random.Generator, count: int) -> np.ndarray:
    """Vectorized joint draws (count x len(fs)) for box-structured integrands.

    Within a block all integrands share the per-component first-hit arrivals
    (components compare by value), so pathwise identities hold exactly inside
    each replicate, as with the scalar sampler.
    """
    acc = {}
    for f in fs:
        _collect_components(f, acc)
    comps = list(acc.values())
    comp_index = {c: i for i, c in enumerate(comps)}
    hits = _first_hit_gammas(space, comps, rng, count)
    cols = [_box_values_from_hits(f, alpha, space, comp_index, hits) for f in fs]
    return np.column_stack(cols)


def _first_two_hits(space: MeasureSpace, comp, rng, count,
                    chunk: int = 64, max_chunks: int = 1024):
    """Arrival times of the first two base points falling in one set."""
    out = np.full((count, 2), np.inf)
    found = np.zeros(count, dtype=np.intp)
    base = np.zeros(count)
    for _ in range(max_chunks):
        idx = np.flatnonzero(found < 2)
        if idx.size == 0:
            break
        m = idx.size
        gam = base[idx, None] + np.cumsum(rng.exponential(size=(m, chunk)), axis=1)
        pts = space.sample_base(rng, m * chunk).reshape(m, chunk)
        mask = comp.contains(pts)
        for r in range(m):
            hits = np.flatnonzero(mask[r])
            j = idx[r]
            for h in hits[: 2 - found[j]]:
                out[j, found[j]] = gam[r, h]
                found[j] += 1
        base[idx] = gam[:, -1]
    return out


def product_decomposition_block_order1(f: BoxIndicator, g: BoxIndicator,
                                       alpha: float, space: MeasureSpace,
                                       rng: np.random.Generator,
                                       count: int) -> np.ndarray:
    """Vectorized decomposition draws for two order-1 box indicators.

    Returns (count, 2): the no-shared-arrival term and the shared-arrival
    term.  The shared term scans the overlap of the two supports; the free
    term pairs the best distinct arrivals of each support.
    """
    if f.k != 1 or g.k != 1:
        raise ValueError("order-1 block path requires k=1 integrands")
    a = 1.0 / alpha
    psi = space.psi_constant ** a
    A, B = f.components[0], g.components[0]
    if A == B:
        hits = _first_two_hits(space, A, rng, count)
        g1, g2 = hits[:, 0], hits[:, 1]
        shared = f.coef * g.coef * np.where(np.isfinite(g1), (psi * g1 ** (-a)) ** 2, 0.0)
        free = f.coef * g.coef * np.where(
            np.isfinite(g2), (psi ** 2) * (g1 * g2) ** (-a), 0.0
        )
        return np.column_stack([free, shared])
    overlap = A.intersection(B)
    if overlap is None:
        hits = _first_hit_gammas(space, [A, B], rng, count)
        hA, hB = hits[:, 0], hits[:, 1]
        free = f.coef * g.coef * np.where(
            np.isfinite(hA) & np.isfinite(hB), (psi ** 2) * (hA * hB) ** (-a), 0.0
        )
        return np.column_stack([free, np.zeros(count)])
    raise ValueError("order-1 block path supports equal or disjoint supports")


def sample_decoupled_block(f: Integrand, alpha: float, space: MeasureSpace,
                           rng: np.random.Generator, count: int) -> np.ndarray:
    """Vectorized decoupled draws for box-structured integrands.

    Axes are independent streams; for a box term the per-component factor is
    the first hit along its own axis.
    """
    def rec(g, a):
        if isinstance(g, PowerIntegrand):
            return rec(g.base, a * g.exponent) ** g.exponent
        if isinstance(g, MaxCombo):
            return np.maximum.reduce([c * rec(t, a) for c, t in g.terms])
        if isinstance(g, BoxIndicator):
            out = np.full(count, g.coef)
            aa = 1.0 / a
            psi = space.psi_constant
            for comp in g.components:
                h = _first_hit_gammas(space, [comp], rng, count)[:, 0]
                out = out * np.where(np.isfinite(h), psi ** aa * h ** (-aa), 0.0)
            return out
        raise ValueError("batched decoupled sampling needs box-structured integrands")

    return rec(f, alpha)
