"""Nonnegative k-variate integrands vanishing on diagonals.

Structured forms (box indicators, max-combinations, powers, separable
products) carry enough shape information for exact O(N) evaluation of the
truncated series supremum; arbitrary callables fall back to full tuple
enumeration in the engine.
"""

from __future__ import annotations

import itertools
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .sets import pairwise_disjoint


class IntegrandError(ValueError):
    pass


def _distinct_mask(pts):
    """Boolean mask of tuples whose coordinates are pairwise distinct."""
    n = np.broadcast(*pts).shape
    mask = np.ones(n, dtype=bool)
    k = len(pts)
    for i in range(k):
        for j in range(i + 1, k):
            mask &= np.asarray(pts[i]) != np.asarray(pts[j])
    return mask


class Integrand:
    """Base class. ``k`` is the order, ``__call__`` is vectorized."""

    k: int
    symmetric: bool
    envelope: Optional[float]

    def __init__(self, k, symmetric=False, envelope=None, support_projections=None):
        if k < 1:
            raise IntegrandError("order k must be >= 1")
        self.k = int(k)
        self.symmetric = bool(symmetric)
        self.envelope = None if envelope is None else float(envelope)
        self.support_projections = support_projections

    def __call__(self, *pts):
        raise NotImplementedError

    def stream_sup(self, view, alpha):
        """Exact truncated supremum on a stream prefix, or None if no fast path."""
        return None


class GenericIntegrand(Integrand):
    """Arbitrary vectorized callable; forced to vanish on coinciding coordinates."""

    def __init__(self, fn: Callable, k, symmetric=False, envelope=None,
                 support_projections=None):
        super().__init__(k, symmetric, envelope, support_projections)
        self._fn = fn

    def __call__(self, *pts):
        vals = np.asarray(self._fn(*pts), dtype=float)
        if self.k > 1:
            vals = np.where(_distinct_mask(pts), vals, 0.0)
        return vals


class ZeroIntegrand(Integrand):
    def __init__(self, k):
        super().__init__(k, symmetric=True, envelope=0.0)

    def __call__(self, *pts):
        return np.zeros(np.broadcast(*pts).shape, dtype=float)

    def stream_sup(self, view, alpha):
        return 0.0


class BoxIndicator(Integrand):
    """coef * indicator of an off-diagonal rectangle S_1 x ... x S_k.

    Components must be pairwise disjoint, which makes the integrand vanish on
    diagonals and lets the truncated supremum factorize per coordinate.
    """

    def __init__(self, components, coef=1.0):
        components = tuple(components)
        if not pairwise_disjoint(components):
            raise IntegrandError("box components must be pairwise disjoint")
        if coef <= 0:
            raise IntegrandError("coefficient must be positive")
        super().__init__(
            k=len(components),
            symmetric=(len(components) == 1),
            envelope=float(coef),
            support_projections=components,
        )
        self.components = components
        self.coef = float(coef)

    def __call__(self, *pts):
        if len(pts) != self.k:
            raise IntegrandError("wrong arity")
        mask = np.ones(np.broadcast(*pts).shape, dtype=bool)
        for comp, p in zip(self.components, pts):
            mask &= comp.contains(np.asarray(p))
        return np.where(mask, self.coef, 0.0)

    def stream_sup(self, view, alpha):
        weights = view.weights(alpha)
        best = self.coef
        for comp in self.components:
            m = comp.contains(view.points)
            if not m.any():
                return 0.0
            best *= float(weights[m].max())
        return best


class MaxCombo(Integrand):
    """Pointwise maximum of scaled integrand terms (max-linear combination)."""

    def __init__(self, terms: Sequence[Tuple[float, Integrand]], symmetric=None):
        terms = [(float(c), t) for c, t in terms]
        if not terms:
            raise IntegrandError("empty max-combination")
        ks = {t.k for _, t in terms}
        if len(ks) != 1:
            raise IntegrandError("terms must share the order k")
        envs = [t.envelope for _, t in terms]
        env = None if any(e is None for e in envs) else max(
            c * e for (c, _), e in zip(terms, envs)
        )
        if symmetric is None:
            symmetric = all(t.symmetric for _, t in terms)
        proj = None
        if all(t.support_projections is not None for _, t in terms):
            proj = tuple(
                _union_all([t.support_projections[i] for _, t in terms])
                for i in range(ks.pop())
            )
        super().__init__(k=terms[0][1].k, symmetric=symmetric, envelope=env,
                         support_projections=proj)
        self.terms = terms

    def __call__(self, *pts):
        vals = [c * t(*pts) for c, t in self.terms]
        return np.maximum.reduce(vals)

    def stream_sup(self, view, alpha):
        out = 0.0
        for c, t in self.terms:
            v = t.stream_sup(view, alpha)
            if v is None:
                return None
            out = max(out, c * v)
        return out


def _union_all(sets):
    out = sets[0]
    for s in sets[1:]:
        out = out.union(s)
    return out


class PowerIntegrand(Integrand):
    """base ** r; under tail index a it evaluates as the base at index a*r, raised to r."""

    def __init__(self, base: Integrand, exponent: float):
        if exponent <= 0:
            raise IntegrandError("exponent must be positive")
        env = None if base.envelope is None else base.envelope ** exponent
        super().__init__(k=base.k, symmetric=base.symmetric, envelope=env,
                         support_projections=base.support_projections)
        self.base = base
        self.exponent = float(exponent)

    def __call__(self, *pts):
        return self.base(*pts) ** self.exponent

    def stream_sup(self, view, alpha):
        v = self.base.stream_sup(view, alpha * self.exponent)
        if v is None:
            return None
        return v ** self.exponent


class Separable(Integrand):
    """Product of univariate factors, zeroed on coinciding coordinates.

    Factors are vectorized callables.  For identical factors, or order 2, the
    truncated supremum has an exact fast path.
    """

    def __init__(self, factors, envelopes=None, identical=None,
                 support_projections=None):
        factors = list(factors)
        env = None
        if envelopes is not None:
            env = float(np.prod([float(e) for e in envelopes]))
        if identical is None:
            identical = all(f is factors[0] for f in factors)
        super().__init__(k=len(factors), symmetric=identical, envelope=env,
                         support_projections=support_projections)
        self.factors = factors
        self.identical = identical

    def __call__(self, *pts):
        vals = np.ones(np.broadcast(*pts).shape, dtype=float)
        for f, p in zip(self.factors, pts):
            vals = vals * np.asarray(f(np.asarray(p)), dtype=float)
        if self.k > 1:
            vals = np.where(_distinct_mask(pts), vals, 0.0)
        return vals

    def stream_sup(self, view, alpha):
        weights = view.weights(alpha)
        if self.identical:
            s = np.asarray(self.factors[0](view.points), dtype=float) * weights
            if len(s) < self.k:
                return 0.0
            top = np.sort(s)[-self.k:]
            return float(np.prod(top))
        if self.k == 2:
            a = np.asarray(self.factors[0](view.points), dtype=float) * weights
            b = np.asarray(self.factors[1](view.points), dtype=float) * weights
            if len(a) < 2:
                return 0.0
            ia = np.argsort(a)[-2:][::-1]
            ib = np.argsort(b)[-2:][::-1]
            best = 0.0
            for i in ia:
                for j in ib:
                    if i != j:
                        best = max(best, float(a[i] * b[j]))
            return best
        return None


class Symmetrized(Integrand):
    """Pointwise maximum over argument permutations of a base integrand."""

    def __init__(self, base: Integrand):
        super().__init__(k=base.k, symmetric=True, envelope=base.envelope,
                         support_projections=_symmetrized_projections(base))
        self.base = base

    def __call__(self, *pts):
        vals = None
        for perm in itertools.permutations(range(self.k)):
            v = self.base(*[pts[i] for i in perm])
            vals = v if vals is None else np.maximum(vals, v)
        return vals

    def stream_sup(self, view, alpha):
        # the supremum over all distinct tuples of a symmetrized integrand
        # coincides with the base's supremum over all distinct tuples, which
        # structured bases already compute
        return self.base.stream_sup(view, alpha)


def _symmetrized_projections(base):
    proj = base.support_projections
    if proj is None:
        return None
    u = _union_all(list(proj))
    return tuple(u for _ in range(base.k))


def max_symmetrize(f: Integrand) -> Integrand:
    """Pointwise maximum of f over coordinate permutations (no-op if symmetric)."""
    if f.symmetric:
        return f
    if isinstance(f, BoxIndicator):
        terms = [
            (1.0, BoxIndicator([f.components[i] for i in perm], coef=f.coef))
            for perm in itertools.permutations(range(f.k))
        ]
        return MaxCombo(terms, symmetric=True)
    if isinstance(f, MaxCombo):
        terms = []
        for c, t in f.terms:
            g = max_symmetrize(t)
            if isinstance(g, MaxCombo):
                terms.extend((c * c2, t2) for c2, t2 in g.terms)
            else:
                terms.append((c, g))
        return MaxCombo(terms, symmetric=True)
    return Symmetrized(f)


def probe_vanishes_on_diagonal(f: Integrand, sampler, rng, trials=64) -> bool:
    """Randomized check that f is zero when two arguments coincide."""
    if f.k == 1:
        return True
    for _ in range(trials):
        pts = list(sampler(rng, f.k))
        i, j = rng.choice(f.k, size=2, replace=False)
        pts[j] = pts[i]
        if float(f(*[np.asarray([p]) for p in pts])[0]) != 0.0:
            return False
    return True


def probe_symmetric(f: Integrand, sampler, rng, trials=64) -> bool:
    """Randomized check of permutation invariance on off-diagonal tuples."""
    if f.k == 1:
        return True
    for _ in range(trials):
        pts = [np.asarray([p]) for p in sampler(rng, f.k)]
        base = float(f(*pts)[0])
        perm = rng.permutation(f.k)
        if not np.isclose(base, float(f(*[pts[i] for i in perm])[0]), rtol=1e-12):
            return False
    return True
