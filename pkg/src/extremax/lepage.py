"""Seeded Poisson-arrival streams and truncated series suprema.

A stream holds a reproducible prefix of arrival times, i.i.d. base points and
their density-ratio values.  Several integrands evaluated on one stream share
the realization exactly, which turns the distributional identities of the
integral calculus into pathwise equalities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .integrands import Integrand
from .spaces import MeasureSpace

_CHUNK = 256


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    """Adaptive: double the prefix until the remainder bound is rel_tol times
    the current value (or the cap is hit).  Fixed: evaluate at n_init."""

    mode: str = "adaptive"  # "adaptive" | "fixed"
    n_init: int = 64
    n_max: int = 1 << 16
    rel_tol: float = 1e-6


@dataclass(frozen=True)
class TruncationReport:
    n_used: int
    remainder_bound: Optional[float]
    converged: bool


@dataclass(frozen=True)
class StreamView:
    """Read-only prefix of a stream: arrivals, base points, density ratios."""

    gammas: np.ndarray
    points: np.ndarray
    psis: np.ndarray
    next_gamma: float
    space: MeasureSpace

    def __len__(self):
        return len(self.gammas)

    def weights(self, alpha: float) -> np.ndarray:
        """Per-arrival factors psi^(1/alpha) * gamma^(-1/alpha)."""
        a = 1.0 / alpha
        return self.psis ** a * self.gammas ** (-a)


class LePageStream:
    """Extendable seeded realization of (arrival times, base points).

    Chunked generation makes the prefix a pure function of (seed, length): a
    fresh stream with the same seed reproduces it bit-exactly.
    """

    def __init__(self, space: MeasureSpace, seed: int):
        self.space = space
        self.seed = int(seed)
        self._gammas = np.empty(0)
        self._points = None
        self._psis = np.empty(0)

    @property
    def n(self) -> int:
        return len(self._gammas)

    def _chunk_rng(self, chunk_idx: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(chunk_idx,))
        return np.random.default_rng(ss)

    def extend(self, n: int) -> None:
        while self.n < n:
            chunk_idx = self.n // _CHUNK
            rng = self._chunk_rng(chunk_idx)
            incr = rng.exponential(size=_CHUNK)
            pts = self.space.sample_base(rng, _CHUNK)
            base = self._gammas[-1] if self.n else 0.0
            gam = base + np.cumsum(incr)
            self._gammas = np.concatenate([self._gammas, gam])
            if self._points is None:
                self._points = pts
            else:
                self._points = np.concatenate([self._points, pts])
            self._psis = np.concatenate([self._psis, self.space.psi(pts)])

    def view(self, n: int) -> StreamView:
        self.extend(n + 1)  # one extra arrival for the remainder bound
        return StreamView(
            gammas=self._gammas[:n],
            points=self._points[:n],
            psis=self._psis[:n],
            next_gamma=float(self._gammas[n]),
            space=self.space,
        )

    def subview(self, n: int, mask: np.ndarray) -> StreamView:
        """Prefix restricted to marked arrivals (used by the thinning sampler)."""
        v = self.view(n)
        return StreamView(
            gammas=v.gammas[mask],
            points=v.points[mask],
            psis=v.psis[mask],
            next_gamma=v.next_gamma,
            space=self.space,
        )


def poisson_arrivals(seed: int, n: int) -> np.ndarray:
    """First n arrival times of a unit-rate Poisson process, deterministic in seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty(n)
    filled = 0
    base = 0.0
    chunk_idx = 0
    while filled < n:
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(chunk_idx,))
        rng = np.random.default_rng(ss)
        gam = base + np.cumsum(rng.exponential(size=_CHUNK))
        take = min(_CHUNK, n - filled)
        out[filled:filled + take] = gam[:take]
        base = gam[-1]
        filled += take
        chunk_idx += 1
    return out


def enumerate_offdiag(k: int, n: int, ordered: bool):
    """Index tuples with pairwise distinct entries from range(n).

    ordered=True yields strictly increasing tuples (C(n, k) of them);
    ordered=False yields all distinct-entry tuples (n!/(n-k)!).
    Empty when k > n.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        return iter(())
    if ordered:
        return itertools.combinations(range(n), k)
    return itertools.permutations(range(n), k)


def truncation_bound(envelope: float, alpha: float, k: int, gammas: np.ndarray) -> float:
    """Pathwise bound on every term omitted beyond the prefix.

    ``gammas`` must contain the prefix followed by the next arrival: every
    omitted tuple has at least one arrival beyond the prefix (factor bounded
    by the next arrival) and its other k-1 factors are bounded by the first
    arrival's factor.
    """
    envelope = float(envelope)
    if envelope == 0.0:
        return 0.0
    g = np.asarray(gammas, dtype=float)
    if len(g) < 2 and k > 1:
        raise ValueError("need at least the first and the next arrival")
    g1 = g[0]
    gnext = g[-1]
    return envelope * g1 ** (-(k - 1) / alpha) * gnext ** (-1.0 / alpha)


_BRUTE_CAP = 2_000_000  # max tuples enumerated per evaluation


def _brute_eval(f: Integrand, alpha: float, view: StreamView) -> float:
    """Full enumeration of distinct-index tuples on the prefix.

    Weight products are always accumulated in sorted index order so that a
    symmetric integrand gives bit-identical values whether iterated over
    ordered or unordered tuples.
    """
    n = len(view)
    k = f.k
    if k > n:
        return 0.0
    w = view.weights(alpha)
    if k == 1:
        return float(np.max(f(view.points) * w))
    combos = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp)
    if len(combos) > _BRUTE_CAP:
        raise TruncationError(
            f"brute-force enumeration of {len(combos)} tuples exceeds cap; "
            "use a structured integrand or a smaller prefix"
        )
    wprod = w[combos[:, 0]]
    for r in range(1, k):
        wprod = wprod * w[combos[:, r]]
    best = 0.0
    perms = [tuple(range(k))] if f.symmetric else list(itertools.permutations(range(k)))
    for perm in perms:
        pts = tuple(view.points[combos[:, perm[r]]] for r in range(k))
        vals = f(*pts) * wprod
        m = float(np.max(vals))
        if m > best:
            best = m
    return best


def eval_truncated(f: Integrand, alpha: float, view: StreamView) -> float:
    """Truncated supremum on a fixed prefix (structured fast path if any)."""
    v = f.stream_sup(view, alpha)
    if v is not None:
        return float(v)
    return _brute_eval(f, alpha, view)


def _effective_envelope(f: Integrand, alpha: float, space: MeasureSpace) -> Optional[float]:
    if f.envelope is None:
        return None
    return f.envelope * space.psi_constant ** (f.k / alpha)


def lepage_sup(f: Integrand, alpha: float, stream: LePageStream,
               policy: TruncationPolicy = TruncationPolicy()):
    """One truncated-series draw of the order-k integral on the given stream.

    Returns (value, TruncationReport).  Bounded integrands use the adaptive
    remainder-bound rule; unbounded ones are sampled at a fixed prefix with
    converged=False.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    env = _effective_envelope(f, alpha, stream.space)
    if env is None or policy.mode == "fixed":
        n = policy.n_init
        view = stream.view(n)
        value = eval_truncated(f, alpha, view)
        bound = None
        converged = False
        if env is not None:
            g = np.concatenate([view.gammas[:1], [view.next_gamma]])
            bound = truncation_bound(env, alpha, f.k, g)
            converged = bound <= policy.rel_tol * value if value > 0 else bound == 0.0
        return value, TruncationReport(n, bound, converged)

    n = max(policy.n_init, f.k)
    while True:
        view = stream.view(n)
        value = eval_truncated(f, alpha, view)
        g = np.concatenate([view.gammas[:1], [view.next_gamma]])
        bound = truncation_bound(env, alpha, f.k, g)
        ok = bound <= policy.rel_tol * value if value > 0 else bound == 0.0
        if ok:
            return value, TruncationReport(n, bound, True)
        if n >= policy.n_max:
            return value, TruncationReport(n, bound, False)
        n = min(2 * n, policy.n_max)
