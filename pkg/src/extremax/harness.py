"""Replicated experiment execution and the statistical tests the suite needs.

Replicates are generated in fixed blocks of 4096 whose generators derive from
the master seed alone, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

BLOCK = 4096


class HarnessError(RuntimeError):
    pass


def split_seed(master: int, index: int) -> int:
    """Collision-resistant 63-bit seed for one replicate."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def block_rng(master: int, block_idx: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(2000, int(block_idx)))
    return np.random.default_rng(ss)


@dataclass
class SampleBatch:
    values: np.ndarray  # (replicates, coords)
    master_seed: int
    metadata: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    @property
    def r(self) -> int:
        return self.values.shape[0]

    def column(self, i=0) -> np.ndarray:
        return self.values[:, i]

    def seed_of(self, index: int) -> int:
        return split_seed(self.master_seed, index)

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"v{i}" for i in range(self.values.shape[1])])
            wr.writerows(self.values.tolist())
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(
                {"master_seed": self.master_seed, "metadata": self.metadata,
                 "failures": self.failures},
                fh, indent=2, sort_keys=True,
            )


def _run_block(args):
    op, master, b, count = args
    rng = block_rng(master, b)
    try:
        vals = np.atleast_2d(np.asarray(op.sample_block(rng, count), dtype=float))
        if vals.shape[0] != count:
            vals = vals.reshape(count, -1)
        return b, vals, None
    except Exception as exc:  # recorded, batch flagged partial
        return b, None, repr(exc)


def run_replicates(op, r: int, master_seed: int, workers: int = 1,
                   metadata: Optional[dict] = None) -> SampleBatch:
    """r independent draws of op, deterministic in (master_seed) alone.

    ``op`` implements sample_block(rng, count) -> array (count, d).  Blocks
    are fixed-size, so the result does not depend on the worker count.
    """
    if r < 1:
        raise HarnessError("need at least one replicate")
    blocks = [(op, master_seed, b, min(BLOCK, r - b * BLOCK))
              for b in range((r + BLOCK - 1) // BLOCK)]
    results = {}
    failures = []
    if workers <= 1 or len(blocks) == 1:
        done = map(_run_block, blocks)
    else:
        ctx = get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            done = pool.map(_run_block, blocks)
    for b, vals, err in done:
        if err is not None:
            failures.append({"block": b, "error": err})
        else:
            results[b] = vals
    if not results:
        raise HarnessError(f"all blocks failed: {failures}")
    width = next(iter(results.values())).shape[1]
    rows = []
    for b, (_, _, _, count) in enumerate(blocks):
        rows.append(results.get(b, np.full((count, width), np.nan)))
    values = np.vstack(rows)
    md = {"op": type(op).__name__, **(metadata or {})}
    return SampleBatch(values=values, master_seed=int(master_seed),
                       metadata=md, failures=failures)


class CallableOp:
    """Wraps f(rng, count) -> (count, d) as a replicate op."""

    def __init__(self, fn: Callable, name: str = "op"):
        self._fn = fn
        self.name = name

    def sample_block(self, rng, count):
        return self._fn(rng, count)


# -- tests ------------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    p_value: Optional[float]
    passed: bool
    details: dict = field(default_factory=dict)


def ks_test(sample_a, b, level: float = 1e-3, name: str = "ks") -> TestResult:
    """One-sample (b is a CDF callable) or two-sample (b is an array) KS test
    with asymptotic p-values."""
    a = np.asarray(sample_a, dtype=float)
    if a.size < 100:
        raise HarnessError("need at least 100 samples for the KS test")
    if callable(b):
        if np.ptp(a) == 0:
            return TestResult(name, 0.0, None, False,
                              {"note": "degenerate sample vs continuous CDF"})
        stat, p = sps.kstest(a, b)
    else:
        bb = np.asarray(b, dtype=float)
        if bb.size < 100:
            raise HarnessError("need at least 100 samples for the KS test")
        if np.ptp(a) == 0 and np.ptp(bb) == 0:
            equal = a[0] == bb[0]
            return TestResult(name, 0.0 if equal else 1.0, None, equal,
                              {"note": "degenerate-sample exact comparison"})
        stat, p = sps.ks_2samp(a, bb, method="asymp")
    return TestResult(name, float(stat), float(p), bool(p > level),
                      {"level": level, "n": int(a.size)})


def dominance_test(lower, upper, level: float = 1e-3, name: str = "dominance") -> TestResult:
    """Stochastic-order check lower <=st upper via a two-sided DKW band.

    The statistic is the largest positive gap F_upper - F_lower over the
    pooled sample grid; it passes when inside the summed DKW envelopes.
    """
    lo = np.sort(np.asarray(lower, dtype=float))
    up = np.sort(np.asarray(upper, dtype=float))
    grid = np.unique(np.concatenate([lo, up]))
    f_lo = np.searchsorted(lo, grid, side="right") / lo.size
    f_up = np.searchsorted(up, grid, side="right") / up.size
    gap = float(np.max(f_up - f_lo))
    eps = math.sqrt(math.log(4.0 / level) / (2 * lo.size)) + math.sqrt(
        math.log(4.0 / level) / (2 * up.size)
    )
    return TestResult(name, gap, None, bool(gap <= eps),
                      {"band": eps, "n_lower": int(lo.size), "n_upper": int(up.size)})


def trend_test(trace, target: str = "zero", tol: float = 0.05,
               final_window: float = 0.4, constant: Optional[float] = None,
               name: str = "trend") -> TestResult:
    """Spearman-sign trend toward a declared target.

    target="zero": the trace must be non-increasing in rank correlation and
    end small (final-window mean <= tol * trace maximum, or absolutely below
    tol when the trace starts at zero).
    target="constant": the final-window values must sit within relative tol
    of the supplied constant (or of their own mean when none is given).
    """
    trace = list(trace)
    if len(trace) < 5:
        raise HarnessError("need at least 5 trace points")
    t = np.array([p[0] for p in trace], dtype=float)
    y = np.array([p[1] for p in trace], dtype=float)
    m = max(2, int(np.ceil(final_window * len(y))))
    tail = y[-m:]
    if target == "zero":
        if np.allclose(y, 0.0):
            return TestResult(name, 0.0, None, True, {"note": "identically zero"})
        rho = sps.spearmanr(t, y).statistic
        scale = float(np.max(np.abs(y)))
        ok = (rho <= -0.5 or np.allclose(y, y[0])) and float(
            np.mean(np.abs(tail))
        ) <= tol * scale
        return TestResult(name, float(rho), None, bool(ok),
                          {"final_mean": float(np.mean(tail)), "scale": scale})
    if target == "constant":
        c = float(np.mean(tail)) if constant is None else float(constant)
        if c == 0.0:
            err = float(np.max(np.abs(tail)))
        else:
            err = float(np.max(np.abs(tail - c)) / abs(c))
        return TestResult(name, err, None, bool(err <= tol),
                          {"constant": c, "final_window": m})
    raise HarnessError(f"unknown trend target {target!r}")


def _ks_prob(lam: float) -> float:
    if lam <= 0:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        total += 2 * (-1) ** (j - 1) * math.exp(-2 * j * j * lam * lam)
    return max(0.0, min(1.0, total))


def ks2d_test(a, b, level: float = 1e-3, name: str = "ks2d",
              max_n: int = 4096) -> TestResult:
    """Two-sample two-dimensional KS test (quadrant statistic with the
    Fasano-Franceschini p-value approximation)."""
    rng = np.random.default_rng(0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] > max_n:
        a = a[rng.choice(a.shape[0], size=max_n, replace=False)]
    if b.shape[0] > max_n:
        b = b[rng.choice(b.shape[0], size=max_n, replace=False)]

    def max_quadrant_gap(centers, xa, ya, xb, yb):
        d = 0.0
        for cx, cy in centers:
            for sx in (True, False):
                for sy in (True, False):
                    qa = np.mean(((xa > cx) == sx) & ((ya > cy) == sy))
                    qb = np.mean(((xb > cx) == sx) & ((yb > cy) == sy))
                    d = max(d, abs(qa - qb))
        return d

    xa, ya = a[:, 0], a[:, 1]
    xb, yb = b[:, 0], b[:, 1]
    d1 = max_quadrant_gap(a, xa, ya, xb, yb)
    d2 = max_quadrant_gap(b, xa, ya, xb, yb)
    d = 0.5 * (d1 + d2)
    n1, n2 = a.shape[0], b.shape[0]
    n_eff = n1 * n2 / (n1 + n2)
    r1 = abs(np.corrcoef(xa, ya)[0, 1])
    r2 = abs(np.corrcoef(xb, yb)[0, 1])
    rr = math.sqrt(1 - 0.5 * (r1 * r1 + r2 * r2))
    lam = math.sqrt(n_eff) * d / (1 + rr * (0.25 - 0.75 / math.sqrt(n_eff)))
    p = _ks_prob(lam)
    return TestResult(name, float(d), float(p), bool(p > level),
                      {"level": level, "n1": int(n1), "n2": int(n2)})
