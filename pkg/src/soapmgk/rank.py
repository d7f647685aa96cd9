"""Rank functions for age-based scheduling policies and their age cutoffs.

A rank function maps a job's age to its priority (lower is served first).
The four distribution-tuned policies are built from the time-per-completion
function eta(a, b):

    serpt(a)    = eta(a, inf)            expected remaining size
    gittins(a)  = min over b of eta(a, b)
    m-serpt     = running max of serpt
    m-gittins   = running max of gittins

plus the distribution-free fb (rank = age) and fcfs (constant rank).

Rank functions are materialized once per (policy, distribution) as a
piecewise-linear knot table so that simulation gets O(1) evaluation and
crossing queries. Monotone rank functions additionally carry an exact
hill/valley segment structure: on strictly increasing stretches the age
cutoffs are y = x = z, and on each flat stretch they are the stretch's
endpoints. All analytic formulas consume that structure, so the cutoffs,
the metrics, and the simulated policy are consistent by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .distributions import SizeDistribution
from .errors import (
    DegenerateIntervalError,
    NotApplicableError,
    UnsupportedPointError,
)
from .numerics import golden_section_min, solve_increasing

POLICIES = ("fcfs", "fb", "serpt", "m-serpt", "gittins", "m-gittins", "srpt")
MONOTONE_POLICIES = ("fcfs", "fb", "m-serpt", "m-gittins")

GITTINS_CANDIDATES = 512
GITTINS_REL_TOL = 1e-8
RANK_GRID_POINTS = 4096


@dataclass(frozen=True)
class AgeCutoffs:
    """New-job cutoff y, old-job cutoff z (possibly +inf), queried size x."""

    y: float
    z: float
    x: float


def eta(dist: SizeDistribution, a: float, b: float) -> float:
    """Expected service per unit completion probability over ages (a, b].

    The b -> a limit is the reciprocal hazard rate; the b -> inf limit is
    the expected remaining size.
    """
    if a < 0 or b < a:
        raise ValueError("need 0 <= a <= b")
    if b == a:
        return 1.0 / dist.hazard(a)
    if math.isinf(b):
        return float(dist.mean_residual(a))
    num = dist.tail_integral(a, b)
    den = float(dist.tail(a)) - float(dist.tail(b))
    if den <= 0.0:
        raise DegenerateIntervalError(
            f"zero completion probability on ({a}, {b}]"
        )
    return num / den


def serpt_rank(dist: SizeDistribution, a) -> float:
    """Expected remaining size at age a."""
    return dist.mean_residual(a)


def _eta_over_candidates(dist: SizeDistribution, a: float, bs: np.ndarray) -> np.ndarray:
    tail_a = float(dist.tail(a))
    upper_a = float(dist.upper_tail_integral(a))
    tails = np.asarray(dist.tail(bs), dtype=float)
    uppers = np.asarray(dist.upper_tail_integral(bs), dtype=float)
    den = tail_a - tails
    num = upper_a - uppers
    ok = den > 0.0
    return np.where(ok, num / np.where(ok, den, 1.0), np.inf)


def gittins_rank(dist: SizeDistribution, a: float) -> float:
    """Minimized time per completion over all stopping ages b >= a.

    Uses the family closed form when one exists; otherwise minimizes over a
    log-spaced candidate grid plus the b -> a and b -> inf limits, with
    golden-section refinement around the grid minimum.
    """
    closed = dist.gittins_closed(a)
    if closed is not None:
        return float(closed)
    sup = dist.support_sup
    hi = sup if math.isfinite(sup) else dist.x_trunc
    best = float(dist.mean_residual(a))  # b -> inf candidate
    try:
        best = min(best, 1.0 / dist.hazard(a))  # b -> a candidate
    except UnsupportedPointError:
        pass
    if a >= hi:
        return best
    lo = a * (1.0 + 1e-6) if a > 0 else hi * 1e-9
    lo = min(lo, hi)
    if lo >= hi:
        return best
    bs = np.geomspace(lo, hi, GITTINS_CANDIDATES)
    bs[-1] = hi
    vals = _eta_over_candidates(dist, a, bs)
    i = int(np.argmin(vals))
    if math.isfinite(vals[i]) and vals[i] < best:
        best = float(vals[i])
        blo = bs[i - 1] if i > 0 else lo
        bhi = bs[i + 1] if i + 1 < len(bs) else hi

        def f(b):
            v = _eta_over_candidates(dist, a, np.array([b]))[0]
            return v if math.isfinite(v) else 1e300

        _, refined = golden_section_min(f, blo, bhi, rel_tol=GITTINS_REL_TOL)
        best = min(best, float(refined))
    return best


class RankFunction:
    """Piecewise-linear rank function with optional hill/valley structure.

    `ages`/`ranks` are the knot table used for evaluation and crossing
    queries. For monotone functions, `segments` lists (a0, a1, flat) pieces
    in ascending order; the final piece extends to +inf, either flat (rank
    frozen, so the old-job cutoff is the support supremum) or rising (the
    last slope extrapolates).
    """

    __slots__ = (
        "policy",
        "dist",
        "ages",
        "ranks",
        "monotone",
        "terminal_flat",
        "support_sup",
        "segments",
        "_slope_end",
    )

    def __init__(self, policy, dist, ages, ranks, monotone, terminal_flat, segments):
        self.policy = policy
        self.dist = dist
        self.ages = np.asarray(ages, dtype=float)
        self.ranks = np.asarray(ranks, dtype=float)
        self.monotone = bool(monotone)
        self.terminal_flat = bool(terminal_flat)
        self.support_sup = dist.support_sup if dist is not None else math.inf
        self.segments = segments
        if terminal_flat or len(self.ages) < 2:
            self._slope_end = 0.0
        else:
            da = self.ages[-1] - self.ages[-2]
            self._slope_end = (self.ranks[-1] - self.ranks[-2]) / da if da > 0 else 0.0

    def __call__(self, age):
        age_arr = np.asarray(age, dtype=float)
        out = np.interp(age_arr, self.ages, self.ranks)
        if not self.terminal_flat:
            over = age_arr > self.ages[-1]
            if np.any(over):
                extra = self.ranks[-1] + (age_arr - self.ages[-1]) * self._slope_end
                out = np.where(over, extra, out)
        return float(out) if out.ndim == 0 else out

    # -- cutoffs -------------------------------------------------------------

    def cutoffs(self, x: float) -> AgeCutoffs:
        """New-job and old-job age cutoffs of size x (monotone ranks only).

        y is the supremum of ages ranked strictly below rank(x); z is the
        supremum of ages ranked weakly below, capped at the support
        supremum when that sublevel set is unbounded. Both come straight
        from the hill/valley structure: y = x = z on a strictly increasing
        stretch, endpoints of the flat stretch otherwise.
        """
        if not self.monotone:
            raise NotApplicableError("age cutoffs require a monotone rank function")
        xq = min(x, self.support_sup)
        hill_hit = None
        for a0, a1, flat in self.segments:
            if a0 <= xq <= a1:
                if flat:
                    return AgeCutoffs(y=a0, z=a1, x=x)
                hill_hit = (a0, a1)
        if hill_hit is not None:
            return AgeCutoffs(y=xq, z=xq, x=x)
        # query beyond the final segment: rank is frozen there
        a0, a1, flat = self.segments[-1]
        if flat:
            return AgeCutoffs(y=a0, z=a1, x=x)
        return AgeCutoffs(y=xq, z=xq, x=x)

    # -- crossing queries ------------------------------------------------------

    def crossing_age(self, from_age: float, target: float, strict: bool) -> float | None:
        """First age >= from_age where the rank exceeds (or reaches) target.

        With strict=True the rank must strictly exceed the target, so a
        flat stretch pinned at exactly the target is skipped to its end.
        Returns None when the rank never gets there.
        """
        ages, ranks = self.ages, self.ranks
        n = len(ages)
        cur = float(self(from_age))
        if (cur > target) or (not strict and cur >= target):
            return from_age
        j = int(np.searchsorted(ages, from_age, side="right")) - 1
        j = max(j, 0)
        a0, r0 = from_age, cur
        while j + 1 < n:
            a1, r1 = ages[j + 1], ranks[j + 1]
            if a1 > a0:
                if (r1 > target) or (not strict and r1 >= target):
                    if r1 == r0:
                        return a0
                    t = a0 + (target - r0) / (r1 - r0) * (a1 - a0)
                    return min(max(t, a0), a1)
                a0, r0 = a1, r1
            j += 1
        if self.terminal_flat or self._slope_end <= 0:
            return None
        if r0 >= target and not strict:
            return a0
        return a0 + max(target - r0, 0.0) / self._slope_end

    # -- structure ---------------------------------------------------------------

    def metric_segments(self):
        """Hill/valley pieces covering [0, support_sup) for the analytics."""
        if not self.monotone:
            raise NotApplicableError("metric segments require a monotone rank")
        return self.segments


def _segments_from_knots(ages, ranks, terminal_flat, support_sup):
    """Alternating hill/valley list from an exactly nondecreasing knot table."""
    segs = []
    n = len(ages)
    for i in range(n - 1):
        flat = ranks[i + 1] == ranks[i]
        a0, a1 = float(ages[i]), float(ages[i + 1])
        if a1 <= a0:
            continue
        if segs and segs[-1][2] == flat:
            segs[-1] = (segs[-1][0], a1, flat)
        else:
            segs.append((a0, a1, flat))
    end = support_sup
    if terminal_flat:
        if segs and segs[-1][2]:
            segs[-1] = (segs[-1][0], end, True)
        else:
            segs.append((float(ages[-1]), end, True))
    else:
        if segs and not segs[-1][2]:
            segs[-1] = (segs[-1][0], end, False)
        else:
            segs.append((float(ages[-1]), end, False))
    return [s for s in segs if s[1] > s[0]]


def _age_grid(dist: SizeDistribution, n: int) -> np.ndarray:
    hi = dist.x_trunc
    lo = hi * 1e-7
    pts = [np.array([0.0]), np.geomspace(lo, hi, n - 1)]
    extra = []
    for attr in ("xm",):
        v = getattr(dist, attr, None)
        if v is not None and 0 < v < hi:
            extra.append(v)
    sup = dist.support_sup
    if math.isfinite(sup):
        # cluster knots near a finite support edge; ranks can move fast there
        edge = sup - (sup - (extra[0] if extra else lo)) * np.geomspace(1e-9, 1e-2, 24)
        extra.extend(t for t in edge if 0 < t < hi)
    if extra:
        pts.append(np.asarray(extra))
    grid = np.unique(np.concatenate(pts))
    return grid[grid <= hi]


def _materialize(policy, dist, base_fn, ages, monotone_shape):
    vals = np.asarray(base_fn(ages), dtype=float)
    if monotone_shape == "constant":
        v0 = float(base_fn(np.array([0.0]))[0])
        ages2 = np.array([0.0, ages[-1]])
        vals2 = np.array([v0, v0])
        segs = [(0.0, dist.support_sup, True)]
        return RankFunction(policy, dist, ages2, vals2, True, True, segs)
    if monotone_shape == "increasing":
        vals = np.maximum.accumulate(vals)  # guard float wobble only
        segs = [(0.0, dist.support_sup, False)]
        return RankFunction(policy, dist, ages, vals, True, False, segs)
    return RankFunction(policy, dist, ages, vals, False, False, None)


def _vectorized(fn):
    def call(arr):
        return np.array([fn(float(a)) for a in np.atleast_1d(arr)])

    return call


def _build_base(policy: str, dist: SizeDistribution, n_grid: int) -> RankFunction:
    if policy == "fcfs":
        hi = dist.x_trunc
        return RankFunction(
            "fcfs", dist, [0.0, hi], [0.0, 0.0], True, True,
            [(0.0, dist.support_sup, True)],
        )
    if policy == "fb":
        hi = dist.x_trunc
        return RankFunction(
            "fb", dist, [0.0, hi], [0.0, hi], True, False,
            [(0.0, dist.support_sup, False)],
        )
    ages = _age_grid(dist, n_grid)
    if policy == "serpt":
        shape = dist.serpt_shape()
        fn = lambda arr: np.asarray(dist.mean_residual(arr), dtype=float)
        return _materialize("serpt", dist, fn, ages, shape)
    if policy == "gittins":
        shape = dist.gittins_shape()
        closed = dist.gittins_closed(ages[-1])
        if closed is not None:
            fn = lambda arr: np.array([float(dist.gittins_closed(a)) for a in np.atleast_1d(arr)])
        else:
            fn = _vectorized(lambda a: gittins_rank(dist, a))
        return _materialize("gittins", dist, fn, ages, shape)
    raise ValueError(f"unknown base policy {policy!r}")


def monotone_envelope(base: RankFunction) -> RankFunction:
    """Running maximum of a rank function, as a monotone rank function.

    Flats are located on the knot table and then their endpoints are
    refined against the base function itself (peak by golden section,
    re-crossing by bisection), so the cutoff geometry is resolved well
    below the knot spacing.
    """
    if base.monotone:
        return base
    return _envelope_from(
        base.policy if base.policy.startswith("m-") else "m-" + base.policy,
        base.dist,
        base.ages,
        base.ranks,
        base,
    )


def _envelope_from(policy, dist, ages, vals, true_fn) -> RankFunction:
    env = np.maximum.accumulate(vals)
    n = len(ages)
    new_ages = [float(ages[0])]
    new_vals = [float(env[0])]
    in_flat = False
    flat_val = float(env[0])
    i = 1
    while i < n:
        if not in_flat:
            if env[i] > new_vals[-1]:
                new_ages.append(float(ages[i]))
                new_vals.append(float(env[i]))
                i += 1
                continue
            # flat begins: refine the peak around the previous knot
            lo = new_ages[-2] if len(new_ages) >= 2 else 0.0
            hi = float(ages[i])
            a_star, neg = golden_section_min(
                lambda t: -float(true_fn(t)), lo, hi, rel_tol=1e-10
            )
            r_star = -neg
            if r_star > new_vals[-1] and (
                len(new_ages) < 2 or a_star > new_ages[-2]
            ):
                new_ages[-1] = float(a_star)
                new_vals[-1] = float(r_star)
            flat_val = new_vals[-1]
            in_flat = True
            i += 1
        else:
            if vals[i] > flat_val:
                # base re-crosses the flat level inside (ages[i-1], ages[i]]
                lo, hi = float(ages[i - 1]), float(ages[i])
                try:
                    t_star = solve_increasing(
                        lambda t: float(true_fn(t)), flat_val, lo, hi, tol=1e-12
                    )
                except Exception:
                    t_star = lo
                if t_star > new_ages[-1]:
                    new_ages.append(float(t_star))
                    new_vals.append(flat_val)
                if float(ages[i]) > new_ages[-1] and float(vals[i]) > new_vals[-1]:
                    new_ages.append(float(ages[i]))
                    new_vals.append(float(vals[i]))
                in_flat = False
            i += 1
    terminal_flat = in_flat
    if terminal_flat and new_ages[-1] < float(ages[-1]):
        new_ages.append(float(ages[-1]))
        new_vals.append(flat_val)
    segs = _segments_from_knots(
        np.asarray(new_ages), np.asarray(new_vals), terminal_flat, dist.support_sup
    )
    return RankFunction(
        policy, dist, new_ages, new_vals, True, terminal_flat, segs
    )


@lru_cache(maxsize=64)
def build_rank_function(
    policy: str, dist: SizeDistribution, n_grid: int = RANK_GRID_POINTS
) -> RankFunction:
    """Materialize the rank function for a policy on this distribution."""
    policy = policy.lower()
    if policy == "srpt":
        raise NotApplicableError(
            "srpt ranks jobs by remaining size, not age; it lives in the simulator"
        )
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if policy in ("fcfs", "fb", "serpt", "gittins"):
        return _build_base(policy, dist, n_grid)
    base = _build_base(policy[2:], dist, n_grid)
    if base.monotone:
        # already monotone: reuse knots under the envelope policy's name
        return RankFunction(
            policy, dist, base.ages, base.ranks, True, base.terminal_flat,
            base.segments,
        )
    if policy == "m-serpt":
        true_fn = lambda a: float(dist.mean_residual(a))
    else:
        closed = dist.gittins_closed(0.0)
        if closed is not None:
            true_fn = lambda a: float(dist.gittins_closed(a))
        else:
            true_fn = lambda a: gittins_rank(dist, a)
    return _envelope_from(policy, dist, base.ages, base.ranks, true_fn)


def age_cutoffs(rank_fn: RankFunction, x: float) -> AgeCutoffs:
    return rank_fn.cutoffs(x)


def peak_age(dist: SizeDistribution) -> float:
    """Grid argmax of the expected remaining size, smallest age on ties.

    Only meaningful when the distribution declares that the maximum exists
    (ENBUE or bounded support).
    """
    if not (dist.declares("ENBUE") or dist.declares("Bounded")):
        raise NotApplicableError("peak age requires a declared ENBUE/Bounded class")
    ages = _age_grid(dist, RANK_GRID_POINTS)
    vals = np.asarray(dist.mean_residual(ages), dtype=float)
    best = int(np.argmax(vals))
    first = int(np.argmax(vals >= vals[best]))  # smallest qualifying age
    return float(ages[first])


@dataclass(frozen=True)
class CutoffGrowthReport:
    """Finite-window consistency check of the declared growth class."""

    case: str | None  # "OR", "QDHR/QIMRL", or None when not applicable
    sizes: tuple
    values: tuple  # z/x for OR; (z/x^gamma, y^gamma/x) pairs otherwise
    band_min: float
    band_max: float
    sentinel_sizes: tuple  # sizes whose z is the +inf sentinel


def cutoff_growth_diagnostic(rank_fn: RankFunction, sizes) -> CutoffGrowthReport:
    """Report cutoff growth ratios against the declared distribution class.

    A violated band is a reportable outcome, not an error; sizes whose
    old-job cutoff is unbounded are reported separately as sentinels.
    """
    dist = rank_fn.dist
    gamma = dist.declared_gamma()
    if dist.declares_or(1.0, math.inf):
        case = "OR"
    elif gamma is not None:
        case = "QDHR/QIMRL"
    else:
        case = None
    rows = []
    sentinels = []
    for x in sizes:
        c = rank_fn.cutoffs(float(x))
        if math.isinf(c.z):
            sentinels.append(float(x))
            continue
        if case == "OR":
            rows.append((float(x), c.z / x))
        elif case == "QDHR/QIMRL":
            rows.append((float(x), c.z / x**gamma, c.y**gamma / x))
        else:
            rows.append((float(x), c.z / x))
    flat_vals = [v for row in rows for v in row[1:]]
    band_min = min(flat_vals) if flat_vals else math.inf
    band_max = max(flat_vals) if flat_vals else math.inf
    return CutoffGrowthReport(
        case=case,
        sizes=tuple(r[0] for r in rows),
        values=tuple(r[1:] if len(r) > 2 else r[1] for r in rows),
        band_min=band_min,
        band_max=band_max,
        sentinel_sizes=tuple(sentinels),
    )


__all__ = [
    "POLICIES",
    "MONOTONE_POLICIES",
    "AgeCutoffs",
    "RankFunction",
    "eta",
    "serpt_rank",
    "gittins_rank",
    "build_rank_function",
    "monotone_envelope",
    "age_cutoffs",
    "peak_age",
    "CutoffGrowthReport",
    "cutoff_growth_diagnostic",
]
