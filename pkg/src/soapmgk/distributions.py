"""Parametric job-size distributions and the functionals built on them.

Each family exposes closed forms for the tail F̄, the partial integrals
∫F̄ and ∫tF̄, the quantile, and (where defined) the hazard rate. Everything
downstream -- expected-remaining-size ranks, truncated moments, excess
tails, load profiles -- reduces to these primitives, which keeps the
numerics cancellation-free.

Distribution-class memberships (heavy-tail exponents, QDHR/QIMRL, ENBUE,
boundedness, Gumbel domain) are declared metadata: families ship sensible
defaults, callers may override, and diagnostics elsewhere can refute but
never infer them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import special

from .errors import NoSolutionError, UnsupportedPointError
from .numerics import bisect_monotone

TAIL_TRUNC_EPS = 1e-12

# Declared-class tags. OR carries its exponent window, QDHR/QIMRL their
# exponent gamma; the rest are plain flags.
OR_CLASS = "OR"
QDHR = "QDHR"
QIMRL = "QIMRL"
ENBUE = "ENBUE"
BOUNDED = "Bounded"
MDA_GUMBEL = "MDA-Gumbel"


@dataclass(frozen=True)
class TruncatedMoments:
    """E[min(X,a)] and E[min(X,a)^2] at a fixed truncation age."""

    m1: float
    m2: float


def _as_float_array(x):
    return np.asarray(x, dtype=float)


class SizeDistribution:
    """Base class; subclasses implement the closed-form primitives.

    Instances are immutable and hashable, so rank functions and load
    profiles can be cached per distribution.
    """

    classes: frozenset

    # -- family primitives -------------------------------------------------

    def tail(self, x):
        """F̄(x), vectorized; 0 beyond the support, 1 at x <= 0."""
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def tail_integral(self, a, b) -> float:
        """∫_a^b F̄(t) dt with b possibly +inf."""
        raise NotImplementedError

    def t_tail_integral(self, a, b) -> float:
        """∫_a^b t F̄(t) dt with b possibly +inf (may be +inf)."""
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    @property
    def support_sup(self) -> float:
        return math.inf

    @property
    def mean(self) -> float:
        return self.tail_integral(0.0, math.inf)

    @property
    def second_moment(self) -> float:
        return 2.0 * self.t_tail_integral(0.0, math.inf)

    @property
    def x_trunc(self) -> float:
        """Numeric horizon where F̄ drops below 1e-12 (support sup if bounded)."""
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError

    # -- derived functionals ------------------------------------------------

    def hazard(self, a: float) -> float:
        """Hazard rate f(a)/F̄(a); only defined on the support interior."""
        t = float(self.tail(a))
        if a >= self.support_sup or t <= 0.0:
            raise UnsupportedPointError(f"hazard undefined at age {a}")
        d = float(self.pdf(a))
        if d <= 0.0:
            raise UnsupportedPointError(f"no density at age {a}")
        return d / t

    def upper_tail_integral(self, x):
        """∫_x^inf F̄(t) dt, vectorized; subclasses override with closed forms."""
        x_arr = _as_float_array(x)
        scalar = x_arr.ndim == 0
        x_arr = np.atleast_1d(x_arr)
        out = np.array([self.tail_integral(float(xi), math.inf) for xi in x_arr])
        return float(out[0]) if scalar else out

    def mean_residual(self, a):
        """E[X - a | X > a]; subclasses override when a stabler form exists."""
        a_arr = _as_float_array(a)
        scalar = a_arr.ndim == 0
        a_arr = np.atleast_1d(a_arr)
        tails = np.atleast_1d(np.asarray(self.tail(a_arr), dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper_tail_integral(a_arr), dtype=float))
        out = np.where(tails > 0.0, upper / np.where(tails > 0.0, tails, 1.0), 0.0)
        return float(out[0]) if scalar else out

    def truncated_moments(self, a: float) -> TruncatedMoments:
        if a == math.inf:
            return TruncatedMoments(self.mean, self.second_moment)
        return TruncatedMoments(
            self.tail_integral(0.0, a), 2.0 * self.t_tail_integral(0.0, a)
        )

    def excess_tail(self, x: float) -> float:
        """Tail of the equilibrium (excess) distribution."""
        if x <= 0:
            return 1.0
        return self.tail_integral(x, math.inf) / self.mean

    def excess_tail_inverse(self, q: float, tol: float = 1e-12) -> float:
        """The unique x with excess_tail(x) = q, for q in (0, 1]."""
        if not (0.0 < q <= 1.0):
            raise ValueError("q must be in (0, 1]")
        if q == 1.0:
            return 0.0
        hi = min(self.support_sup, self.x_trunc * 8.0)
        if math.isfinite(self.support_sup):
            hi = self.support_sup
        else:
            while self.excess_tail(hi) > q:
                hi *= 2.0
                if hi > 1e300:
                    raise NoSolutionError("excess tail does not reach q numerically")
            if self.excess_tail(hi) > q:
                raise NoSolutionError(
                    f"excess tail stays above {q} out to the numeric horizon"
                )
        return bisect_monotone(self.excess_tail, q, 0.0, hi, tol=tol)

    # -- class-membership metadata -------------------------------------------

    def declares(self, tag: str) -> bool:
        return any(c[0] == tag for c in self.classes)

    def declares_or(self, lo: float, hi: float) -> bool:
        """True if a declared OR(a, b) window implies membership in OR(lo, hi)."""
        for c in self.classes:
            if c[0] == OR_CLASS and c[1] >= lo and c[2] <= hi:
                return True
        return False

    def declared_gamma(self) -> float | None:
        gammas = [c[1] for c in self.classes if c[0] in (QDHR, QIMRL)]
        return max(gammas) if gammas else None

    # -- rank-structure hints -------------------------------------------------

    def serpt_shape(self) -> str:
        """One of constant/increasing/decreasing/general for E[X-a|X>a]."""
        return "general"

    def gittins_shape(self) -> str:
        return "general"

    def gittins_closed(self, a):
        """Closed-form Gittins rank where the family admits one, else None."""
        return None


def _normalize_classes(classes) -> frozenset:
    out = set()
    for c in classes:
        if isinstance(c, str):
            out.add((c,))
        else:
            out.add(tuple(c))
    return frozenset(out)


@dataclass(frozen=True)
class Exponential(SizeDistribution):
    rate: float
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        default = {(ENBUE,), (MDA_GUMBEL,)}
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    def tail(self, x):
        x = _as_float_array(x)
        return np.where(x <= 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = _as_float_array(x)
        return np.where(x < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))

    def tail_integral(self, a, b):
        r = self.rate
        a = max(a, 0.0)
        eb = 0.0 if math.isinf(b) else math.exp(-r * max(b, 0.0))
        return (math.exp(-r * a) - eb) / r

    def upper_tail_integral(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        return np.exp(-self.rate * x) / self.rate

    def t_tail_integral(self, a, b):
        r = self.rate
        a = max(a, 0.0)

        def g(t):
            return (1.0 + r * t) * math.exp(-r * t)

        gb = 0.0 if math.isinf(b) else g(b)
        return (g(a) - gb) / (r * r)

    def quantile(self, u):
        return -np.log1p(-_as_float_array(u)) / self.rate

    def hazard(self, a: float) -> float:
        if a < 0:
            raise UnsupportedPointError("age below support")
        return self.rate

    def mean_residual(self, a):
        a = _as_float_array(a)
        out = np.full_like(a, 1.0 / self.rate)
        return float(out) if out.ndim == 0 else out

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def second_moment(self):
        return 2.0 / self.rate**2

    @property
    def x_trunc(self):
        return -math.log(TAIL_TRUNC_EPS) / self.rate

    def serpt_shape(self):
        return "constant"

    def gittins_shape(self):
        return "constant"

    def gittins_closed(self, a):
        return 1.0 / self.rate

    def spec_string(self):
        return f"exp(rate={_fmt(self.rate)})"


@dataclass(frozen=True)
class Uniform(SizeDistribution):
    lo: float
    hi: float
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")
        default = {(BOUNDED,), (ENBUE,)}
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    @property
    def _w(self):
        return self.hi - self.lo

    def tail(self, x):
        x = _as_float_array(x)
        return np.clip((self.hi - x) / self._w, 0.0, 1.0)

    def pdf(self, x):
        x = _as_float_array(x)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, 1.0 / self._w, 0.0)

    def _G(self, t):
        # primitive of the tail from 0
        lo, hi, w = self.lo, self.hi, self._w
        if t <= lo:
            return t
        t = min(t, hi)
        return lo + (hi * (t - lo) - 0.5 * (t * t - lo * lo)) / w

    def _Ht(self, t):
        lo, hi, w = self.lo, self.hi, self._w
        if t <= lo:
            return 0.5 * t * t
        t = min(t, hi)
        return 0.5 * lo * lo + (
            0.5 * hi * (t * t - lo * lo) - (t**3 - lo**3) / 3.0
        ) / w

    def tail_integral(self, a, b):
        b = min(b, self.hi)
        if b <= a:
            return 0.0
        return self._G(b) - self._G(max(a, 0.0))

    def t_tail_integral(self, a, b):
        b = min(b, self.hi)
        if b <= a:
            return 0.0
        return self._Ht(b) - self._Ht(max(a, 0.0))

    def upper_tail_integral(self, x):
        x = np.clip(_as_float_array(x), 0.0, self.hi)
        mid = 0.5 * (self.hi - x) ** 2 / self._w
        below = 0.5 * (self.lo + self.hi) - x
        return np.where(x < self.lo, below, mid)

    def quantile(self, u):
        return self.lo + _as_float_array(u) * self._w

    def hazard(self, a: float) -> float:
        if not (self.lo <= a < self.hi):
            raise UnsupportedPointError(f"hazard undefined at age {a}")
        return 1.0 / (self.hi - a)

    def mean_residual(self, a):
        a = _as_float_array(a)
        below = 0.5 * (self.lo + self.hi) - a
        inside = 0.5 * (self.hi - a)
        out = np.where(a < self.lo, below, np.maximum(inside, 0.0))
        return float(out) if out.ndim == 0 else out

    @property
    def support_sup(self):
        return self.hi

    @property
    def x_trunc(self):
        return self.hi

    def serpt_shape(self):
        return "decreasing"

    def gittins_shape(self):
        return "decreasing" if self.lo == 0.0 else "general"

    def spec_string(self):
        return f"uniform(lo={_fmt(self.lo)},hi={_fmt(self.hi)})"


@dataclass(frozen=True)
class Pareto(SizeDistribution):
    xm: float
    alpha: float
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.xm <= 0:
            raise ValueError("xm must be positive")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1 (finite mean required)")
        default = {(OR_CLASS, 1.0, math.inf), (QDHR, 1.0)}
        if self.alpha < 2:
            default.add((OR_CLASS, 1.0, 2.0))
        elif self.alpha > 2:
            default.add((OR_CLASS, 2.0, math.inf))
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    def tail(self, x):
        x = _as_float_array(x)
        return np.where(x <= self.xm, 1.0, (np.maximum(x, self.xm) / self.xm) ** -self.alpha)

    def pdf(self, x):
        x = _as_float_array(x)
        inside = x >= self.xm
        xs = np.maximum(x, self.xm)
        return np.where(inside, self.alpha / self.xm * (xs / self.xm) ** (-self.alpha - 1.0), 0.0)

    def _G(self, t):
        xm, al = self.xm, self.alpha
        if t <= xm:
            return max(t, 0.0)
        if math.isinf(t):
            return xm + xm / (al - 1.0)
        return xm + xm * (1.0 - (t / xm) ** (1.0 - al)) / (al - 1.0)

    def _Ht(self, t):
        xm, al = self.xm, self.alpha
        if t <= xm:
            return 0.5 * max(t, 0.0) ** 2
        if al == 2.0:
            if math.isinf(t):
                return math.inf
            return 0.5 * xm * xm + xm * xm * math.log(t / xm)
        if math.isinf(t):
            if al < 2.0:
                return math.inf
            return 0.5 * xm * xm - xm**al * xm ** (2.0 - al) / (2.0 - al)
        return 0.5 * xm * xm + xm**al * (t ** (2.0 - al) - xm ** (2.0 - al)) / (2.0 - al)

    def tail_integral(self, a, b):
        if b <= a:
            return 0.0
        return self._G(b) - self._G(max(a, 0.0))

    def t_tail_integral(self, a, b):
        if b <= a:
            return 0.0
        hb = self._Ht(b)
        if math.isinf(hb):
            return math.inf
        return hb - self._Ht(max(a, 0.0))

    def upper_tail_integral(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        xs = np.maximum(x, self.xm)
        above = xs * (xs / self.xm) ** (-self.alpha) / (self.alpha - 1.0)
        return np.where(x >= self.xm, above, self.mean - x)

    def quantile(self, u):
        u = _as_float_array(u)
        return self.xm * (1.0 - u) ** (-1.0 / self.alpha)

    def hazard(self, a: float) -> float:
        if a < self.xm:
            raise UnsupportedPointError(f"no density below xm={self.xm}")
        return self.alpha / a

    def mean_residual(self, a):
        a = _as_float_array(a)
        above = a / (self.alpha - 1.0)
        below = self.mean - a
        out = np.where(a >= self.xm, above, below)
        return float(out) if out.ndim == 0 else out

    @property
    def mean(self):
        return self.alpha * self.xm / (self.alpha - 1.0)

    @property
    def x_trunc(self):
        return self.xm * TAIL_TRUNC_EPS ** (-1.0 / self.alpha)

    def spec_string(self):
        return f"pareto(xm={_fmt(self.xm)},alpha={_fmt(self.alpha)})"


@dataclass(frozen=True)
class BoundedPareto(SizeDistribution):
    xm: float
    alpha: float
    xmax: float
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not (0 < self.xm < self.xmax):
            raise ValueError("need 0 < xm < xmax")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        default = {(BOUNDED,), (ENBUE,)}
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    @property
    def _r(self):
        return (self.xm / self.xmax) ** self.alpha

    @property
    def _C(self):
        return 1.0 / (1.0 - self._r)

    def tail(self, x):
        x = _as_float_array(x)
        xs = np.clip(x, self.xm, self.xmax)
        val = self._C * ((self.xm / xs) ** self.alpha - self._r)
        return np.where(x <= self.xm, 1.0, np.where(x >= self.xmax, 0.0, val))

    def pdf(self, x):
        x = _as_float_array(x)
        inside = (x >= self.xm) & (x <= self.xmax)
        xs = np.clip(x, self.xm, self.xmax)
        val = self._C * self.alpha * self.xm**self.alpha * xs ** (-self.alpha - 1.0)
        return np.where(inside, val, 0.0)

    def _pint(self, t):
        # ∫_xm^t s^-alpha ds
        xm, al = self.xm, self.alpha
        if al == 1.0:
            return math.log(t / xm)
        return (t ** (1.0 - al) - xm ** (1.0 - al)) / (1.0 - al)

    def _qint(self, t):
        # ∫_xm^t s^(1-alpha) ds
        xm, al = self.xm, self.alpha
        if al == 2.0:
            return math.log(t / xm)
        return (t ** (2.0 - al) - xm ** (2.0 - al)) / (2.0 - al)

    def _G(self, t):
        if t <= self.xm:
            return max(t, 0.0)
        t = min(t, self.xmax)
        return self.xm + self._C * (
            self.xm**self.alpha * self._pint(t) - self._r * (t - self.xm)
        )

    def _Ht(self, t):
        if t <= self.xm:
            return 0.5 * max(t, 0.0) ** 2
        t = min(t, self.xmax)
        return 0.5 * self.xm**2 + self._C * (
            self.xm**self.alpha * self._qint(t) - 0.5 * self._r * (t * t - self.xm**2)
        )

    def tail_integral(self, a, b):
        b = min(b, self.xmax)
        if b <= a:
            return 0.0
        return self._G(b) - self._G(max(a, 0.0))

    def t_tail_integral(self, a, b):
        b = min(b, self.xmax)
        if b <= a:
            return 0.0
        return self._Ht(b) - self._Ht(max(a, 0.0))

    def upper_tail_integral(self, x):
        x = np.clip(_as_float_array(x), 0.0, self.xmax)
        xm, al = self.xm, self.alpha
        xs = np.clip(x, xm, self.xmax)
        if al == 1.0:
            pint = np.log(xs / xm)
        else:
            pint = (xs ** (1.0 - al) - xm ** (1.0 - al)) / (1.0 - al)
        g_in = xm + self._C * (xm**al * pint - self._r * (xs - xm))
        g = np.where(x <= xm, x, g_in)
        return np.maximum(self.mean - g, 0.0)

    def quantile(self, u):
        u = _as_float_array(u)
        return self.xm * (1.0 - u * (1.0 - self._r)) ** (-1.0 / self.alpha)

    def hazard(self, a: float) -> float:
        if not (self.xm <= a < self.xmax):
            raise UnsupportedPointError(f"hazard undefined at age {a}")
        t = float(self.tail(a))
        return float(self.pdf(a)) / t

    @property
    def support_sup(self):
        return self.xmax

    @property
    def x_trunc(self):
        return self.xmax

    def spec_string(self):
        return (
            f"boundedpareto(xm={_fmt(self.xm)},alpha={_fmt(self.alpha)},"
            f"xmax={_fmt(self.xmax)})"
        )


@dataclass(frozen=True)
class Hyperexponential(SizeDistribution):
    probs: tuple
    rates: tuple
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        rates = tuple(float(r) for r in self.rates)
        if len(probs) != len(rates) or not probs:
            raise ValueError("probs and rates must be equal-length and nonempty")
        if abs(sum(probs) - 1.0) > 1e-12 or any(p <= 0 for p in probs):
            raise ValueError("branch probabilities must be positive and sum to 1")
        if any(r <= 0 for r in rates):
            raise ValueError("branch rates must be positive")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "rates", rates)
        default = {(QDHR, 1.0), (QIMRL, 1.0), (MDA_GUMBEL,)}
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    def tail(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        out = sum(p * np.exp(-r * x) for p, r in zip(self.probs, self.rates))
        return out

    def pdf(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        return sum(p * r * np.exp(-r * x) for p, r in zip(self.probs, self.rates))

    def tail_integral(self, a, b):
        a = max(a, 0.0)
        total = 0.0
        for p, r in zip(self.probs, self.rates):
            eb = 0.0 if math.isinf(b) else math.exp(-r * b)
            total += p * (math.exp(-r * a) - eb) / r
        return total

    def t_tail_integral(self, a, b):
        a = max(a, 0.0)
        total = 0.0
        for p, r in zip(self.probs, self.rates):
            ga = (1.0 + r * a) * math.exp(-r * a)
            gb = 0.0 if math.isinf(b) else (1.0 + r * b) * math.exp(-r * b)
            total += p * (ga - gb) / (r * r)
        return total

    def upper_tail_integral(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        return sum(p / r * np.exp(-r * x) for p, r in zip(self.probs, self.rates))

    def quantile(self, u):
        u = _as_float_array(u)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        out = np.empty_like(u)
        for i, ui in enumerate(u):
            out[i] = bisect_monotone(
                lambda x: float(self.tail(x)), 1.0 - float(ui), 0.0, self.x_trunc * 4
            )
        return float(out[0]) if scalar else out

    def hazard(self, a: float) -> float:
        if a < 0:
            raise UnsupportedPointError("age below support")
        num = sum(p * r * math.exp(-r * a) for p, r in zip(self.probs, self.rates))
        den = sum(p * math.exp(-r * a) for p, r in zip(self.probs, self.rates))
        return num / den

    def mean_residual(self, a):
        a = np.maximum(_as_float_array(a), 0.0)
        num = sum(p / r * np.exp(-r * a) for p, r in zip(self.probs, self.rates))
        den = sum(p * np.exp(-r * a) for p, r in zip(self.probs, self.rates))
        out = num / den
        return float(out) if out.ndim == 0 else out

    @property
    def mean(self):
        return sum(p / r for p, r in zip(self.probs, self.rates))

    @property
    def second_moment(self):
        return sum(2.0 * p / r**2 for p, r in zip(self.probs, self.rates))

    @property
    def x_trunc(self):
        n = len(self.probs)
        return max(
            (math.log(n * p) - math.log(TAIL_TRUNC_EPS)) / r
            for p, r in zip(self.probs, self.rates)
        )

    def _degenerate(self):
        return len(set(self.rates)) == 1

    def serpt_shape(self):
        return "constant" if self._degenerate() else "increasing"

    def gittins_shape(self):
        return "constant" if self._degenerate() else "increasing"

    def gittins_closed(self, a):
        # Strict DHR: time per completion is minimized in the immediate
        # limit, so the rank is the reciprocal hazard.
        return 1.0 / self.hazard(max(float(a), 0.0))

    def spec_string(self):
        p = ":".join(_fmt(v) for v in self.probs)
        m = ":".join(_fmt(v) for v in self.rates)
        return f"hyperexp(p={p},mu={m})"


@dataclass(frozen=True)
class Weibull(SizeDistribution):
    shape: float
    scale: float
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("shape and scale must be positive")
        default = {(MDA_GUMBEL,)}
        if self.shape <= 1.0:
            default.add((QDHR, 1.0))
        if self.shape >= 1.0:
            default.add((ENBUE,))
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    def tail(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        return np.exp(-((x / self.scale) ** self.shape))

    def pdf(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        k, lam = self.shape, self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            val = k / lam * (x / lam) ** (k - 1.0) * np.exp(-((x / lam) ** k))
        return np.where(x > 0, val, 0.0 if k > 1 else val)

    def _gamma_piece(self, moment: float, a: float, b: float) -> float:
        # ∫_a^b t^(moment-1) F̄(t) dt via regularized upper incomplete gamma
        k, lam = self.shape, self.scale
        s = moment / k
        coef = lam**moment / k * special.gamma(s)
        qa = special.gammaincc(s, (a / lam) ** k)
        qb = 0.0 if math.isinf(b) else special.gammaincc(s, (b / lam) ** k)
        return float(coef * (qa - qb))

    def tail_integral(self, a, b):
        a = max(a, 0.0)
        if b <= a:
            return 0.0
        return self._gamma_piece(1.0, a, b)

    def t_tail_integral(self, a, b):
        a = max(a, 0.0)
        if b <= a:
            return 0.0
        return self._gamma_piece(2.0, a, b)

    def upper_tail_integral(self, x):
        x = np.maximum(_as_float_array(x), 0.0)
        k, lam = self.shape, self.scale
        s = 1.0 / k
        coef = lam / k * special.gamma(s)
        return coef * special.gammaincc(s, (x / lam) ** k)

    def quantile(self, u):
        u = _as_float_array(u)
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    def hazard(self, a: float) -> float:
        if a <= 0:
            raise UnsupportedPointError("hazard defined on the interior only")
        k, lam = self.shape, self.scale
        return k / lam * (a / lam) ** (k - 1.0)

    @property
    def x_trunc(self):
        return self.scale * (-math.log(TAIL_TRUNC_EPS)) ** (1.0 / self.shape)

    def serpt_shape(self):
        if self.shape == 1.0:
            return "constant"
        return "increasing" if self.shape < 1.0 else "decreasing"

    def gittins_shape(self):
        return self.serpt_shape()

    def gittins_closed(self, a):
        if self.shape < 1.0 and a > 0:
            return 1.0 / self.hazard(float(a))
        if self.shape == 1.0:
            return self.scale
        return None

    def spec_string(self):
        return f"weibull(shape={_fmt(self.shape)},scale={_fmt(self.scale)})"


@dataclass(frozen=True)
class PointMassMixture(SizeDistribution):
    atoms: tuple
    weights: tuple
    classes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        weights = tuple(float(w) for w in self.weights)
        if len(atoms) != len(weights) or not atoms:
            raise ValueError("atoms and weights must be equal-length and nonempty")
        if any(a <= 0 for a in atoms):
            raise ValueError("atoms must be positive")
        if abs(sum(weights) - 1.0) > 1e-12 or any(w <= 0 for w in weights):
            raise ValueError("weights must be positive and sum to 1")
        order = np.argsort(atoms)
        object.__setattr__(self, "atoms", tuple(atoms[i] for i in order))
        object.__setattr__(self, "weights", tuple(weights[i] for i in order))
        default = {(BOUNDED,), (ENBUE,)}
        object.__setattr__(
            self,
            "classes",
            _normalize_classes(self.classes) if self.classes else frozenset(default),
        )

    def tail(self, x):
        x = _as_float_array(x)
        out = np.zeros_like(x, dtype=float)
        for a, w in zip(self.atoms, self.weights):
            out = out + np.where(x < a, w, 0.0)
        return out

    def pdf(self, x):
        raise UnsupportedPointError("point-mass mixture has no density")

    def hazard(self, a: float) -> float:
        raise UnsupportedPointError("hazard undefined for atomic distributions")

    def tail_integral(self, a, b):
        a = max(a, 0.0)
        b = min(b, self.support_sup)
        if b <= a:
            return 0.0
        total = 0.0
        for atom, w in zip(self.atoms, self.weights):
            seg = min(b, atom) - a
            if seg > 0:
                total += w * seg
        return total

    def t_tail_integral(self, a, b):
        a = max(a, 0.0)
        b = min(b, self.support_sup)
        if b <= a:
            return 0.0
        total = 0.0
        for atom, w in zip(self.atoms, self.weights):
            hi = min(b, atom)
            if hi > a:
                total += w * 0.5 * (hi * hi - a * a)
        return total

    def quantile(self, u):
        u = _as_float_array(u)
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(cum, u, side="left")
        idx = np.minimum(idx, len(self.atoms) - 1)
        out = np.asarray(self.atoms, dtype=float)[idx]
        return float(out) if out.ndim == 0 else out

    @property
    def support_sup(self):
        return self.atoms[-1]

    @property
    def x_trunc(self):
        return self.atoms[-1]

    def spec_string(self):
        a = ":".join(_fmt(v) for v in self.atoms)
        w = ":".join(_fmt(v) for v in self.weights)
        return f"pointmass(atoms={a},weights={w})"


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


# -- spec-level operations ----------------------------------------------------


def tail(dist: SizeDistribution, x):
    return dist.tail(x)


def hazard(dist: SizeDistribution, a: float) -> float:
    return dist.hazard(a)


def truncated_moments(dist: SizeDistribution, a: float) -> TruncatedMoments:
    return dist.truncated_moments(a)


def excess_tail(dist: SizeDistribution, x: float) -> float:
    return dist.excess_tail(x)


def excess_tail_inverse(dist: SizeDistribution, q: float) -> float:
    return dist.excess_tail_inverse(q)


def sample(dist: SizeDistribution, rng: np.random.Generator) -> float:
    """One draw by inverse transform (branch-select for mixtures)."""
    if isinstance(dist, Hyperexponential):
        u_branch = rng.random()
        u_val = rng.random()
        cum = 0.0
        for p, r in zip(dist.probs, dist.rates):
            cum += p
            if u_branch < cum:
                return -math.log1p(-u_val) / r
        return -math.log1p(-u_val) / dist.rates[-1]
    return float(dist.quantile(rng.random()))


def sample_batch(dist: SizeDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """Vectorized sampler with the same stream discipline as `sample`."""
    if isinstance(dist, Hyperexponential):
        u = rng.random((n, 2))
        cum = np.cumsum(dist.probs)
        idx = np.searchsorted(cum, u[:, 0], side="right")
        idx = np.minimum(idx, len(dist.rates) - 1)
        rates = np.asarray(dist.rates)[idx]
        return -np.log1p(-u[:, 1]) / rates
    u = rng.random(n)
    return np.asarray(dist.quantile(u), dtype=float)


__all__ = [
    "SizeDistribution",
    "TruncatedMoments",
    "Exponential",
    "Uniform",
    "Pareto",
    "BoundedPareto",
    "Hyperexponential",
    "Weibull",
    "PointMassMixture",
    "tail",
    "hazard",
    "truncated_moments",
    "excess_tail",
    "excess_tail_inverse",
    "sample",
    "sample_batch",
    "OR_CLASS",
    "QDHR",
    "QIMRL",
    "ENBUE",
    "BOUNDED",
    "MDA_GUMBEL",
]
