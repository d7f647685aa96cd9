"""Analytic M/G/1 mean response-time formulas for monotone rank policies.

Two independent evaluation routes are provided for the mean waiting time Q,
residence time R, and inflated residence time S:

* `mg1_metrics` integrates against the size distribution dF(x), using the
  age cutoffs (y_x, z_x) from the rank function's hill/valley structure.
* `key_quantities` and `mg1_metrics_alt` integrate equivalent expressions
  against plain dx. The two routes are provably equal integrals, so their
  numerical agreement is a strong end-to-end check on the cutoff geometry.

Also here: the k-server response-time bound Q + kR + (k-1)S with its
per-size form, and the heavy-traffic scale predictors. Infinities are real:
when the old-job cutoff is unbounded on a positive-probability set of
sizes, S (and the k>1 bound) are +inf, with no large-number surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .distributions import PointMassMixture, SizeDistribution
from .errors import BranchMismatchError, OverloadError
from .numerics import integrate_adaptive, integrate_to_inf
from .rank import RankFunction, build_rank_function

QUAD_TOL = 1e-8


@dataclass(frozen=True)
class Mg1Metrics:
    Q: float  # mean waiting time
    R: float  # mean residence time
    S: float  # mean inflated residence time (may be +inf)

    @property
    def T(self) -> float:
        return self.Q + self.R


@dataclass(frozen=True)
class KeyQuantities:
    Qa: float
    Qb: float
    Rb: float
    Rc: float
    Sc: float

    @property
    def Sb(self) -> float:
        return self.Rb  # identical by definition

    @property
    def Q(self) -> float:
        return self.Qa + self.Qb

    @property
    def R(self) -> float:
        return self.Rb + self.Rc

    @property
    def S(self) -> float:
        return self.Sb + self.Sc


class LoadProfile:
    """Arrival rate plus the truncated-load functionals it induces.

    coload(a) is 1 - lambda E[min(X,a)], computed in the cancellation-free
    form (1 - rho) + lambda * int_a^inf F̄, which stays accurate deep into
    heavy traffic. tau(a) is (lambda/2) E[min(X,a)^2].
    """

    def __init__(self, dist: SizeDistribution, lam: float):
        if lam <= 0:
            raise ValueError("arrival rate must be positive")
        self.dist = dist
        self.lam = lam
        self.rho = lam * dist.mean
        if self.rho >= 1.0:
            raise OverloadError(f"rho = {self.rho} >= 1")
        self.one_minus_rho = 1.0 - self.rho

    def coload(self, a: float) -> float:
        if a <= 0:
            return 1.0
        if math.isinf(a) or a >= self.dist.support_sup:
            return self.one_minus_rho
        return self.one_minus_rho + self.lam * float(self.dist.upper_tail_integral(a))

    def tau(self, a: float) -> float:
        if a <= 0:
            return 0.0
        if math.isinf(a):
            m2 = self.dist.second_moment
            return math.inf if math.isinf(m2) else 0.5 * self.lam * m2
        return self.lam * self.dist.t_tail_integral(0.0, min(a, self.dist.support_sup))


def load_profile(dist: SizeDistribution, lam: float) -> LoadProfile:
    return LoadProfile(dist, lam)


def lam_for_rho(dist: SizeDistribution, rho: float) -> float:
    """Arrival rate achieving a target load."""
    if not (0.0 < rho < 1.0):
        raise OverloadError(f"rho = {rho} outside (0, 1)")
    return rho / dist.mean


# -- integration helpers -------------------------------------------------------


def _df_integral(dist: SizeDistribution, g: Callable[[float], float], a0: float, a1: float) -> float:
    """∫_{a0}^{a1} g(x) dF(x) over one hill segment."""
    if isinstance(dist, PointMassMixture):
        total = 0.0
        for atom, w in zip(dist.atoms, dist.weights):
            if a0 < atom <= a1 or (a0 == 0.0 and atom == 0.0):
                total += w * g(atom)
        return total
    hi = min(a1, dist.support_sup)
    if math.isinf(hi):
        return integrate_to_inf(
            lambda x: g(x) * float(dist.pdf(x)),
            max(a0, 0.0),
            tol=QUAD_TOL * 1e-2,
            rel_tol=QUAD_TOL * 1e-2,
            start_span=max(dist.mean, a0 * 0.5),
        ).value
    if hi <= a0:
        return 0.0
    if not _density_bounded(dist):
        # integrate in probability space to sidestep a density singularity
        p0 = 1.0 - float(dist.tail(a0))
        p1 = 1.0 - float(dist.tail(hi))
        if p1 <= p0:
            return 0.0
        return integrate_adaptive(
            lambda p: g(float(dist.quantile(p))),
            p0,
            p1,
            tol=QUAD_TOL,
            rel_tol=QUAD_TOL,
        ).value
    return integrate_adaptive(
        lambda x: g(x) * float(dist.pdf(x)),
        a0,
        hi,
        tol=QUAD_TOL,
        rel_tol=QUAD_TOL,
    ).value


def _density_bounded(dist: SizeDistribution) -> bool:
    shape = getattr(dist, "shape", None)
    if shape is not None and shape < 1.0:
        return False
    return True


def _dx_integral(f: Callable[[float], float], a0: float, a1: float, mean_scale: float) -> float:
    if math.isinf(a1):
        return integrate_to_inf(
            f, a0, tol=QUAD_TOL * 1e-2, rel_tol=QUAD_TOL * 1e-2,
            start_span=max(mean_scale, a0 * 0.5),
        ).value
    if a1 <= a0:
        return 0.0
    return integrate_adaptive(f, a0, a1, tol=QUAD_TOL, rel_tol=QUAD_TOL).value


def _xdf_between(dist: SizeDistribution, u: float, v: float) -> float:
    """E[X 1{u < X <= v}] from the truncated first moment."""

    def piece(t: float) -> float:
        if math.isinf(t) or t >= dist.support_sup:
            return dist.mean
        return dist.tail_integral(0.0, t) - t * float(dist.tail(t))

    return piece(v) - piece(u)


def _require_monotone(rank_fn: RankFunction, dist: SizeDistribution):
    if not rank_fn.monotone:
        raise ValueError("analytic metrics require a monotone rank function")
    if rank_fn.dist is not None and rank_fn.dist != dist:
        raise ValueError("rank function was built for a different distribution")


# -- the dF route ---------------------------------------------------------------


def mg1_metrics(rank_fn: RankFunction, dist: SizeDistribution, lam: float) -> Mg1Metrics:
    """Mean waiting, residence, and inflated residence times at rate lam.

    Waiting integrates tau(z_x) / (coload(y_x) coload(z_x)) dF; residence
    integrates x / coload(y_x) dF; inflated residence replaces x by z_x and
    is +inf as soon as z_x is unbounded on positive probability.
    """
    _require_monotone(rank_fn, dist)
    prof = LoadProfile(dist, lam)
    Q = R = S = 0.0
    for a0, a1, flat in rank_fn.metric_segments():
        if flat:
            u, v = a0, a1
            pmass = float(dist.tail(u)) - (0.0 if v >= dist.support_sup else float(dist.tail(v)))
            if pmass <= 0.0:
                continue
            cy = prof.coload(u)
            cz = prof.coload(v)
            tz = prof.tau(v)
            Q += (tz / (cy * cz)) * pmass if not math.isinf(tz) else math.inf
            R += _xdf_between(dist, u, v) / cy
            if math.isinf(v):
                S = math.inf
            elif not math.isinf(S):
                S += (v / cy) * pmass
        else:

            def q_int(x):
                c = prof.coload(x)
                return prof.tau(x) / (c * c)

            def r_int(x):
                return x / prof.coload(x)

            Q += _df_integral(dist, q_int, a0, a1)
            r_piece = _df_integral(dist, r_int, a0, a1)
            R += r_piece
            if not math.isinf(S):
                S += r_piece
    return Mg1Metrics(Q=Q, R=R, S=S)


# -- the dx routes ---------------------------------------------------------------


def key_quantities(rank_fn: RankFunction, dist: SizeDistribution, lam: float) -> KeyQuantities:
    """The six key response-time integrals over dx.

    On flat stretches every piece has a closed form (the integrands are
    constant or reduce to tail integrals); strictly increasing stretches
    are integrated adaptively with y = x = z.
    """
    _require_monotone(rank_fn, dist)
    prof = LoadProfile(dist, lam)
    lam_ = prof.lam
    Qa = Qb = Rb = Rc = Sc = 0.0

    def H(t: float) -> float:
        if math.isinf(t) or t >= dist.support_sup:
            return 0.0
        return float(dist.tail(t)) / prof.coload(t)

    mean_scale = dist.mean
    for a0, a1, flat in rank_fn.metric_segments():
        if flat:
            u, v = a0, a1
            Fu = float(dist.tail(u))
            if Fu <= 0.0:
                continue
            cy = prof.coload(u)
            cv = prof.coload(v)
            Hu = H(u)
            Hv = H(v)
            tz = prof.tau(v)
            # ∫_u^v lam F̄ / coload^2 dx = 1/coload(v) - 1/coload(u), exactly
            Qa += (Hu + Hv) * tz * (1.0 / cv - 1.0 / cy) if not math.isinf(tz) else math.inf
            ti = dist.tail_integral(u, min(v, dist.support_sup))
            tti = dist.t_tail_integral(u, min(v, dist.support_sup))
            Qb += lam_ * (Hu * Hu / Fu) * tti
            zHv = 0.0 if (math.isinf(v) or v >= dist.support_sup) else v * Hv
            Rb += lam_ * zHv * (Hu / Fu) * ti
            Rc += (Hu / Fu) * ti
            if math.isinf(v):
                Sc = math.inf
            elif not math.isinf(Sc):
                Sc += Hu * (v - u)
        else:

            def qa_int(x):
                c = prof.coload(x)
                Fx = float(dist.tail(x))
                return 2.0 * prof.tau(x) * lam_ * Fx * Fx / (c * c * c)

            def qb_int(x):
                c = prof.coload(x)
                Fx = float(dist.tail(x))
                return lam_ * x * Fx * Fx / (c * c)

            def h_int(x):
                return float(dist.tail(x)) / prof.coload(x)

            Qa += _dx_integral(qa_int, a0, a1, mean_scale)
            qb_piece = _dx_integral(qb_int, a0, a1, mean_scale)
            Qb += qb_piece
            Rb += qb_piece  # z = x on hills makes the Rb integrand equal Qb's
            rc_piece = _dx_integral(h_int, a0, a1, mean_scale)
            Rc += rc_piece
            if not math.isinf(Sc):
                Sc += rc_piece
    return KeyQuantities(Qa=Qa, Qb=Qb, Rb=Rb, Rc=Rc, Sc=Sc)


def mg1_metrics_alt(rank_fn: RankFunction, dist: SizeDistribution, lam: float) -> Mg1Metrics:
    """Q, R, S from the single-integral dx formulas, cutoffs queried per x.

    Independent of `mg1_metrics`: a different integrand, a different
    measure, and pointwise cutoff queries instead of segment bookkeeping.
    """
    _require_monotone(rank_fn, dist)
    prof = LoadProfile(dist, lam)
    lam_ = prof.lam
    sup = dist.support_sup

    def pieces(x: float):
        c = rank_fn.cutoffs(x)
        Fx = float(dist.tail(x))
        Fy = float(dist.tail(c.y))
        cy = prof.coload(c.y)
        if math.isinf(c.z) or c.z >= sup:
            Fz, zFz = 0.0, 0.0
        else:
            Fz = float(dist.tail(c.z))
            zFz = c.z * Fz
        cz = prof.coload(c.z)
        cx = prof.coload(x)
        tz = prof.tau(c.z)
        q = (Fy / cy + Fz / cz) * lam_ * tz * Fx / (cx * cx) + lam_ * x * Fy * Fx / (cy * cy)
        rb = lam_ * zFz * Fx / (cy * cz)
        r = rb + Fx / cy
        s_fin = rb + Fy / cy
        return q, r, s_fin

    s_infinite = any(
        flat and math.isinf(a1) and float(dist.tail(a0)) > 0.0
        for a0, a1, flat in rank_fn.metric_segments()
    )
    tau_inf = math.isinf(prof.tau(math.inf))
    q_infinite = tau_inf and any(
        flat and a1 >= sup and float(dist.tail(a0)) > 0.0
        for a0, a1, flat in rank_fn.metric_segments()
    )

    end = sup if math.isfinite(sup) else math.inf
    mean_scale = dist.mean
    Q = math.inf if q_infinite else _dx_integral(lambda x: pieces(x)[0], 0.0, end, mean_scale)
    R = _dx_integral(lambda x: pieces(x)[1], 0.0, end, mean_scale)
    S = math.inf if s_infinite else _dx_integral(lambda x: pieces(x)[2], 0.0, end, mean_scale)
    return Mg1Metrics(Q=Q, R=R, S=S)


# -- k-server bound ---------------------------------------------------------------


@dataclass(frozen=True)
class MgkBound:
    k: int
    total: float
    per_size: Callable[[float], float]


def mgk_bound(rank_fn: RankFunction, dist: SizeDistribution, lam: float, k: int) -> MgkBound:
    """Upper bound on k-server mean response time: Q + kR + (k-1)S.

    The per-size form is (tau(z_x)/coload(z_x) + kx + (k-1) z_x) / coload(y_x).
    Both are +inf when S is +inf and k > 1; for k = 1 the bound collapses
    to the exact single-server mean response time.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _require_monotone(rank_fn, dist)
    prof = LoadProfile(dist, lam)
    m = mg1_metrics(rank_fn, dist, lam)
    if k == 1:
        total = m.Q + m.R
    else:
        total = m.Q + k * m.R + (k - 1) * m.S

    def per_size(x: float) -> float:
        c = rank_fn.cutoffs(x)
        if math.isinf(c.z) and k > 1:
            return math.inf
        tz = prof.tau(c.z)
        if math.isinf(tz):
            return math.inf
        zterm = 0.0 if k == 1 else (k - 1) * c.z
        return (tz / prof.coload(c.z) + k * x + zterm) / prof.coload(c.y)

    return MgkBound(k=k, total=total, per_size=per_size)


# -- heavy-traffic predictors ------------------------------------------------------


def heavy_traffic_scale(dist: SizeDistribution, rho: float, branch: str) -> float:
    """Theta-scale predictor of mean response time as rho -> 1.

    branch "IV" (infinite variance, declared OR(1,2) tails) predicts
    log(1/(1-rho)). branch "FV" (finite variance: OR(2,inf), Gumbel
    domain, or ENBUE) predicts 1 / ((1-rho) * mserpt(excess_inv(1-rho))).
    These are scales, not means; only ratios across rho are meaningful.
    """
    if not (0.0 < rho < 1.0):
        raise OverloadError(f"rho = {rho} outside (0, 1)")
    branch = branch.upper()
    if branch == "IV":
        if not dist.declares_or(1.0, 2.0):
            raise BranchMismatchError("IV branch requires declared OR(1,2) tails")
        return math.log(1.0 / (1.0 - rho))
    if branch == "FV":
        ok = (
            dist.declares_or(2.0, math.inf)
            or dist.declares("MDA-Gumbel")
            or dist.declares("ENBUE")
            or dist.declares("Bounded")
        )
        if not ok:
            raise BranchMismatchError(
                "FV branch requires declared OR(2,inf), MDA-Gumbel, or ENBUE"
            )
        x_q = dist.excess_tail_inverse(1.0 - rho)
        r = float(build_rank_function("m-serpt", dist)(x_q))
        return 1.0 / ((1.0 - rho) * r)
    raise ValueError(f"unknown branch {branch!r}")


__all__ = [
    "Mg1Metrics",
    "KeyQuantities",
    "LoadProfile",
    "load_profile",
    "lam_for_rho",
    "mg1_metrics",
    "key_quantities",
    "mg1_metrics_alt",
    "MgkBound",
    "mgk_bound",
    "heavy_traffic_scale",
    "QUAD_TOL",
]
