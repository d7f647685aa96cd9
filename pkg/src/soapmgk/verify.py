"""Cross-module invariant matrix behind the `verify` CLI subcommand.

Each check is cheap (analytic or property-based, no long simulations) and
returns (name, passed, detail). The fault-injection hook flips the sign of
one term in the waiting-time identity check; it exists purely as a negative
control so a broken identity is seen to actually fail.
"""

from __future__ import annotations

import math

import numpy as np

from . import mg1
from .distributions import SizeDistribution
from .errors import UnsupportedPointError
from .rank import MONOTONE_POLICIES, build_rank_function, gittins_rank, serpt_rank


def _rel(a: float, b: float) -> float:
    if math.isinf(a) and math.isinf(b):
        return 0.0
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def run_verification(dists, policies, rhos, inject_fault: bool = False):
    results = []
    for dist in dists:
        results.extend(_dist_checks(dist))
        for policy in policies:
            if policy not in MONOTONE_POLICIES:
                continue
            rf = build_rank_function(policy, dist)
            results.extend(_rank_checks(dist, policy, rf))
            for rho in rhos:
                lam = mg1.lam_for_rho(dist, rho)
                results.extend(
                    _identity_checks(dist, policy, rf, lam, rho, inject_fault)
                )
    return results


def _dist_checks(dist: SizeDistribution):
    name = dist.spec_string()
    out = []
    grid = np.geomspace(dist.x_trunc * 1e-6, dist.x_trunc, 1000)
    tails = np.asarray(dist.tail(grid), dtype=float)
    ok = bool(np.all(np.diff(tails) <= 1e-12))
    out.append((f"{name}: tail nonincreasing on 1000-pt grid", ok, ""))
    worst = 0.0
    for a in np.geomspace(dist.x_trunc * 1e-3, dist.x_trunc, 7):
        m1 = dist.truncated_moments(float(a)).m1
        direct = dist.tail_integral(0.0, float(a))
        worst = max(worst, _rel(m1, direct))
    out.append(
        (f"{name}: truncated mean equals integral of tail", worst <= 1e-9, f"rel {worst:.1e}")
    )
    worst = 0.0
    for q in (0.9, 0.5, 0.1, 0.01, 1e-4):
        try:
            x = dist.excess_tail_inverse(q)
        except Exception:
            continue
        worst = max(worst, _rel(dist.excess_tail(x), q))
    out.append(
        (f"{name}: excess tail inverse roundtrip", worst <= 1e-9, f"rel {worst:.1e}")
    )
    return out


def _rank_checks(dist: SizeDistribution, policy: str, rf):
    name = f"{dist.spec_string()}/{policy}"
    out = []
    ages = np.geomspace(dist.x_trunc * 1e-4, dist.x_trunc * 0.5, 24)
    if policy in ("m-serpt", "m-gittins"):
        worst = -math.inf
        for a in ages:
            try:
                g = gittins_rank(dist, float(a))
            except UnsupportedPointError:
                continue
            s = float(serpt_rank(dist, float(a)))
            worst = max(worst, g - s)
        out.append(
            (f"{name}: gittins <= serpt pointwise", worst <= 1e-9, f"max gap {worst:.1e}")
        )
    sandwich_ok = True
    for x in np.geomspace(dist.x_trunc * 1e-3, min(dist.support_sup, dist.x_trunc) * 0.99, 24):
        c = rf.cutoffs(float(x))
        if not (c.y <= x + 1e-9 and x <= c.z + 1e-9):
            sandwich_ok = False
    out.append((f"{name}: y <= x <= z", sandwich_ok, ""))
    return out


def _identity_checks(dist, policy, rf, lam, rho, inject_fault):
    name = f"{dist.spec_string()}/{policy}/rho={rho}"
    met = mg1.mg1_metrics(rf, dist, lam)
    kq = mg1.key_quantities(rf, dist, lam)
    q_sum = kq.Qa + kq.Qb
    if inject_fault:
        q_sum = kq.Qa - kq.Qb
    out = []
    out.append(
        (
            f"{name}: waiting identity Qa+Qb = Q",
            _rel(q_sum, met.Q) <= 1e-6,
            f"rel {_rel(q_sum, met.Q):.1e}",
        )
    )
    out.append(
        (
            f"{name}: residence identity Rb+Rc = R",
            _rel(kq.R, met.R) <= 1e-6,
            f"rel {_rel(kq.R, met.R):.1e}",
        )
    )
    if math.isfinite(met.S) or math.isfinite(kq.S):
        out.append(
            (
                f"{name}: inflated identity Sb+Sc = S",
                _rel(kq.S, met.S) <= 1e-6,
                f"rel {_rel(kq.S, met.S):.1e}",
            )
        )
    const_rank = len(rf.segments) == 1 and rf.segments[0][2]
    if const_rank:
        pk = lam * dist.second_moment / (2.0 * (1.0 - rho))
        out.append(
            (
                f"{name}: constant rank reproduces the P-K waiting time",
                _rel(met.Q, pk) <= 1e-8,
                f"rel {_rel(met.Q, pk):.1e}",
            )
        )
    return out


__all__ = ["run_verification"]
