"""Adaptive quadrature, monotone bisection, and grid helpers.

Everything here is pure and deterministic. The quadrature is an adaptive
Simpson scheme with a Richardson error estimate; hard iteration caps keep
parameter sweeps predictable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadBracketError, NoSolutionError, ToleranceNotMetError

MAX_BISECT_ITER = 60
MAX_QUAD_PANELS = 1 << 16


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int

    def __float__(self) -> float:
        return self.value


def integrate_adaptive(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    rel_tol: float | None = None,
    horizon: float | None = None,
    tail_correction: float = 0.0,
) -> QuadratureResult:
    """Integrate f over [a, b] by adaptive Simpson bisection.

    An infinite upper limit requires a caller-provided truncation `horizon`;
    `tail_correction` is added to the result to account for the discarded
    tail (closed-form corrections where the caller has one).

    The error estimate is the usual |S_fine - S_coarse| / 15 Richardson
    term accumulated over accepted panels. Raises ToleranceNotMetError once
    the panel budget is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if math.isinf(b):
        if horizon is None:
            raise ValueError("infinite upper limit requires a horizon")
        b = horizon
    if b <= a:
        return QuadratureResult(0.0 + tail_correction, 0.0, 0)
    if rel_tol is None:
        rel_tol = tol

    evals = 0

    def simpson(x0, f0, x2, f2):
        x1 = 0.5 * (x0 + x2)
        f1 = f(x1)
        return x1, f1, (x2 - x0) * (f0 + 4.0 * f1 + f2) / 6.0

    fa = f(a)
    fb = f(b)
    evals += 2
    m, fm, s_whole = simpson(a, fa, b, fb)
    evals += 1

    # Stack of (x0, f0, x1, f1, whole-panel Simpson value, local tol)
    total = 0.0
    err_total = 0.0
    panels = 0
    stack = [(a, fa, b, fb, m, fm, s_whole, tol)]
    while stack:
        x0, f0, x2, f2, x1, f1, s, loc_tol = stack.pop()
        panels += 1
        if panels > MAX_QUAD_PANELS:
            raise ToleranceNotMetError(
                f"quadrature needed more than {MAX_QUAD_PANELS} panels"
            )
        lm, flm, s_left = simpson(x0, f0, x1, f1)
        rm, frm, s_right = simpson(x1, f1, x2, f2)
        evals += 2
        s2 = s_left + s_right
        err = abs(s2 - s) / 15.0
        # Accept when the local error meets either the shared absolute
        # budget or the relative budget against the running total.
        scale = max(abs(total + s2), abs(s2))
        if err <= max(loc_tol, rel_tol * scale) or (x2 - x0) < 1e-15 * max(1.0, abs(x2)):
            total += s2 + (s2 - s) / 15.0
            err_total += err
        else:
            half = 0.5 * loc_tol
            stack.append((x0, f0, x1, f1, lm, flm, s_left, half))
            stack.append((x1, f1, x2, f2, rm, frm, s_right, half))
    return QuadratureResult(total + tail_correction, err_total, evals)


def integrate_to_inf(
    f: Callable[[float], float],
    a: float,
    tol: float = 1e-10,
    rel_tol: float = 1e-10,
    start_span: float = 1.0,
    max_doublings: int = 200,
) -> QuadratureResult:
    """Integrate f over [a, inf) by geometric segment extension.

    Sums adaptive integrals over [a, a+s], [a+s, a+3s], ... with doubling
    spans until a segment contributes less than the tolerance relative to
    the running total. The integrand must decay eventually.
    """
    total = 0.0
    err = 0.0
    evals = 0
    lo = a
    span = max(start_span, abs(a) * 0.5, 1e-6)
    for _ in range(max_doublings):
        hi = lo + span
        r = integrate_adaptive(f, lo, hi, tol=tol, rel_tol=rel_tol)
        total += r.value
        err += r.error_estimate
        evals += r.evaluations
        if abs(r.value) <= max(tol, rel_tol * abs(total)):
            return QuadratureResult(total, err, evals)
        lo = hi
        span *= 2.0
    raise ToleranceNotMetError("integrand did not decay within the doubling budget")


def bisect_monotone(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: float = 1e-12,
) -> float:
    """Solve f(x) = target for nonincreasing f on [lo, hi] by bisection.

    Requires f(lo) >= target >= f(hi). The returned point is resolved to a
    bracket of width <= tol * max(1, hi - lo) within at most 60 iterations.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo < target - 1e-15 or fhi > target + 1e-15:
        raise BadBracketError(
            f"target {target} not bracketed by f({lo})={flo}, f({hi})={fhi}"
        )
    width_tol = tol * max(1.0, hi - lo)
    for _ in range(MAX_BISECT_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo <= width_tol:
            break
        if f(mid) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_increasing(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    tol: float = 1e-12,
) -> float:
    """Bisection for a nondecreasing f; companion to bisect_monotone."""
    return bisect_monotone(lambda x: -f(x), -target, lo, hi, tol=tol)


def golden_section_min(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = 1e-8,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Golden-section search for a local minimum of f on [lo, hi].

    Returns (argmin, min value). Assumes f is unimodal on the interval;
    on a non-unimodal interval it still converges to a local minimum.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if (b - a) <= rel_tol * max(abs(a), abs(b), 1e-300):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    if fc < fd:
        return c, fc
    return d, fd


def build_log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """n geometrically spaced points on [lo, hi] with exact endpoints."""
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    if n < 2:
        raise ValueError("need n >= 2")
    grid = np.geomspace(lo, hi, n)
    grid[0] = lo
    grid[-1] = hi
    return grid


def find_root_on_grid(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    increasing: bool,
    tol: float = 1e-12,
) -> float:
    """Root of f(x) = target on [lo, hi] given the local direction of f."""
    if increasing:
        return solve_increasing(f, target, lo, hi, tol=tol)
    return bisect_monotone(f, target, lo, hi, tol=tol)


__all__ = [
    "QuadratureResult",
    "integrate_adaptive",
    "integrate_to_inf",
    "bisect_monotone",
    "solve_increasing",
    "golden_section_min",
    "build_log_grid",
    "find_root_on_grid",
    "NoSolutionError",
]
