"""Adaptive quadrature over the scale measure dS(z) = S'(z) dz.

Three entry points cover every integral the law modules need:

* ``integrate_dS`` -- finite-interval adaptive Gauss-Kronrod (G7/K15) with
  forced breakpoints at kinks; returns value + error estimate + bookkeeping.
* ``integrate_dS_tail`` -- semi-infinite upper limit via geometrically grown
  segments.  A divergent integral is a *meaningful outcome* (it encodes a
  zero escape probability), reported through ``QuadResult.diverged`` rather
  than an exception.
* ``integrate_weighted_survival`` -- the coupled pair
  ``V = int_a^b w(y) exp(-H(y)) dy,  H(y) = int_a^y m(z) dz``
  with the inner integral accumulated as running state along the same
  adaptive grid (no O(n^2) re-integration).

Integrands are plain functions of the level z; callers fuse the S'(z)
factor themselves when they need log-space stability, or use the ``_dS``
wrappers which multiply by ``model.scale_deriv``.  All integrand callables
must accept numpy arrays (Kronrod nodes are passed as a batch); the
weighted-survival routine calls them on scalars.

Gauss-Kronrod nodes are strictly interior, so integrands are never
evaluated exactly at segment endpoints.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError

__all__ = [
    "QuadSpec",
    "QuadResult",
    "TailPolicy",
    "integrate_adaptive",
    "integrate_adaptive_tail",
    "integrate_dS",
    "integrate_dS_tail",
    "exp_neg_integral",
    "integrate_weighted_survival",
    "WeightedSurvivalResult",
]

# G7/K15 rule on [-1, 1]; the 7 Gauss nodes are the odd-indexed Kronrod nodes.
_KRONROD_NODES = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813,
])
_KRONROD_WEIGHTS = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529,
])
_GAUSS_WEIGHTS = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])
_GAUSS_IDX = np.arange(1, 15, 2)


@dataclass(frozen=True)
class TailPolicy:
    """How to treat an upper limit of +infinity.

    ``adaptive``: extend segments geometrically (factor ``growth``) until a
    segment contributes less than ``abs_tol``.  ``fixed``: truncate at
    ``truncation`` and integrate the finite interval.
    """

    kind: str = "adaptive"          # "adaptive" | "fixed"
    growth: float = 2.0
    truncation: Optional[float] = None
    max_segments: int = 400

    def __post_init__(self):
        if self.kind not in ("adaptive", "fixed"):
            raise DomainError(f"tail policy kind must be adaptive|fixed, got {self.kind!r}")
        if self.kind == "adaptive" and self.growth <= 1.0:
            raise DomainError("tail growth factor must exceed 1")
        if self.kind == "fixed" and self.truncation is None:
            raise DomainError("fixed tail policy requires a truncation point")


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 2000
    tail: TailPolicy = field(default_factory=TailPolicy)

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


DEFAULT_SPEC = QuadSpec()


@dataclass(frozen=True)
class QuadResult:
    value: float
    err_estimate: float
    segments_used: int
    truncation_point: float   # +inf when a divergent tail was detected
    diverged: bool = False


def _kronrod_segment(g, a: float, b: float):
    """One G7/K15 panel; returns (integral, error, resabs)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    z = mid + half * _KRONROD_NODES
    fz = np.asarray(g(z), dtype=float)
    if fz.shape != z.shape:
        fz = np.broadcast_to(fz, z.shape)
    if not np.all(np.isfinite(fz)):
        raise NumericalError(f"integrand returned non-finite values on [{a}, {b}]")
    resk = float(_KRONROD_WEIGHTS @ fz)
    resg = float(_GAUSS_WEIGHTS @ fz[_GAUSS_IDX])
    resabs = float(_KRONROD_WEIGHTS @ np.abs(fz))
    reskh = 0.5 * resk
    resasc = float(_KRONROD_WEIGHTS @ np.abs(fz - reskh))
    diff = abs(resk - resg)
    if resasc > 0.0 and diff > 0.0:
        err = resasc * min(1.0, (200.0 * diff / resasc) ** 1.5)
    else:
        err = diff
    err = max(err, 50.0 * np.finfo(float).eps * resabs)
    return half * resk, abs(half) * err, abs(half) * resabs


def _merge_breakpoints(a: float, b: float, breakpoints: Sequence[float]) -> list[float]:
    pts = [a, b]
    for p in breakpoints:
        if a < p < b:
            pts.append(float(p))
    return sorted(set(pts))


def integrate_adaptive(g, a: float, b: float, spec: QuadSpec = DEFAULT_SPEC,
                       breakpoints: Sequence[float] = ()) -> QuadResult:
    """Adaptive G7/K15 on [a, b] for a plain (Lebesgue) integrand ``g``."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate_adaptive requires finite limits; use the tail variant")
    if a > b:
        raise DomainError(f"integration limits out of order: a={a} > b={b}")
    if a == b:
        return QuadResult(0.0, 0.0, 0, b)

    pts = _merge_breakpoints(a, b, breakpoints)
    heap = []
    nseg = 0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, err, _ = _kronrod_segment(g, lo, hi)
        nseg += 1
        heapq.heappush(heap, (-err, nseg, lo, hi, val, err))

    while True:
        total = sum(item[4] for item in heap)
        total_err = sum(item[5] for item in heap)
        if total_err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
            return QuadResult(total, total_err, len(heap), b)
        if len(heap) >= spec.max_subdivisions:
            raise NumericalError(
                f"quadrature did not converge within {spec.max_subdivisions} subdivisions "
                f"(err={total_err:.3e} on [{a}, {b}])")
        _, _, lo, hi, _, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for seg in ((lo, mid), (mid, hi)):
            val, err, _ = _kronrod_segment(g, *seg)
            nseg += 1
            heapq.heappush(heap, (-err, nseg, seg[0], seg[1], val, err))


def integrate_dS(model, f, a: float, b: float, spec: QuadSpec = DEFAULT_SPEC,
                 breakpoints: Sequence[float] = ()) -> QuadResult:
    """``int_a^b f(z) S'(z) dz`` for the model's scale function."""
    sd = model.scale_deriv
    return integrate_adaptive(lambda z: np.asarray(f(z)) * sd(z), a, b, spec, breakpoints)


def _tail_segments(a: float, policy: TailPolicy):
    """Yield successive (lo, hi) pieces covering [a, inf)."""
    g = policy.growth
    lo = a
    if a > 1.0:
        while True:
            hi = lo * g
            yield lo, hi
            lo = hi
    else:
        # shifted-width scheme for starting points at or below 1
        w = 1.0
        while True:
            hi = lo + w
            yield lo, hi
            lo = hi
            w *= g
            if lo > 1.0:
                # switch to multiplicative growth once safely positive
                while True:
                    hi = lo * g
                    yield lo, hi
                    lo = hi


def _integrate_tail(g, a: float, spec: QuadSpec) -> QuadResult:
    policy = spec.tail
    if policy.kind == "fixed":
        z = policy.truncation
        if z <= a:
            return QuadResult(0.0, 0.0, 0, z)
        res = integrate_adaptive(g, a, z, spec)
        return QuadResult(res.value, res.err_estimate, res.segments_used, z)

    total = 0.0
    total_err = 0.0
    segs_used = 0
    prev_contrib = math.inf
    nondecreasing = 0
    for k, (lo, hi) in enumerate(_tail_segments(a, policy)):
        res = integrate_adaptive(g, lo, hi, spec)
        total += res.value
        total_err += res.err_estimate
        segs_used += res.segments_used
        contrib = abs(res.value)
        if contrib < spec.abs_tol:
            return QuadResult(total, total_err + contrib, segs_used, hi)
        if contrib >= prev_contrib:
            nondecreasing += 1
            # sustained growth of segment contributions on a geometric grid
            # means the integral is +infinity
            if nondecreasing >= 3 and k >= 6:
                return QuadResult(math.inf, math.inf, segs_used, math.inf, diverged=True)
        else:
            nondecreasing = 0
        prev_contrib = contrib
        if k + 1 >= policy.max_segments:
            raise NumericalError(
                f"tail integration from {a} did not settle within "
                f"{policy.max_segments} segments (last contribution {contrib:.3e})")


def integrate_adaptive_tail(g, a: float, spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    """``int_a^inf g(z) dz`` for a plain integrand, same tail policy."""
    return _integrate_tail(g, a, spec)


def integrate_dS_tail(model, f, a: float, spec: QuadSpec = DEFAULT_SPEC) -> QuadResult:
    """``int_a^inf f(z) S'(z) dz`` with the spec's tail policy.

    ``QuadResult.diverged`` is set when segment contributions keep growing;
    the value field is then +inf.
    """
    sd = model.scale_deriv
    return _integrate_tail(lambda z: np.asarray(f(z)) * sd(z), a, spec)


def exp_neg_integral(model, hazard, a: float, b: float,
                     spec: QuadSpec = DEFAULT_SPEC,
                     breakpoints: Sequence[float] = ()) -> float:
    """``exp(-int_a^b hazard dS)``; 0.0 when the integral diverges (b=inf).

    The integral is accumulated first and exponentiated once, so the result
    is exact in the empty case and never leaves [0, 1] for hazard >= 0.
    """
    if b == a:
        return 1.0
    if math.isinf(b):
        res = integrate_dS_tail(model, hazard, a, spec)
        if res.diverged:
            return 0.0
    else:
        res = integrate_dS(model, hazard, a, b, spec, breakpoints)
    return float(np.exp(-res.value))


@dataclass(frozen=True)
class WeightedSurvivalResult:
    value: float             # int w(y) exp(-H(y)) dy
    hazard_integral: float   # H at the right end of the range
    err_estimate: float
    truncation_point: float


def integrate_weighted_survival(hazard, weight, a: float, b: float,
                                spec: QuadSpec = DEFAULT_SPEC,
                                breakpoints: Sequence[float] = (),
                                tail_bound=None,
                                rtol: float = 1e-12) -> WeightedSurvivalResult:
    """Coupled integral ``int_a^b w(y) exp(-H(y)) dy`` with running
    ``H(y) = int_a^y m(z) dz``.

    ``hazard`` and ``weight`` are scalar callables already including any
    S'(z) factor.  ``b`` may be +inf; then segments grow per the spec's tail
    policy and extension stops when either ``tail_bound(y, H)`` (an upper
    bound for the whole remaining integral, when the caller knows one) or
    the last segment contribution drops below ``abs_tol``.
    """
    if a >= b:
        return WeightedSurvivalResult(0.0, 0.0, 0.0, a)

    def rhs(t, y):
        return (hazard(t), weight(t) * math.exp(-y[0]))

    # never evaluate exactly at the kink point a
    start = a + 4.0 * np.finfo(float).eps * max(1.0, abs(a))

    def run_piece(lo, hi, H0, V0):
        sol = solve_ivp(rhs, (lo, hi), (H0, V0), method="DOP853",
                        rtol=rtol, atol=0.01 * spec.abs_tol, dense_output=False)
        if not sol.success:
            raise NumericalError(f"weighted-survival integration failed on [{lo}, {hi}]: {sol.message}")
        Hn, Vn = sol.y[0, -1], sol.y[1, -1]
        return float(Hn), float(Vn)

    H, V = 0.0, 0.0
    if math.isfinite(b):
        pts = _merge_breakpoints(start, b, breakpoints)
        for lo, hi in zip(pts[:-1], pts[1:]):
            H, V = run_piece(lo, hi, H, V)
        err = rtol * abs(V) + spec.abs_tol
        return WeightedSurvivalResult(V, H, err, b)

    # semi-infinite: honor interior breakpoints first, then geometric tail
    pts = sorted(p for p in breakpoints if p > start)
    lo = start
    for p in pts:
        H, V = run_piece(lo, p, H, V)
        lo = p
    policy = spec.tail
    if policy.kind == "fixed":
        H, V = run_piece(lo, policy.truncation, H, V)
        return WeightedSurvivalResult(V, H, rtol * abs(V) + spec.abs_tol, policy.truncation)
    prev_contrib = math.inf
    for k, (slo, shi) in enumerate(_tail_segments(lo, policy)):
        V_before = V
        H, V = run_piece(slo, shi, H, V)
        contrib = abs(V - V_before)
        if tail_bound is not None and tail_bound(shi, H) < spec.abs_tol:
            return WeightedSurvivalResult(V, H, rtol * abs(V) + 2 * spec.abs_tol, shi)
        if contrib < spec.abs_tol and contrib <= prev_contrib:
            return WeightedSurvivalResult(V, H, rtol * abs(V) + 2 * spec.abs_tol, shi)
        prev_contrib = contrib
        if k + 1 >= policy.max_segments:
            raise NumericalError(
                f"weighted-survival tail from {a} did not settle within {policy.max_segments} segments")
