"""The pure-jump Markov structure of the running maximum observed at the
first drawdown time, as the drawdown size varies.

Fix the start at 0.  As the drawdown size rho grows, the maximum-at-first-
drawdown M(rho) is a nondecreasing pure-jump Markov process in rho: it
holds its value while larger drawdowns are "absorbed" by the same
excursion, and jumps upward when the diffusion recovers to its old maximum
first.  This module evaluates its transition kernel, conditional and joint
laws, generator, jump measure, holding-time laws and jump-size law, plus
the induced semigroup of the maximum-drawdown-before-hitting family.

Convention: the formulas are stated for a start at 0 on a state space
unbounded below.  Models with a finite lower endpoint are admitted only by
operations whose formulas never evaluate the scale function at or below
that endpoint (each operation documents its guard); laws that integrate
from level 0 require an unbounded-below model outright.

Everything is a deterministic function of its arguments; nothing here
holds state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .laws import hazard_dS
from .models import DiffusionModel
from .quadrature import (DEFAULT_SPEC, QuadSpec, integrate_adaptive,
                         integrate_adaptive_tail, integrate_weighted_survival)

__all__ = [
    "JumpQuery", "TestFunction",
    "kernel_apply", "cond_survival", "joint_survival",
    "generator_apply", "jump_measure_density",
    "tplus_survival", "tminus_cdf", "jump_time_size_joint",
    "dminus_cond_cdf", "dminus_joint_cdf", "dminus_density",
    "holding_survival",
]


@dataclass(frozen=True)
class JumpQuery:
    """Flag record for CLI runs against this module."""

    rho: float = 1.0
    delta: float = 2.0
    y: float = 1.0
    v: float = 2.0
    z: float = 1.0
    alpha_h: float = 2.0
    beta_h: float = 1.0
    t: float = 1.0


@dataclass(frozen=True)
class TestFunction:
    """A bounded measurable function with compact support [lo, hi].

    ``breakpoints`` lists interior discontinuities/kinks so quadrature can
    split panels there.  The evaluator must accept numpy arrays and must
    vanish outside [lo, hi].
    """

    fn: Callable
    lo: float
    hi: float
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError("test function support must satisfy lo < hi")

    def __call__(self, u):
        return self.fn(u)

    @staticmethod
    def indicator(v: float, hi: float) -> "TestFunction":
        """Indicator of the open interval (v, hi)."""
        def fn(u):
            u = np.asarray(u, dtype=float)
            return ((u > v) & (u < hi)).astype(float)
        return TestFunction(fn, v, hi, breakpoints=(v, hi))


def _require_positive(**kwargs) -> None:
    for name, val in kwargs.items():
        if not val > 0:
            raise DomainError(f"{name} must be positive, got {val}")


def _guard_above_l(model: DiffusionModel, **points) -> None:
    """Every scale-function argument the formula touches must stay above
    the lower endpoint."""
    for name, val in points.items():
        if not val > model.l:
            raise DomainError(
                f"operation touches the scale function at {name}={val}, which is not "
                f"above the lower endpoint l={model.l} of model {model.model_id!r}")


def _require_unbounded_below(model: DiffusionModel, what: str) -> None:
    if model.l != -math.inf:
        raise DomainError(
            f"{what} integrates from level 0 and requires a model unbounded below; "
            f"model {model.model_id!r} has l={model.l}")


def _expect(model: DiffusionModel, delta: float, y: float, f: TestFunction,
            spec: QuadSpec):
    """E_y[f(M(theta_delta))] for compactly supported f, via the survival
    weight exp(-int_y^u hazard) accumulated along the adaptive grid.  Mass
    at +inf (transient models) contributes nothing since f vanishes there.
    """
    if f.hi <= y:
        return 0.0
    h = hazard_dS(model, delta)

    def hz(u):
        return float(h(u))

    def wt(u):
        return float(f.fn(u)) * float(h(u))

    bps = tuple(b for b in (f.lo, *f.breakpoints) if y < b < f.hi)
    res = integrate_weighted_survival(hz, wt, y, f.hi, spec=spec, breakpoints=bps)
    return res.value


def kernel_apply(model: DiffusionModel, rho: float, delta: float, y: float,
                 f: TestFunction, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Transition kernel of the jump process from drawdown size rho to
    delta >= rho, applied to f at state y:

        f(y) + (E_y[f(M(theta_delta))] - f(y)) * (S(y-rho) - S(y-delta)) / (S(y) - S(y-delta))
    """
    _require_positive(rho=rho)
    if delta < rho:
        raise DomainError(f"kernel needs delta >= rho, got delta={delta} < rho={rho}")
    _guard_above_l(model, **{"y-delta": y - delta})
    fy = float(f.fn(y))
    if delta == rho:
        return fy
    ratio = float(np.exp(model.log_scale_diff(y - rho, delta - rho)
                         - model.log_scale_diff(y, delta)))
    ef = _expect(model, delta, y, f, spec)
    return fy + (ef - fy) * ratio


def cond_survival(model: DiffusionModel, rho: float, delta: float, y: float,
                  v: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """P(M(theta_delta) > v | M(theta_rho) = y); equals 1 when y > v."""
    _require_positive(rho=rho)
    if delta <= rho:
        raise DomainError(f"conditional law needs delta > rho, got {delta} <= {rho}")
    _guard_above_l(model, **{"y-delta": y - delta})
    if y > v:
        return 1.0
    ratio = float(np.exp(model.log_scale_diff(y - rho, delta - rho)
                         - model.log_scale_diff(y, delta)))
    if v == y:
        return ratio
    res = integrate_adaptive(hazard_dS(model, delta), y, v, spec)
    return ratio * float(np.exp(-res.value))


def joint_survival(model: DiffusionModel, rho: float, delta: float, y: float,
                   v: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """P(M(theta_rho) > y, M(theta_delta) > v) from a start at 0, for
    delta >= rho and v >= y > 0."""
    _require_positive(rho=rho, y=y)
    if delta < rho:
        raise DomainError(f"joint law needs delta >= rho, got {delta} < {rho}")
    if v < y:
        raise DomainError(f"joint law needs v >= y, got v={v} < y={y}")
    _require_unbounded_below(model, "joint_survival")
    total = integrate_adaptive(hazard_dS(model, rho), 0.0, y, spec).value
    if v > y:
        total += integrate_adaptive(hazard_dS(model, delta), y, v, spec).value
    return float(np.exp(-total))


def generator_apply(model: DiffusionModel, rho: float, y: float,
                    f: TestFunction, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Generator of the jump process in the drawdown-size parameter:

        A_rho f(y) = S'(y-rho)/(S(y)-S(y-rho)) *
                     int_y^inf (f(z)-f(y)) hazard(z) exp(-int_y^z hazard dS) dS(z)

    The integrand vanishes beyond the support of f except for the -f(y)
    term, whose tail integrates in closed survival form.
    """
    _require_positive(rho=rho)
    _guard_above_l(model, **{"y-rho": y - rho})
    pref = float(np.exp(model.log_scale_deriv(y - rho) - model.log_scale_diff(y, rho)))
    fy = float(f.fn(y))
    h = hazard_dS(model, rho)

    core = 0.0
    H_hi = 0.0
    if f.hi > y:
        def hz(u):
            return float(h(u))

        def wt(u):
            return (float(f.fn(u)) - fy) * float(h(u))

        bps = tuple(b for b in (f.lo, *f.breakpoints) if y < b < f.hi)
        res = integrate_weighted_survival(hz, wt, y, f.hi, spec=spec, breakpoints=bps)
        core, H_hi = res.value, res.hazard_integral

    tail_term = 0.0
    if fy != 0.0:
        start = max(y, f.hi)
        tail = integrate_adaptive_tail(h, start, spec)
        remaining = 1.0 if tail.diverged else -float(np.expm1(-tail.value))
        tail_term = -fy * math.exp(-H_hi) * remaining
    return pref * (core + tail_term)


def jump_measure_density(model: DiffusionModel, rho: float, y: float, z: float,
                         spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Density in the jump size z > 0 of the jump measure at state y,
    drawdown size rho."""
    _require_positive(rho=rho)
    if z < 0:
        raise DomainError(f"jump size z must be nonnegative, got {z}")
    _guard_above_l(model, **{"y-rho": y - rho})
    p1 = float(np.exp(model.log_scale_deriv(y - rho) - model.log_scale_diff(y, rho)))
    p2 = float(np.exp(model.log_scale_deriv(y + z) - model.log_scale_diff(y + z, rho)))
    if z == 0.0:
        return p1 * p2
    res = integrate_adaptive(hazard_dS(model, rho), y, y + z, spec)
    return p1 * p2 * float(np.exp(-res.value))


def tplus_survival(model: DiffusionModel, rho: float, delta: float, y: float) -> float:
    """P(the jump process holds its value at y from rho through delta):
    (S(y) - S(y-rho)) / (S(y) - S(y-delta))."""
    _require_positive(rho=rho)
    if delta < rho:
        raise DomainError(f"holding law needs delta >= rho, got {delta} < {rho}")
    _guard_above_l(model, **{"y-delta": y - delta})
    return float(np.exp(model.log_scale_diff(y, rho) - model.log_scale_diff(y, delta)))


def tminus_cdf(model: DiffusionModel, rho: float, delta: float, y: float,
               spec: QuadSpec = DEFAULT_SPEC) -> float:
    """CDF of the last-jump time before rho, conditionally on state y:
    exp(-int_0^y (hazard_delta - hazard_rho) dS) for 0 < delta < rho."""
    _require_positive(rho=rho, delta=delta, y=y)
    if delta > rho:
        raise DomainError(f"last-jump law needs delta <= rho, got {delta} > {rho}")
    if delta == rho:
        return 1.0
    _require_unbounded_below(model, "tminus_cdf")
    hd = hazard_dS(model, delta)
    hr = hazard_dS(model, rho)
    res = integrate_adaptive(lambda u: hd(u) - hr(u), 0.0, y, spec)
    return float(np.exp(-res.value))


def jump_time_size_joint(model: DiffusionModel, rho: float, delta: float,
                         y: float, z: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """P(next jump happens before delta AND overshoots by more than z | state y):

        (S(y)-S(y-rho)) * int_rho^delta S'(y-u)/(S(y)-S(y-u))^2
                          * exp(-int_y^{y+z} hazard_u dS) du
    """
    _require_positive(rho=rho)
    if delta <= rho:
        raise DomainError(f"need delta > rho, got {delta} <= {rho}")
    if z < 0:
        raise DomainError(f"jump size z must be nonnegative, got {z}")
    _guard_above_l(model, **{"y-delta": y - delta})

    def outer(us):
        us = np.atleast_1d(np.asarray(us, dtype=float))
        out = np.empty_like(us)
        for i, u in enumerate(us):
            lg = float(model.log_scale_deriv(y - u) - 2.0 * model.log_scale_diff(y, u))
            if z > 0.0:
                inner = integrate_adaptive(hazard_dS(model, u), y, y + z, spec).value
            else:
                inner = 0.0
            out[i] = math.exp(lg - inner)
        return out

    res = integrate_adaptive(outer, rho, delta, spec)
    return float(np.exp(model.log_scale_diff(y, rho))) * res.value


def dminus_cond_cdf(model: DiffusionModel, alpha_h: float, beta_h: float,
                    delta: float, rho: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Semigroup of the maximum-drawdown-before-hitting family:
    P(max drawdown before hitting alpha_h <= delta | it was rho at beta_h).
    Zero when delta < rho; otherwise exp(-int_beta^alpha hazard_delta dS)."""
    _require_positive(alpha_h=alpha_h, beta_h=beta_h, delta=delta, rho=rho)
    if alpha_h <= beta_h:
        raise DomainError(f"need alpha_h > beta_h, got {alpha_h} <= {beta_h}")
    if delta < rho:
        return 0.0
    _guard_above_l(model, **{"beta_h-delta": beta_h - delta})
    res = integrate_adaptive(hazard_dS(model, delta), beta_h, alpha_h, spec)
    return float(np.exp(-res.value))


def dminus_joint_cdf(model: DiffusionModel, alpha_h: float, beta_h: float,
                     delta: float, rho: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Joint CDF of the maximum drawdowns before hitting beta_h and alpha_h:
    exp(-int_0^beta hazard_rho dS - int_beta^alpha hazard_delta dS) for
    delta >= rho."""
    _require_positive(alpha_h=alpha_h, beta_h=beta_h, delta=delta, rho=rho)
    if alpha_h <= beta_h:
        raise DomainError(f"need alpha_h > beta_h, got {alpha_h} <= {beta_h}")
    if delta < rho:
        raise DomainError(f"joint CDF needs delta >= rho, got {delta} < {rho}")
    _require_unbounded_below(model, "dminus_joint_cdf")
    total = integrate_adaptive(hazard_dS(model, rho), 0.0, beta_h, spec).value
    total += integrate_adaptive(hazard_dS(model, delta), beta_h, alpha_h, spec).value
    return float(np.exp(-total))


def dminus_density(model: DiffusionModel, alpha_h: float, delta: float,
                   spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Density (in the drawdown size delta) of the maximum drawdown before
    hitting alpha_h, from a start at 0:

        [int_0^alpha S'(z-delta) S'(z) / (S(z)-S(z-delta))^2 dz]
        * exp(-int_0^alpha hazard_delta dS)
    """
    _require_positive(alpha_h=alpha_h, delta=delta)
    _require_unbounded_below(model, "dminus_density")

    def amp(z):
        return np.exp(model.log_scale_deriv(np.asarray(z, dtype=float) - delta)
                      + model.log_scale_deriv(z)
                      - 2.0 * model.log_scale_diff(z, delta))

    a = integrate_adaptive(amp, 0.0, alpha_h, spec).value
    b = integrate_adaptive(hazard_dS(model, delta), 0.0, alpha_h, spec).value
    return float(a * np.exp(-b))


def holding_survival(model: DiffusionModel, rho: float, y: float, t: float) -> float:
    """Survival of the holding time at state y past duration t (in the
    drawdown-size clock): (S(y)-S(y-rho)) / (S(y)-S(y-t-rho)).

    Satisfies the semigroup identity phi_s(t+u) = phi_s(t) phi_{s+t}(u)
    exactly, being a ratio of scale increments.
    """
    _require_positive(rho=rho)
    if t < 0:
        raise DomainError(f"holding duration t must be nonnegative, got {t}")
    _guard_above_l(model, **{"y-rho-t": y - rho - t})
    if t == 0.0:
        return 1.0
    return float(np.exp(model.log_scale_diff(y, rho) - model.log_scale_diff(y, rho + t)))
