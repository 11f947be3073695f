"""Drawdown laws of a one-dimensional diffusion.

Notation used throughout: X is the diffusion, M its running maximum,
``theta_delta`` the first time the drawdown M - X exceeds delta, ``H_eta``
the first hitting time of a level eta, and ``D-`` the running maximum of
the drawdown.  Every law here reduces to scale-function integrals of the
hazard ``S'(z) / (S(z) - S(z - delta))`` plus, for joint transforms in
time, the two determinant ratios

    b_a(y; d) = [phi(y-d) psi-(y) - phi-(y) psi(y-d)] / D(y-d, y)
    c_a(y; d) = w_a / D(y-d, y),        D(a, b) = phi(a) psi(b) - phi(b) psi(a)

evaluated from the model's alpha-eigenfunctions.  All determinants are
assembled in log space (the b-numerator is a sum of two positive terms, so
log-sum-exp applies; D uses the expm1 form), which keeps the formulas
finite for arguments where the raw eigenfunctions overflow.

Integration starts at the kink point ``x v (delta + l)``: the maximum at
the first delta-drawdown can never sit below delta + l when the state
space is bounded below at l.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .models import DiffusionModel, log_pair_det
from .quadrature import (DEFAULT_SPEC, QuadSpec, integrate_adaptive,
                         integrate_adaptive_tail, integrate_weighted_survival)

__all__ = [
    "LawQuery", "CurveTable",
    "b_alpha", "c_alpha",
    "survival_max_at_drawdown", "density_max_at_drawdown",
    "lehoczky_lt", "escape_probability",
    "maxdd_cdf", "malyutin_lt", "malyutin_lt_alt",
    "general_drawdown_survival",
    "survival_curve", "density_curve", "maxdd_curve",
    "kink_point",
]


@dataclass(frozen=True)
class LawQuery:
    """One drawdown-law evaluation request (a plain record; the CLI and the
    curve tables carry it as provenance)."""

    x: float = 0.0
    delta: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    y: Optional[float] = None
    v: Optional[float] = None
    eta: Optional[float] = None
    phi: Optional[str] = None    # textual description of a drawdown-size function

    def as_dict(self) -> dict:
        out = {}
        for k in ("x", "delta", "alpha", "beta", "y", "v", "eta", "phi"):
            val = getattr(self, k)
            if val is not None:
                out[k] = val
        return out


@dataclass(frozen=True)
class CurveTable:
    """A sampled law: strictly increasing grid, values, per-point error
    estimates and provenance."""

    law_id: str
    query: dict
    grid: np.ndarray
    values: np.ndarray
    err: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        e = np.asarray(self.err, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.shape != e.shape:
            raise DomainError("curve table columns must be 1-d and equally long")
        if g.size > 1 and not np.all(np.diff(g) > 0):
            raise DomainError("curve table grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "err", e)

    def to_csv(self) -> str:
        lines = ["grid,value,err"]
        for g, v, e in zip(self.grid, self.values, self.err):
            lines.append(f"{g:.17g},{v:.17g},{e:.17g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "law_id": self.law_id,
            "query": self.query,
            "points": [[float(g), float(v), float(e)]
                       for g, v, e in zip(self.grid, self.values, self.err)],
        }, indent=None, separators=(",", ":")) + "\n"

    @staticmethod
    def from_text(text: str) -> "CurveTable":
        text = text.strip()
        if text.startswith("{"):
            obj = json.loads(text)
            pts = np.asarray(obj["points"], dtype=float).reshape(-1, 3)
            return CurveTable(obj.get("law_id", "unknown"), obj.get("query", {}),
                              pts[:, 0], pts[:, 1], pts[:, 2])
        rows = [ln for ln in text.splitlines() if ln.strip()]
        if rows and rows[0].lower().startswith("grid"):
            rows = rows[1:]
        pts = np.asarray([[float(c) for c in r.split(",")] for r in rows], dtype=float)
        if pts.shape[1] != 3:
            raise DomainError("curve CSV must have three columns: grid,value,err")
        return CurveTable("unknown", {}, pts[:, 0], pts[:, 1], pts[:, 2])

    @staticmethod
    def read(path) -> "CurveTable":
        with open(path, "r", encoding="utf-8") as fh:
            return CurveTable.from_text(fh.read())


# ---------------------------------------------------------------------------
# hazard building blocks
# ---------------------------------------------------------------------------

def kink_point(model: DiffusionModel, x: float, delta: float) -> float:
    """x v (delta + l); with l = -inf this is just x."""
    return max(x, delta + model.l)


def _check_delta(delta: float) -> None:
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")


def hazard_dS(model: DiffusionModel, delta: float) -> Callable:
    """Vectorized z -> S'(z) / (S(z) - S(z - delta)), fused in log space."""
    def h(z):
        return np.exp(model.log_scale_deriv(z) - model.log_scale_diff(z, delta))
    return h


def _log_b(model: DiffusionModel, alpha: float, y, delta: float):
    fam = model.eigen
    yd = np.asarray(y, dtype=float) - delta
    num = np.logaddexp(fam.log_phi(alpha, yd) + fam.log_psi_minus(alpha, y),
                       fam.log_neg_phi_minus(alpha, y) + fam.log_psi(alpha, yd))
    return num - log_pair_det(model, alpha, yd, np.asarray(y, dtype=float))


def _log_c(model: DiffusionModel, alpha: float, y, delta: float):
    yd = np.asarray(y, dtype=float) - delta
    return model.eigen.log_w(alpha) - log_pair_det(model, alpha, yd,
                                                   np.asarray(y, dtype=float))


def _check_b_args(model: DiffusionModel, alpha: float, y, delta: float) -> None:
    _check_delta(delta)
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    if np.any(np.asarray(y, dtype=float) - delta <= model.l):
        raise DomainError(f"y - delta must exceed the lower endpoint l={model.l}")
    if alpha > 0 and not model.supports_alpha(alpha):
        raise DomainError(
            f"model {model.model_id!r} provides no eigenfunctions at alpha={alpha}")


def b_alpha(model: DiffusionModel, alpha: float, y, delta: float):
    """The first determinant ratio; at alpha = 0 it degenerates to
    1 / (S(y) - S(y - delta)) for every model class."""
    _check_b_args(model, alpha, y, delta)
    if alpha == 0.0:
        out = np.exp(-model.log_scale_diff(y, delta))
    else:
        out = np.exp(_log_b(model, alpha, y, delta))
    return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out


def c_alpha(model: DiffusionModel, alpha: float, y, delta: float):
    """The Wronskian-over-determinant ratio; same alpha = 0 limit as
    ``b_alpha``, and c <= b always."""
    _check_b_args(model, alpha, y, delta)
    if alpha == 0.0:
        out = np.exp(-model.log_scale_diff(y, delta))
    else:
        out = np.exp(_log_c(model, alpha, y, delta))
    return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------

def survival_max_at_drawdown(model: DiffusionModel, x: float, delta: float,
                             y: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """P_x(maximum at the first delta-drawdown exceeds y)."""
    _check_delta(delta)
    model.check_level(x, "x")
    x0 = kink_point(model, x, delta)
    if y < x0:
        raise DomainError(
            f"y={y} lies below the kink point x v (delta + l) = {x0}; "
            "the survival probability there is identically 1")
    if y == x0:
        return 1.0
    res = integrate_adaptive(hazard_dS(model, delta), x0, y, spec)
    return float(np.exp(-res.value))


def density_max_at_drawdown(model: DiffusionModel, x: float, delta: float,
                            y: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Density of the maximum at the first delta-drawdown:
    hazard(y) * survival(y)."""
    surv = survival_max_at_drawdown(model, x, delta, y, spec)
    return float(hazard_dS(model, delta)(y)) * surv


def escape_probability(model: DiffusionModel, x: float, delta: float,
                       spec: QuadSpec = DEFAULT_SPEC) -> float:
    """P_x(the drawdown never reaches delta) = limit in y of the survival
    function of the maximum at the first delta-drawdown.

    A divergent hazard integral (every recurrent model) gives exactly 0.
    """
    _check_delta(delta)
    model.check_level(x, "x")
    x0 = kink_point(model, x, delta)
    res = integrate_adaptive_tail(hazard_dS(model, delta), x0, spec)
    if res.diverged:
        return 0.0
    return float(np.exp(-res.value))


def lehoczky_lt(model: DiffusionModel, x: float, delta: float, alpha: float,
                beta: float = 0.0, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Joint transform E_x[exp(-alpha * theta_delta - beta * M_theta)].

    Evaluated as  psi(x)/psi(x0) * int_x0^inf c_a(y) exp(-beta y - B(y)) dS(y)
    with the inner integral B(y) = int_x0^y b_a dS accumulated as running
    state on the same adaptive grid.  Tail extension stops once the rigorous
    remainder bound exp(-beta y - B(y)) (valid because c <= b) is negligible.
    """
    _check_delta(delta)
    if beta < 0:
        raise DomainError(f"beta must be nonnegative, got {beta}")
    if alpha <= 0:
        if alpha == 0.0 and not model.recurrent:
            pass   # transient models admit alpha = 0 directly
        else:
            raise DomainError("alpha must be positive (alpha = 0 only for transient models)")
    model.check_level(x, "x")
    if alpha > 0 and not model.supports_alpha(alpha):
        raise DomainError(f"model {model.model_id!r} provides no eigenfunctions at alpha={alpha}")
    x0 = kink_point(model, x, delta)
    fam = model.eigen
    log_pref = float(fam.log_psi(alpha, x) - fam.log_psi(alpha, x0))

    def hz(z):
        if alpha == 0.0:
            return float(np.exp(model.log_scale_deriv(z) - model.log_scale_diff(z, delta)))
        return float(np.exp(_log_b(model, alpha, z, delta) + model.log_scale_deriv(z)))

    def wt(z):
        if alpha == 0.0:
            lc = -model.log_scale_diff(z, delta)
        else:
            lc = _log_c(model, alpha, z, delta)
        return float(np.exp(lc + model.log_scale_deriv(z) - beta * z))

    res = integrate_weighted_survival(
        hz, wt, x0, math.inf, spec=spec,
        tail_bound=lambda yy, H: math.exp(min(-beta * yy - H, 50.0)))
    return float(math.exp(log_pref) * res.value)


def maxdd_cdf(model: DiffusionModel, x: float, eta: float, y: float,
              spec: QuadSpec = DEFAULT_SPEC) -> float:
    """P_x(maximum drawdown before hitting eta is below y)."""
    if y <= 0:
        raise DomainError(f"drawdown size y must be positive, got {y}")
    if eta <= x:
        raise DomainError(f"target eta={eta} must exceed the start x={x}")
    model.check_level(x, "x")
    if math.isfinite(model.l) and y > eta - model.l:
        raise DomainError(f"y={y} exceeds eta - l = {eta - model.l}; the CDF is 1 there")
    a0 = max(x, y + model.l)
    if a0 >= eta:
        return 1.0
    res = integrate_adaptive(hazard_dS(model, y), a0, eta, spec)
    return float(np.exp(-res.value))


def malyutin_lt(model: DiffusionModel, x: float, eta: float, y: float,
                alpha: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Joint law of hitting time and maximum drawdown before it:
    E_x[exp(-alpha * H_eta); maximum drawdown before H_eta is < y]."""
    if y <= 0:
        raise DomainError(f"drawdown size y must be positive, got {y}")
    model.check_level(x, "x")
    a0 = max(x, y + model.l)
    if eta < a0:
        raise DomainError(f"need eta >= x v (y + l) = {a0}, got eta={eta}")
    if alpha == 0.0 and model.recurrent:
        raise DomainError("alpha must be positive for recurrent models "
                          "(the alpha -> 0 limit is the plain maxdd CDF)")
    if alpha > 0 and not model.supports_alpha(alpha):
        raise DomainError(f"model {model.model_id!r} provides no eigenfunctions at alpha={alpha}")
    fam = model.eigen
    log_pref = float(fam.log_psi(alpha, x) - fam.log_psi(alpha, a0))
    if eta == a0:
        return float(np.exp(log_pref))

    def g(z):
        if alpha == 0.0:
            return np.exp(model.log_scale_deriv(z) - model.log_scale_diff(z, y))
        return np.exp(_log_b(model, alpha, z, y) + model.log_scale_deriv(z))

    res = integrate_adaptive(g, a0, eta, spec)
    return float(np.exp(log_pref - res.value))


def malyutin_lt_alt(model: DiffusionModel, x: float, eta: float, y: float,
                    alpha: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Equivalent h-transform form of ``malyutin_lt``:
    psi(x)/psi(eta) * exp(-int c_a(z, y) psi(z-y)/psi(z) dS(z)).
    Kept as an independent cross-check of the main formula."""
    if y <= 0:
        raise DomainError(f"drawdown size y must be positive, got {y}")
    model.check_level(x, "x")
    a0 = max(x, y + model.l)
    if eta < a0:
        raise DomainError(f"need eta >= x v (y + l) = {a0}, got eta={eta}")
    if alpha == 0.0 and model.recurrent:
        raise DomainError("alpha must be positive for recurrent models")
    if alpha > 0 and not model.supports_alpha(alpha):
        raise DomainError(f"model {model.model_id!r} provides no eigenfunctions at alpha={alpha}")
    fam = model.eigen
    log_pref = float(fam.log_psi(alpha, x) - fam.log_psi(alpha, eta))
    if eta == a0:
        return float(np.exp(log_pref))

    def g(z):
        z = np.asarray(z, dtype=float)
        if alpha == 0.0:
            lc = -model.log_scale_diff(z, y)
        else:
            lc = _log_c(model, alpha, z, y)
        return np.exp(lc + fam.log_psi(alpha, z - y) - fam.log_psi(alpha, z)
                      + model.log_scale_deriv(z))

    res = integrate_adaptive(g, a0, eta, spec)
    return float(np.exp(log_pref - res.value))


def general_drawdown_survival(model: DiffusionModel, x: float, phi: Callable,
                              y: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """Survival of the maximum at a level-dependent drawdown stop: the
    drawdown barrier is phi(M) instead of a constant delta.

    Only the unbounded-below form is implemented; models with a finite
    lower endpoint are rejected rather than extrapolated.
    """
    if model.l != -math.inf:
        raise DomainError(
            "level-dependent drawdown laws are implemented only for models "
            f"unbounded below (model {model.model_id!r} has l={model.l})")
    if y < x:
        raise DomainError(f"need y >= x, got y={y} < x={x}")
    if y == x:
        return 1.0

    def phi_vec(z):
        try:
            out = np.asarray(phi(z), dtype=float)
            if out.shape != np.shape(z):
                raise TypeError
        except TypeError:
            out = np.asarray([phi(t) for t in np.atleast_1d(z)], dtype=float)
        if np.any(out <= 0):
            raise DomainError("the drawdown-size function phi must stay positive")
        return out

    def g(z):
        return np.exp(model.log_scale_deriv(z) - model.log_scale_diff(z, phi_vec(z)))

    res = integrate_adaptive(g, x, y, spec)
    return float(np.exp(-res.value))


# ---------------------------------------------------------------------------
# curve sweeps (shared by the CLI and the validation suites)
# ---------------------------------------------------------------------------

def _as_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise DomainError("grid must be a nonempty 1-d array")
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise DomainError("grid must be strictly increasing")
    return g


def survival_curve(model: DiffusionModel, x: float, delta: float, grid,
                   spec: QuadSpec = DEFAULT_SPEC) -> CurveTable:
    """Survival of the maximum at first drawdown on a y-grid; the hazard
    integral accumulates across grid points.  Points below the kink get the
    exact value 1."""
    _check_delta(delta)
    g = _as_grid(grid)
    x0 = kink_point(model, x, delta)
    h = hazard_dS(model, delta)
    vals = np.ones_like(g)
    errs = np.zeros_like(g)
    acc = 0.0
    acc_err = 0.0
    prev = x0
    for i, yy in enumerate(g):
        if yy <= x0:
            continue
        res = integrate_adaptive(h, prev, yy, spec)
        acc += res.value
        acc_err += res.err_estimate
        prev = yy
        vals[i] = math.exp(-acc)
        errs[i] = vals[i] * acc_err
    q = LawQuery(x=x, delta=delta).as_dict()
    q["model"] = model.model_id
    return CurveTable("survival_m", q, g, vals, errs)


def density_curve(model: DiffusionModel, x: float, delta: float, grid,
                  spec: QuadSpec = DEFAULT_SPEC) -> CurveTable:
    surv = survival_curve(model, x, delta, grid, spec)
    x0 = kink_point(model, x, delta)
    h = hazard_dS(model, delta)
    vals = np.where(surv.grid >= x0, h(np.maximum(surv.grid, x0)) * surv.values, 0.0)
    q = dict(surv.query)
    return CurveTable("density_m", q, surv.grid, vals, surv.err)


def maxdd_curve(model: DiffusionModel, x: float, eta: float, grid,
                spec: QuadSpec = DEFAULT_SPEC) -> CurveTable:
    """Maximum-drawdown CDF on a grid of drawdown sizes y (fixed eta)."""
    g = _as_grid(grid)
    vals = np.empty_like(g)
    errs = np.empty_like(g)
    for i, yy in enumerate(g):
        a0 = max(x, yy + model.l)
        if a0 >= eta:
            vals[i], errs[i] = 1.0, 0.0
            continue
        res = integrate_adaptive(hazard_dS(model, yy), a0, eta, spec)
        vals[i] = math.exp(-res.value)
        errs[i] = vals[i] * res.err_estimate
    q = LawQuery(x=x, eta=eta).as_dict()
    q["model"] = model.model_id
    return CurveTable("maxdd", q, g, vals, errs)
