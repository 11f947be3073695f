"""One-dimensional diffusion models: scale functions, speed densities and
the increasing/decreasing eigenfunction pair that encodes hitting-time
Laplace transforms.

Every model lives on an interval (l, +inf).  Recurrent models ("class 1")
have an unbounded scale function at +inf; transient ones ("class 2") have
S(+inf) < inf.  Sub-case "a" means S(l) = -inf, sub-case "b" means a finite
reflecting lower endpoint.  The catalog:

===========  =================================  =====  ======
id           process                            l      class
===========  =================================  =====  ======
bm_std       standard Brownian motion           -inf   1a
bm_drift     Brownian motion, drift mu > 0      -inf   2a
rbm          Brownian motion reflected at 0     0      1b
gbm          geometric BM, mu >= sigma^2/2      0      1a/2a
example33    scale S(z) = 1 - exp(-e^z)         0      2b
example34    scale S(z) = 1 - e^{-z}            0      2b
===========  =================================  =====  ======

Eigenfunctions grow/decay exponentially, so everything that feeds ratio
formulas is exposed in log space: ``log_psi``, ``log_phi``, the scale
derivatives ``log_psi_minus`` / ``log_neg_phi_minus`` (psi_minus >= 0 and
phi_minus <= 0 always), the pair determinant
``log(phi(a) psi(b) - phi(b) psi(a))`` for a < b, and the scale increment
``log(S(z) - S(z - d))``.  Catalog models use hyperbolic closed forms; the
generic fallbacks use log1p/expm1 so that nearly-equal arguments keep full
relative accuracy.

All evaluators are numpy-vectorized, reentrant and never mutate state;
models are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UnknownModelError

__all__ = [
    "AlphaBasis",
    "DiffusionModel",
    "MODEL_CATALOG",
    "build_model",
    "custom_model",
    "eval_basis",
    "hitting_lt",
    "two_sided_exit_lt",
]

_LOG2 = math.log(2.0)


def _log_sinh(x):
    # log(sinh x) for x >= 0 without overflow
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return x + np.log1p(-np.exp(-2.0 * x)) - _LOG2


def _log_cosh(x):
    x = np.asarray(x, dtype=float)
    return x + np.log1p(np.exp(-2.0 * x)) - _LOG2


@dataclass(frozen=True)
class AlphaBasis:
    """Eigenfunction data at one (alpha, z).

    ``psi`` is the increasing and ``phi`` the decreasing positive solution;
    ``psi_minus``/``phi_minus`` are their derivatives with respect to the
    scale function, and ``w`` the z-independent Wronskian
    ``psi_minus*phi - psi*phi_minus``.  Raw values can overflow to inf for
    extreme arguments; the log fields are always finite (or -inf) and are
    what the law modules consume.
    """

    alpha: float
    psi: float
    psi_minus: float
    phi: float
    phi_minus: float
    w: float
    log_psi: float
    log_psi_minus: float
    log_phi: float
    log_neg_phi_minus: float
    log_w: float


@dataclass(frozen=True)
class _EigenFamily:
    """Log-space eigenfunction evaluators for alpha > 0 (and alpha = 0 for
    transient models, where psi_0 = 1 and phi_0 = S(+inf) - S)."""

    log_psi: Callable
    log_phi: Callable
    log_psi_minus: Callable
    log_neg_phi_minus: Callable
    log_w: Callable                      # alpha -> float
    log_pair_det: Optional[Callable] = None   # (alpha, a, b) -> log D, a < b


@dataclass(frozen=True)
class DiffusionModel:
    """Immutable description of one diffusion.  See module docstring."""

    model_id: str
    params: tuple
    l: float                      # lower endpoint; -inf for unbounded below
    r: float                      # upper endpoint, always +inf here
    boundary_class: str           # "1a" | "1b" | "2a" | "2b"
    scale: Callable               # z -> S(z)
    scale_deriv: Callable         # z -> S'(z)
    log_scale_deriv: Callable
    scale_diff: Callable          # (z, d) -> S(z) - S(z-d), d > 0
    log_scale_diff: Callable
    scale_at_inf: float           # S(+inf); +inf for class 1
    speed_density: Optional[Callable] = None
    eigen: Optional[_EigenFamily] = None
    drift: Optional[Callable] = None     # SDE coefficients, for simulation
    vol: Optional[Callable] = None
    description: str = ""

    @property
    def recurrent(self) -> bool:
        return self.boundary_class.startswith("1")

    @property
    def reflecting_lower(self) -> bool:
        return self.boundary_class.endswith("b")

    def basis(self, alpha: float, z: float) -> AlphaBasis:
        return eval_basis(self, alpha, z)

    # -- validation helpers -------------------------------------------------

    def check_level(self, z, name: str = "z") -> None:
        z = np.asarray(z, dtype=float)
        if self.l == -math.inf:
            return
        if self.reflecting_lower:
            # closed at a reflecting endpoint
            if np.any(z < self.l - 1e-12):
                raise DomainError(f"{name}={z} below the lower endpoint l={self.l}")
        else:
            if np.any(z <= self.l):
                raise DomainError(f"{name}={z} outside the open domain ({self.l}, inf)")

    def supports_alpha(self, alpha: float) -> bool:
        if self.eigen is None:
            return False
        if alpha > 0:
            # models defined only through their scale function have no
            # closed-form eigenfunctions at alpha > 0
            return self.model_id not in ("example33", "example34")
        return not self.recurrent   # alpha = 0 basis exists for class 2 only


def _alpha0_family(model_scale, scale_at_inf, log_scale_diff):
    """psi_0 = 1, phi_0 = S(+inf) - S(z) for transient models; w_0 = 1."""

    def log_psi(alpha, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def log_phi(alpha, z):
        return np.log(scale_at_inf - np.asarray(model_scale(z), dtype=float))

    def log_psi_minus(alpha, z):
        return np.full_like(np.asarray(z, dtype=float), -np.inf)

    def log_neg_phi_minus(alpha, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def log_pair_det(alpha, a, b):
        # phi_0(a) - phi_0(b) = S(b) - S(a)
        return log_scale_diff(b, b - a)

    return _EigenFamily(log_psi, log_phi, log_psi_minus, log_neg_phi_minus,
                        lambda alpha: 0.0, log_pair_det)


def _dispatch_alpha0(pos_family: _EigenFamily, a0_family: Optional[_EigenFamily]):
    """Route alpha = 0 to the transient-case family when one exists."""
    if a0_family is None:
        return pos_family

    def pick(f_pos, f_zero):
        def g(alpha, *args):
            return f_zero(alpha, *args) if alpha == 0.0 else f_pos(alpha, *args)
        return g

    return _EigenFamily(
        log_psi=pick(pos_family.log_psi, a0_family.log_psi),
        log_phi=pick(pos_family.log_phi, a0_family.log_phi),
        log_psi_minus=pick(pos_family.log_psi_minus, a0_family.log_psi_minus),
        log_neg_phi_minus=pick(pos_family.log_neg_phi_minus, a0_family.log_neg_phi_minus),
        log_w=lambda alpha: (a0_family.log_w(alpha) if alpha == 0.0
                             else pos_family.log_w(alpha)),
        log_pair_det=pick(pos_family.log_pair_det, a0_family.log_pair_det)
        if pos_family.log_pair_det is not None else None,
    )


# ---------------------------------------------------------------------------
# catalog builders
# ---------------------------------------------------------------------------

def _build_bm_std() -> DiffusionModel:
    def u_of(alpha):
        return math.sqrt(2.0 * alpha)

    fam = _EigenFamily(
        log_psi=lambda a, z: np.asarray(z, dtype=float) * u_of(a),
        log_phi=lambda a, z: -np.asarray(z, dtype=float) * u_of(a),
        log_psi_minus=lambda a, z: math.log(u_of(a)) + np.asarray(z, dtype=float) * u_of(a),
        log_neg_phi_minus=lambda a, z: math.log(u_of(a)) - np.asarray(z, dtype=float) * u_of(a),
        log_w=lambda a: _LOG2 + math.log(u_of(a)),
        log_pair_det=lambda a, lo, hi: _LOG2 + _log_sinh((np.asarray(hi) - np.asarray(lo)) * u_of(a)),
    )
    ident = lambda z: np.asarray(z, dtype=float)
    return DiffusionModel(
        model_id="bm_std", params=(), l=-math.inf, r=math.inf, boundary_class="1a",
        scale=ident,
        scale_deriv=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        log_scale_deriv=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        scale_diff=lambda z, d: np.asarray(d, dtype=float) + 0.0 * np.asarray(z, dtype=float),
        log_scale_diff=lambda z, d: np.log(np.asarray(d, dtype=float)) + 0.0 * np.asarray(z, dtype=float),
        scale_at_inf=math.inf,
        speed_density=lambda z: np.full_like(np.asarray(z, dtype=float), 2.0),
        eigen=fam,
        drift=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        vol=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        description="standard Brownian motion on R",
    )


def _build_bm_drift(mu: float) -> DiffusionModel:
    if mu <= 0:
        raise DomainError(f"bm_drift requires mu > 0 (got mu={mu}); "
                          "mu <= 0 falls outside the supported boundary classes")
    two_mu = 2.0 * mu

    def gamma(alpha):
        return math.sqrt(mu * mu + 2.0 * alpha)

    def scale(z):
        return -np.expm1(-two_mu * np.asarray(z, dtype=float)) / two_mu

    def log_scale_diff(z, d):
        z = np.asarray(z, dtype=float)
        d = np.asarray(d, dtype=float)
        return -two_mu * z + np.log(np.expm1(two_mu * d)) - math.log(two_mu)

    fam_pos = _EigenFamily(
        log_psi=lambda a, z: (gamma(a) - mu) * np.asarray(z, dtype=float),
        log_phi=lambda a, z: -(gamma(a) + mu) * np.asarray(z, dtype=float),
        log_psi_minus=lambda a, z: math.log(gamma(a) - mu) + (gamma(a) + mu) * np.asarray(z, dtype=float),
        log_neg_phi_minus=lambda a, z: math.log(gamma(a) + mu) + (mu - gamma(a)) * np.asarray(z, dtype=float),
        log_w=lambda a: _LOG2 + math.log(gamma(a)),
        log_pair_det=lambda a, lo, hi: (-mu * (np.asarray(lo, dtype=float) + np.asarray(hi, dtype=float))
                                        + _LOG2 + _log_sinh(gamma(a) * (np.asarray(hi) - np.asarray(lo)))),
    )
    fam = _dispatch_alpha0(fam_pos, _alpha0_family(scale, 1.0 / two_mu, log_scale_diff))
    return DiffusionModel(
        model_id="bm_drift", params=(mu,), l=-math.inf, r=math.inf, boundary_class="2a",
        scale=scale,
        scale_deriv=lambda z: np.exp(-two_mu * np.asarray(z, dtype=float)),
        log_scale_deriv=lambda z: -two_mu * np.asarray(z, dtype=float),
        scale_diff=lambda z, d: np.exp(log_scale_diff(z, d)),
        log_scale_diff=log_scale_diff,
        scale_at_inf=1.0 / two_mu,
        speed_density=lambda z: 2.0 * np.exp(two_mu * np.asarray(z, dtype=float)),
        eigen=fam,
        drift=lambda z: np.full_like(np.asarray(z, dtype=float), mu),
        vol=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        description=f"Brownian motion with drift mu={mu}",
    )


def _build_rbm() -> DiffusionModel:
    def u_of(alpha):
        return math.sqrt(2.0 * alpha)

    def scale_diff(z, d):
        z = np.asarray(z, dtype=float)
        zd = z - np.asarray(d, dtype=float)
        if np.any(zd < -1e-9 * np.maximum(1.0, np.abs(z))):
            raise DomainError("scale increment requested below the reflecting endpoint 0")
        return np.where(zd > 0.0, np.asarray(d, dtype=float), z)

    fam = _EigenFamily(
        log_psi=lambda a, z: _log_cosh(np.asarray(z, dtype=float) * u_of(a)),
        log_phi=lambda a, z: -np.asarray(z, dtype=float) * u_of(a),
        log_psi_minus=lambda a, z: math.log(u_of(a)) + _log_sinh(np.asarray(z, dtype=float) * u_of(a)),
        log_neg_phi_minus=lambda a, z: math.log(u_of(a)) - np.asarray(z, dtype=float) * u_of(a),
        log_w=lambda a: math.log(u_of(a)),
        log_pair_det=lambda a, lo, hi: _log_sinh((np.asarray(hi) - np.asarray(lo)) * u_of(a)),
    )
    return DiffusionModel(
        model_id="rbm", params=(), l=0.0, r=math.inf, boundary_class="1b",
        scale=lambda z: np.asarray(z, dtype=float),
        scale_deriv=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        log_scale_deriv=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        scale_diff=scale_diff,
        log_scale_diff=lambda z, d: np.log(scale_diff(z, d)),
        scale_at_inf=math.inf,
        speed_density=lambda z: np.full_like(np.asarray(z, dtype=float), 2.0),
        eigen=fam,
        drift=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        vol=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        description="Brownian motion reflected at 0",
    )


def _build_gbm(mu: float, sigma: float) -> DiffusionModel:
    if sigma <= 0:
        raise DomainError(f"gbm requires sigma > 0 (got sigma={sigma})")
    nu = 2.0 * mu / (sigma * sigma)
    if nu < 1.0 - 1e-12:
        raise DomainError(
            f"gbm with 2*mu/sigma^2 = {nu:.6g} < 1 drifts to 0 and falls outside "
            "the supported boundary classes (need mu >= sigma^2/2)")
    log_case = abs(nu - 1.0) <= 1e-12

    def _z(z):
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0.0):
            raise DomainError("gbm levels must be positive")
        return z

    if log_case:
        scale = lambda z: np.log(_z(z))
        scale_deriv = lambda z: 1.0 / _z(z)
        log_scale_deriv = lambda z: -np.log(_z(z))
        scale_at_inf = math.inf
        bclass = "1a"

        def scale_diff(z, d):
            return -np.log1p(-np.asarray(d, dtype=float) / _z(z))

        def log_scale_diff(z, d):
            return np.log(scale_diff(z, d))
    else:
        p = 1.0 - nu   # exponent of the scale density integral, p < 0
        scale = lambda z: (_z(z) ** p - 1.0) / p
        scale_deriv = lambda z: _z(z) ** (-nu)
        log_scale_deriv = lambda z: -nu * np.log(_z(z))
        scale_at_inf = -1.0 / p
        bclass = "2a"

        def log_scale_diff(z, d):
            z = _z(z)
            d = np.asarray(d, dtype=float)
            return p * np.log(z) + np.log(np.expm1(p * np.log1p(-d / z))) - math.log(-p)

        def scale_diff(z, d):
            return np.exp(log_scale_diff(z, d))

    def theta_pm(alpha):
        w = math.sqrt((nu - 1.0) ** 2 + 8.0 * alpha / (sigma * sigma))
        return 0.5 * ((1.0 - nu) + w), 0.5 * ((1.0 - nu) - w), w

    def log_pair_det(alpha, lo, hi):
        tp, tm, w = theta_pm(alpha)
        la, lb = np.log(_z(lo)), np.log(_z(hi))
        return 0.5 * (tp + tm) * (la + lb) + _LOG2 + _log_sinh(0.5 * w * (lb - la))

    fam_pos = _EigenFamily(
        log_psi=lambda a, z: theta_pm(a)[0] * np.log(_z(z)),
        log_phi=lambda a, z: theta_pm(a)[1] * np.log(_z(z)),
        log_psi_minus=lambda a, z: (math.log(theta_pm(a)[0])
                                    + (theta_pm(a)[0] + nu - 1.0) * np.log(_z(z))),
        log_neg_phi_minus=lambda a, z: (math.log(-theta_pm(a)[1])
                                        + (theta_pm(a)[1] + nu - 1.0) * np.log(_z(z))),
        log_w=lambda a: math.log(theta_pm(a)[2]),
        log_pair_det=log_pair_det,
    )
    fam = fam_pos if log_case else _dispatch_alpha0(
        fam_pos, _alpha0_family(scale, scale_at_inf, log_scale_diff))
    return DiffusionModel(
        model_id="gbm", params=(mu, sigma), l=0.0, r=math.inf, boundary_class=bclass,
        scale=scale, scale_deriv=scale_deriv, log_scale_deriv=log_scale_deriv,
        scale_diff=scale_diff, log_scale_diff=log_scale_diff,
        scale_at_inf=scale_at_inf,
        speed_density=lambda z: 2.0 * _z(z) ** (nu - 2.0) / (sigma * sigma),
        eigen=fam,
        drift=lambda z: mu * np.asarray(z, dtype=float),
        vol=lambda z: sigma * np.asarray(z, dtype=float),
        description=f"geometric Brownian motion mu={mu}, sigma={sigma}",
    )


def _raising_family(model_id: str) -> _EigenFamily:
    def boom(*args, **kwargs):
        _no_eigen(model_id)
    return _EigenFamily(boom, boom, boom, boom, boom, boom)


def _build_example33() -> DiffusionModel:
    # S(z) = 1 - exp(-e^z), l = 0 reflecting; doubly-exponential scale growth
    def scale(z):
        return -np.expm1(-np.exp(np.asarray(z, dtype=float)))

    def log_scale_diff(z, d):
        z = np.asarray(z, dtype=float)
        d = np.asarray(d, dtype=float)
        q = np.exp(z - d)
        gap = np.exp(z) * (-np.expm1(-d))
        return -q + np.log(-np.expm1(-gap))

    def log_scale_deriv(z):
        z = np.asarray(z, dtype=float)
        return z - np.exp(z)

    fam = _dispatch_alpha0(_raising_family("example33"),
                           _alpha0_family(scale, 1.0, log_scale_diff))
    return DiffusionModel(
        model_id="example33", params=(), l=0.0, r=math.inf, boundary_class="2b",
        scale=scale,
        scale_deriv=lambda z: np.exp(log_scale_deriv(z)),
        log_scale_deriv=log_scale_deriv,
        scale_diff=lambda z, d: np.exp(log_scale_diff(z, d)),
        log_scale_diff=log_scale_diff,
        scale_at_inf=1.0,
        eigen=fam,
        description="transient reflected model with S(z) = 1 - exp(-e^z); "
                    "a drawdown of any size is avoided forever with positive probability",
    )


def _build_example34() -> DiffusionModel:
    # S(z) = 1 - e^{-z}, l = 0 reflecting; transient but drawdowns occur a.s.
    def scale(z):
        return -np.expm1(-np.asarray(z, dtype=float))

    def log_scale_diff(z, d):
        z = np.asarray(z, dtype=float)
        return -z + np.log(np.expm1(np.asarray(d, dtype=float)))

    fam = _dispatch_alpha0(_raising_family("example34"),
                           _alpha0_family(scale, 1.0, log_scale_diff))
    return DiffusionModel(
        model_id="example34", params=(), l=0.0, r=math.inf, boundary_class="2b",
        scale=scale,
        scale_deriv=lambda z: np.exp(-np.asarray(z, dtype=float)),
        log_scale_deriv=lambda z: -np.asarray(z, dtype=float),
        scale_diff=lambda z, d: np.exp(log_scale_diff(z, d)),
        log_scale_diff=log_scale_diff,
        scale_at_inf=1.0,
        eigen=fam,
        description="transient reflected model with S(z) = 1 - e^{-z}",
    )


def _no_eigen(model_id):
    raise DomainError(
        f"model {model_id!r} has no closed-form eigenfunctions for alpha > 0; "
        "only alpha = 0 quantities are available")


MODEL_CATALOG = {
    "bm_std": (_build_bm_std, 0, "standard Brownian motion", ()),
    "bm_drift": (_build_bm_drift, 1, "Brownian motion with drift mu > 0", ("mu",)),
    "rbm": (_build_rbm, 0, "Brownian motion reflected at 0", ()),
    "gbm": (_build_gbm, 2, "geometric Brownian motion (mu, sigma), mu >= sigma^2/2", ("mu", "sigma")),
    "example33": (_build_example33, 0, "reflected model with S(z) = 1 - exp(-e^z)", ()),
    "example34": (_build_example34, 0, "reflected model with S(z) = 1 - e^{-z}", ()),
}


def build_model(model_id: str, params=()) -> DiffusionModel:
    """Instantiate a catalog model.

    Raises UnknownModelError for an unlisted id and DomainError for invalid
    parameters (wrong count, sigma <= 0, drift outside the supported range).
    """
    try:
        builder, nparams, _, names = MODEL_CATALOG[model_id]
    except KeyError:
        raise UnknownModelError(
            f"unknown model id {model_id!r}; catalog: {sorted(MODEL_CATALOG)}") from None
    params = tuple(float(p) for p in params)
    if len(params) != nparams:
        raise DomainError(
            f"model {model_id!r} takes {nparams} parameter(s) {names}, got {len(params)}")
    return builder(*params)


def custom_model(*, scale, scale_deriv, l=-math.inf, boundary_class,
                 psi=None, phi=None, psi_deriv=None, phi_deriv=None,
                 speed_density=None, drift=None, vol=None, params=(),
                 model_id="custom", probe=True) -> DiffusionModel:
    """Wrap user evaluators into a model.

    ``psi``/``phi`` are optional callables (alpha, z) -> value; their raw
    derivatives (in z) feed the scale-derivative fields.  Eigenfunction
    values are used through their logarithms, so user evaluators should not
    overflow on the intended argument range.  A monotonicity probe on the
    scale function runs at build time; basis positivity is checked lazily.
    """
    scale_v = lambda z: np.asarray(scale(z), dtype=float)
    deriv_v = lambda z: np.asarray(scale_deriv(z), dtype=float)
    if probe:
        lo = l if math.isfinite(l) else -10.0
        zs = np.linspace(lo + 1e-6, lo + 20.0, 64)
        svals = scale_v(zs)
        if not np.all(np.diff(svals) > 0):
            raise DomainError("custom model failed the scale monotonicity probe")
        if np.any(deriv_v(zs) <= 0):
            raise DomainError("custom model scale derivative must be positive")

    def scale_diff(z, d):
        return scale_v(z) - scale_v(np.asarray(z, dtype=float) - np.asarray(d, dtype=float))

    fam = None
    if psi is not None and phi is not None:
        if psi_deriv is None or phi_deriv is None:
            raise DomainError("custom eigenfunctions need psi_deriv and phi_deriv too")

        def _checked_log(f, name):
            def g(alpha, z):
                vals = np.asarray(f(alpha, z), dtype=float)
                if np.any(vals <= 0.0):
                    raise DomainError(f"custom {name} must stay positive (alpha={alpha})")
                return np.log(vals)
            return g

        log_psi = _checked_log(psi, "psi")
        log_phi = _checked_log(phi, "phi")

        def log_psi_minus(alpha, z):
            v = np.asarray(psi_deriv(alpha, z), dtype=float) / deriv_v(z)
            if np.any(v < 0.0):
                raise DomainError("custom psi must be nondecreasing")
            with np.errstate(divide="ignore"):
                return np.log(v)

        def log_neg_phi_minus(alpha, z):
            v = -np.asarray(phi_deriv(alpha, z), dtype=float) / deriv_v(z)
            if np.any(v < 0.0):
                raise DomainError("custom phi must be nonincreasing")
            with np.errstate(divide="ignore"):
                return np.log(v)

        def log_w(alpha):
            z0 = (l + 1.0) if math.isfinite(l) else 0.0
            w = (math.exp(log_psi_minus(alpha, z0) + log_phi(alpha, z0))
                 + math.exp(log_neg_phi_minus(alpha, z0) + log_psi(alpha, z0)))
            return math.log(w)

        fam = _EigenFamily(log_psi, log_phi, log_psi_minus, log_neg_phi_minus, log_w)

    s_inf = math.inf if boundary_class.startswith("1") else float(scale_v(np.array([1e9]))[0])
    return DiffusionModel(
        model_id=model_id, params=tuple(params), l=float(l), r=math.inf,
        boundary_class=boundary_class,
        scale=scale_v, scale_deriv=deriv_v,
        log_scale_deriv=lambda z: np.log(deriv_v(z)),
        scale_diff=scale_diff,
        log_scale_diff=lambda z, d: np.log(scale_diff(z, d)),
        scale_at_inf=s_inf,
        speed_density=speed_density, eigen=fam, drift=drift, vol=vol,
        description="custom model",
    )


# ---------------------------------------------------------------------------
# eigenfunction-level operations
# ---------------------------------------------------------------------------

def _require_alpha(model: DiffusionModel, alpha: float) -> None:
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    if model.eigen is None:
        raise DomainError(f"model {model.model_id!r} has no eigenfunction data")
    if alpha == 0.0 and model.recurrent:
        raise DomainError(
            f"alpha = 0 eigenfunctions do not exist for the recurrent model "
            f"{model.model_id!r}; only scale-ratio quantities are defined there")
    if alpha > 0 and model.model_id in ("example33", "example34"):
        _no_eigen(model.model_id)


def eval_basis(model: DiffusionModel, alpha: float, z: float) -> AlphaBasis:
    """Evaluate (psi, psi_minus, phi, phi_minus, w) at one point.

    Raw fields may overflow to inf for very large |z|*sqrt(2 alpha); the log
    fields never do and are what downstream formulas use.
    """
    _require_alpha(model, alpha)
    model.check_level(z)
    fam = model.eigen
    lp = float(fam.log_psi(alpha, z))
    lf = float(fam.log_phi(alpha, z))
    lpm = float(fam.log_psi_minus(alpha, z))
    lnm = float(fam.log_neg_phi_minus(alpha, z))
    lw = float(fam.log_w(alpha))
    with np.errstate(over="ignore"):
        return AlphaBasis(
            alpha=alpha,
            psi=float(np.exp(lp)), psi_minus=float(np.exp(lpm)),
            phi=float(np.exp(lf)), phi_minus=-float(np.exp(lnm)),
            w=float(np.exp(lw)),
            log_psi=lp, log_psi_minus=lpm, log_phi=lf,
            log_neg_phi_minus=lnm, log_w=lw,
        )


def hitting_lt(model: DiffusionModel, alpha: float, x: float, y: float) -> float:
    """E_x[exp(-alpha * H_y)] where H_y is the first hitting time of y."""
    _require_alpha(model, alpha)
    model.check_level(x, "x")
    model.check_level(y, "y")
    fam = model.eigen
    if x <= y:
        return float(np.exp(fam.log_psi(alpha, x) - fam.log_psi(alpha, y)))
    return float(np.exp(fam.log_phi(alpha, x) - fam.log_phi(alpha, y)))


def log_pair_det(model: DiffusionModel, alpha: float, a, b):
    """log(phi(a) psi(b) - phi(b) psi(a)) for a < b, overflow-safe."""
    fam = model.eigen
    if fam.log_pair_det is not None:
        return fam.log_pair_det(alpha, a, b)
    lpa, lpb = fam.log_psi(alpha, a), fam.log_psi(alpha, b)
    lfa, lfb = fam.log_phi(alpha, a), fam.log_phi(alpha, b)
    e = (lpa - lpb) + (lfb - lfa)   # <= 0 by monotonicity
    return lfa + lpb + np.log(-np.expm1(np.minimum(e, 0.0)))


def two_sided_exit_lt(model: DiffusionModel, alpha: float, start: float,
                      lower: float, upper: float) -> tuple[float, float]:
    """Laplace transforms of the two-sided exit from (lower, upper).

    Returns ``(E[e^{-alpha H_lower}; H_lower < H_upper],
    E[e^{-alpha H_upper}; H_upper < H_lower])``.  At alpha = 0 these are the
    classical scale-ratio exit probabilities, valid for every model class.
    """
    if not (lower < start < upper):
        raise DomainError(
            f"need lower < start < upper, got {lower}, {start}, {upper}")
    too_low = (lower < model.l) if model.reflecting_lower else (lower <= model.l)
    if too_low:
        raise DomainError(f"lower={lower} must lie above the endpoint l={model.l}")
    if alpha == 0.0:
        span = float(model.scale(upper) - model.scale(lower))
        up = float(model.scale(start) - model.scale(lower)) / span
        return 1.0 - up, up
    _require_alpha(model, alpha)
    log_den = log_pair_det(model, alpha, lower, upper)
    low_comp = float(np.exp(log_pair_det(model, alpha, start, upper) - log_den))
    up_comp = float(np.exp(log_pair_det(model, alpha, lower, start) - log_den))
    return low_comp, up_comp
