"""Monte Carlo path oracle.

Simulates diffusion paths on a fixed time grid, extracts the drawdown
functionals (first drawdown times, maximum at those times, hitting times,
maximum drawdown before hitting) and turns them into empirical curves with
standard errors for comparison against the analytic laws.

Reproducibility contract: path i consumes the Philox stream keyed by
(seed, i) and nothing else, so results are bit-identical for a given
(model, config, query) regardless of block size, chunk size or worker
count.  Aggregation always runs in path-index order.

Discrete monitoring sees the maximum only on grid times, so drawdown times
are detected late and maxima slightly underestimated; the O(sqrt(h)) bias
this leaves is covered by the ``bias_allowance`` term of the comparator
and shrinks under step refinement.

Paths stop early once every requested functional is resolved.  For the
maximum-drawdown-before-hitting law a drawdown cap ``dd_cap`` equal to the
largest grid point makes this cheap: once the running maximum drawdown
exceeds the cap before the target level is hit, every indicator
{max drawdown < y} on the grid is already determined 0, and the path can
retire without waiting for the (heavy-tailed) hitting time itself.  The
recorded value is then +inf.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .laws import CurveTable
from .models import DiffusionModel

__all__ = [
    "McConfig", "McEstimate", "DrawdownStats", "ComparisonReport",
    "simulate_drawdown_stats", "estimate_curve", "compare_to_analytic",
]

_SCHEMES = ("exact_bm", "euler", "reflected_euler")
_EXACT_MODELS = ("bm_std", "bm_drift", "gbm")


@dataclass(frozen=True)
class McConfig:
    seed: int = 0
    n_paths: int = 10_000
    step: float = 1e-3
    scheme: str = "exact_bm"
    horizon: float = 50.0
    target: tuple = ("theta", "hitting")
    block_paths: int = 4096
    chunk_steps: int = 512
    workers: Optional[int] = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if self.step <= 0 or self.horizon <= 0:
            raise DomainError("step and horizon must be positive")
        if self.scheme not in _SCHEMES:
            raise DomainError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")

    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get("DRAWDOWN_KIT_THREADS", "")
        if env.strip():
            return max(1, int(env))
        return 1


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_effective: int
    censored_fraction: float


@dataclass(frozen=True)
class DrawdownStats:
    """Per-path functionals.  NaN marks a path censored at the horizon;
    +inf in ``dminus_eta`` marks a path whose maximum drawdown exceeded the
    cap before the target level was hit (all capped indicators are 0)."""

    deltas: tuple
    theta: np.ndarray        # (n_paths, n_deltas) drawdown times
    m_theta: np.ndarray      # (n_paths, n_deltas) maxima at those times
    eta: Optional[float]
    h_eta: Optional[np.ndarray]
    dminus_eta: Optional[np.ndarray]
    dd_cap: Optional[float]
    censored: np.ndarray     # (n_paths,) bool

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored))


def _check_scheme(model: DiffusionModel, scheme: str) -> None:
    if scheme == "exact_bm" and model.model_id not in _EXACT_MODELS:
        raise DomainError(f"scheme exact_bm supports {_EXACT_MODELS}, not {model.model_id!r}")
    if scheme == "reflected_euler" and model.model_id != "rbm":
        raise DomainError("scheme reflected_euler is the reflected-BM scheme")
    if scheme == "euler":
        if model.drift is None or model.vol is None:
            raise DomainError(f"model {model.model_id!r} carries no SDE coefficients for euler")
        if model.l != -math.inf:
            raise DomainError("euler scheme handles only models unbounded below; "
                              "use reflected_euler / exact_bm for bounded ones")


def _path_generator(seed: int, idx: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(idx)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _BlockState:
    """Mutable per-block simulation state, compacted as paths retire."""

    def __init__(self, model, config, x, deltas, eta, dd_cap, path_indices):
        n = len(path_indices)
        self.model = model
        self.config = config
        self.x = x
        self.deltas = deltas
        self.eta = eta
        self.dd_cap = dd_cap
        self.orig = np.asarray(path_indices)
        self.gens = [_path_generator(config.seed, int(i)) for i in path_indices]
        self.carrier = np.full(n, self._carrier_init(), dtype=float)
        self.M = np.full(n, x, dtype=float)
        self.D = np.zeros(n, dtype=float)
        self.steps_done = 0   # integer step clock keeps times chunk-invariant
        k = len(deltas)
        self.theta = np.full((n, k), np.nan)
        self.m_theta = np.full((n, k), np.nan)
        self.h_eta = np.full(n, np.nan) if eta is not None else None
        self.dminus = np.full(n, np.nan) if eta is not None else None

    def _carrier_init(self) -> float:
        mid = self.model.model_id
        if self.config.scheme == "exact_bm" and mid == "gbm":
            return math.log(self.x)
        return self.x   # arithmetic value; for rbm the signed pre-reflection state

    def _scan(self, inc: np.ndarray) -> np.ndarray:
        # fold the carried state into the first increment so cumsum equals
        # the sequential recurrence exactly, independent of chunk boundaries
        inc[:, 0] += self.carrier
        out = np.cumsum(inc, axis=1)
        self.carrier = out[:, -1].copy()
        return out

    def _chunk_states(self, Z: np.ndarray) -> np.ndarray:
        """Map one chunk of standard normals to path states, updating the
        carrier to the end of the chunk."""
        cfg, m = self.config, self.model
        h = cfg.step
        sh = math.sqrt(h)
        if cfg.scheme == "exact_bm":
            if m.model_id == "gbm":
                mu, sigma = m.params
                return np.exp(self._scan((mu - 0.5 * sigma * sigma) * h + sigma * sh * Z))
            mu = m.params[0] if m.model_id == "bm_drift" else 0.0
            return self._scan(mu * h + sh * Z)
        if cfg.scheme == "reflected_euler":
            # reflected BM is |signed BM| in law, so reflect the cumulative
            # signed state; identical in distribution to per-step sign-flip
            return np.abs(self._scan(sh * Z))
        # generic Euler-Maruyama, sequential in time
        X = np.empty_like(Z)
        cur = self.carrier.copy()
        drift, vol = m.drift, m.vol
        for j in range(Z.shape[1]):
            cur = cur + drift(cur) * h + vol(cur) * sh * Z[:, j]
            X[:, j] = cur
        self.carrier = cur
        return X

    def run_chunk(self, n_steps: int) -> None:
        n = len(self.gens)
        Z = np.empty((n, n_steps))
        for i, g in enumerate(self.gens):
            Z[i] = g.standard_normal(n_steps)
        X = self._chunk_states(Z)
        h = self.config.step
        Mx = np.maximum(self.M[:, None], np.maximum.accumulate(X, axis=1))
        DD = Mx - X
        Dx = np.maximum(self.D[:, None], np.maximum.accumulate(DD, axis=1))
        times = h * np.arange(self.steps_done + 1, self.steps_done + n_steps + 1)

        for k, d in enumerate(self.deltas):
            todo = np.isnan(self.theta[:, k])
            if not np.any(todo):
                continue
            mask = DD[todo] > d
            hit = mask.any(axis=1)
            rows = np.flatnonzero(todo)[hit]
            idx = mask[hit].argmax(axis=1)
            self.theta[rows, k] = times[idx]
            self.m_theta[rows, k] = Mx[rows, idx]

        if self.eta is not None:
            todo = np.isnan(self.h_eta) & np.isnan(self.dminus)
            rows_all = np.flatnonzero(todo)
            if rows_all.size:
                hit_mask = X[rows_all] >= self.eta
                cap_mask = (Dx[rows_all] > self.dd_cap) if self.dd_cap is not None \
                    else np.zeros_like(hit_mask)
                any_hit = hit_mask.any(axis=1)
                any_cap = cap_mask.any(axis=1)
                idx_hit = np.where(any_hit, hit_mask.argmax(axis=1), n_steps)
                idx_cap = np.where(any_cap, cap_mask.argmax(axis=1), n_steps)
                hit_first = any_hit & (idx_hit <= idx_cap)
                cap_first = any_cap & (idx_cap < idx_hit)
                r = rows_all[hit_first]
                self.h_eta[r] = times[idx_hit[hit_first]]
                self.dminus[r] = Dx[r, idx_hit[hit_first]]
                r = rows_all[cap_first]
                self.dminus[r] = np.inf

        self.M = Mx[:, -1].copy()
        self.D = Dx[:, -1].copy()
        self.steps_done += n_steps

    def done_mask(self) -> np.ndarray:
        done = ~np.isnan(self.theta).any(axis=1)
        if self.eta is not None:
            done &= ~(np.isnan(self.h_eta) & np.isnan(self.dminus))
        return done

    def compact(self, keep: np.ndarray) -> None:
        self.orig = self.orig[keep]
        self.gens = [g for g, k in zip(self.gens, keep) if k]
        self.carrier = self.carrier[keep]
        self.M = self.M[keep]
        self.D = self.D[keep]
        self.theta = self.theta[keep]
        self.m_theta = self.m_theta[keep]
        if self.eta is not None:
            self.h_eta = self.h_eta[keep]
            self.dminus = self.dminus[keep]


def _run_block(model, config, x, deltas, eta, dd_cap, path_indices, out):
    st = _BlockState(model, config, x, deltas, eta, dd_cap, path_indices)
    steps_left = int(round(config.horizon / config.step))
    while steps_left > 0 and len(st.gens) > 0:
        n_steps = min(config.chunk_steps, steps_left)
        st.run_chunk(n_steps)
        steps_left -= n_steps
        done = st.done_mask()
        if np.any(done):
            rows = st.orig[done]
            out["theta"][rows] = st.theta[done]
            out["m_theta"][rows] = st.m_theta[done]
            if eta is not None:
                out["h_eta"][rows] = st.h_eta[done]
                out["dminus"][rows] = st.dminus[done]
            st.compact(~done)
    if len(st.gens) > 0:   # censored at the horizon; keep partial records
        rows = st.orig
        out["theta"][rows] = st.theta
        out["m_theta"][rows] = st.m_theta
        if eta is not None:
            out["h_eta"][rows] = st.h_eta
            out["dminus"][rows] = st.dminus
        out["censored"][rows] = True


def simulate_drawdown_stats(model: DiffusionModel, config: McConfig, x: float,
                            deltas, eta: Optional[float] = None,
                            dd_cap: Optional[float] = None) -> DrawdownStats:
    """Simulate ``config.n_paths`` paths from x and record, per path, the
    first drawdown time and the maximum at it for every requested drawdown
    size, plus (optionally) the hitting time of ``eta`` and the maximum
    drawdown before it."""
    if np.isscalar(deltas):
        deltas = (float(deltas),)
    deltas = tuple(sorted(float(d) for d in deltas))
    if any(d <= 0 for d in deltas):
        raise DomainError("drawdown sizes must be positive")
    model.check_level(x, "x")
    if eta is not None and eta <= x:
        raise DomainError(f"eta={eta} must exceed the start x={x}")
    _check_scheme(model, config.scheme)

    n = config.n_paths
    out = {
        "theta": np.full((n, len(deltas)), np.nan),
        "m_theta": np.full((n, len(deltas)), np.nan),
        "censored": np.zeros(n, dtype=bool),
    }
    if eta is not None:
        out["h_eta"] = np.full(n, np.nan)
        out["dminus"] = np.full(n, np.nan)

    blocks = [np.arange(b, min(b + config.block_paths, n))
              for b in range(0, n, config.block_paths)]
    workers = config.effective_workers()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(lambda blk: _run_block(model, config, x, deltas, eta,
                                               dd_cap, blk, out), blocks))
    else:
        for blk in blocks:
            _run_block(model, config, x, deltas, eta, dd_cap, blk, out)

    return DrawdownStats(
        deltas=deltas, theta=out["theta"], m_theta=out["m_theta"],
        eta=eta, h_eta=out.get("h_eta"), dminus_eta=out.get("dminus"),
        dd_cap=dd_cap, censored=out["censored"],
    )


def _mean_estimate(samples: np.ndarray, censored: np.ndarray) -> McEstimate:
    ok = ~censored & ~np.isnan(samples)
    vals = samples[ok]
    n = vals.size
    if n == 0:
        return McEstimate(math.nan, math.nan, 0, float(np.mean(censored)))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return McEstimate(float(np.mean(vals)), se, n, float(np.mean(censored)))


_MC_LAWS = ("survival_m", "maxdd", "theta_lt", "hitting_lt")


def estimate_curve(model: DiffusionModel, config: McConfig, law_id: str,
                   query: dict, grid) -> CurveTable:
    """Empirical curve for one law on a grid, from a single path ensemble.

    ``survival_m``: P(M(theta_delta) > y) over a y-grid.
    ``maxdd``:      P(max drawdown before hitting eta < y) over a y-grid.
    ``theta_lt``:   E[exp(-alpha theta_delta)] over an alpha-grid.
    ``hitting_lt``: E[exp(-alpha H_eta)] over an alpha-grid.
    """
    if law_id not in _MC_LAWS:
        raise DomainError(f"law_id must be one of {_MC_LAWS}, got {law_id!r}")
    grid = np.asarray(grid, dtype=float)
    x = float(query.get("x", 0.0))
    if law_id in ("survival_m", "theta_lt"):
        delta = float(query["delta"])
        stats = simulate_drawdown_stats(model, config, x, (delta,))
        samples = stats.m_theta[:, 0] if law_id == "survival_m" else stats.theta[:, 0]
    else:
        eta = float(query["eta"])
        cap = float(np.max(grid)) if law_id == "maxdd" else None
        stats = simulate_drawdown_stats(model, config, x, (), eta=eta, dd_cap=cap)
        samples = stats.dminus_eta if law_id == "maxdd" else stats.h_eta

    vals = np.empty_like(grid)
    errs = np.empty_like(grid)
    for i, g in enumerate(grid):
        if law_id == "survival_m":
            obs = (samples > g).astype(float)
        elif law_id == "maxdd":
            obs = (samples < g).astype(float)
        else:
            obs = np.exp(-g * samples)
        obs = np.where(np.isnan(samples), np.nan, obs)
        est = _mean_estimate(obs, stats.censored)
        vals[i], errs[i] = est.value, est.stderr
    q = dict(query)
    q.update(model=model.model_id, seed=config.seed, n_paths=config.n_paths,
             step=config.step, scheme=config.scheme,
             censored_fraction=stats.censored_fraction)
    return CurveTable(f"mc_{law_id}", q, grid, vals, errs)


@dataclass(frozen=True)
class ComparisonReport:
    grid: np.ndarray
    analytic: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    flagged: np.ndarray
    band_sigma: float
    bias_allowance: float

    @property
    def n_flagged(self) -> int:
        return int(np.sum(self.flagged))

    @property
    def flag_fraction(self) -> float:
        return float(np.mean(self.flagged)) if self.flagged.size else 0.0

    @property
    def passed(self) -> bool:
        return self.flag_fraction <= 0.01

    def lines(self) -> list[str]:
        out = []
        for g, a, e, s, fl in zip(self.grid, self.analytic, self.empirical,
                                  self.stderr, self.flagged):
            tag = "FLAG" if fl else "ok"
            out.append(f"{g:.17g},{a:.17g},{e:.17g},{s:.17g},{tag}")
        out.append(f"# flagged {self.n_flagged}/{self.flagged.size} "
                   f"-> {'PASS' if self.passed else 'FAIL'}")
        return out


def compare_to_analytic(analytic: CurveTable, empirical: CurveTable,
                        band_sigma: float = 3.0,
                        bias_allowance: float = 0.0) -> ComparisonReport:
    """Flag points where |analytic - empirical| exceeds
    band_sigma * stderr + bias_allowance; pass iff <= 1% of points flagged."""
    if analytic.grid.shape != empirical.grid.shape or \
            not np.allclose(analytic.grid, empirical.grid, rtol=0, atol=1e-12):
        raise DomainError("compared tables must share an identical grid")
    diff = np.abs(analytic.values - empirical.values)
    band = band_sigma * empirical.err + bias_allowance
    return ComparisonReport(
        grid=analytic.grid.copy(), analytic=analytic.values.copy(),
        empirical=empirical.values.copy(), stderr=empirical.err.copy(),
        flagged=diff > band, band_sigma=band_sigma, bias_allowance=bias_allowance,
    )
