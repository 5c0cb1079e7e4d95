"""Monte Carlo verification of the limit theorems.

The functional limits are checked at finite grids: replicated simulations
give the empirical law of the normalized estimation errors, and the limiting
variances are assembled by quadrature from the cycle oracle's covariance
grid.

At the horizon/intensity profiles the asymptotic regime requires, per-event
thinning is hopeless (mu * sup(h) * T candidates per path).  Instead the
replicates here use the defining property of the arrival process: conditional
on the latent path, window counts are independent Poisson variables with the
integrated intensity as parameter.  The latent path is simulated exactly on a
fine grid and the bin integrals are evaluated by the trapezoid rule, so the
only approximation is quadrature of the integrated intensity, controlled by
the grid refinement, not an approximation of the event law itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .cycles import CycleStatistics
from .estimation import estimate_h, estimate_h_inverse
from .model import ModelParams, ResponseFunction, fractional_part

__all__ = [
    "simulate_window_counts",
    "theorem1_variance",
    "theorem2_variance",
    "corollary_variance",
    "clt_verify_mu",
    "clt_verify_hinv",
    "clt_verify_h",
    "clt_verify_yt",
    "rmse_ratio_check",
    "CltReport",
    "RateReport",
]


@dataclass(frozen=True)
class WindowCounts:
    """Event counts per estimation window from one conditional-Poisson path."""

    params: ModelParams
    u0: float
    counts: np.ndarray  # (bins,)
    y_at_edges: np.ndarray  # exact fractional price at the window boundaries

    @property
    def n_events(self) -> int:
        return int(self.counts.sum())

    @property
    def theta(self) -> np.ndarray:
        n = self.n_events
        if n == 0:
            raise ValueError("no events in path")
        return len(self.counts) * self.counts / n


def simulate_window_counts(
    params: ModelParams,
    h: ResponseFunction,
    substeps: int = 64,
    stream: int = 0,
) -> WindowCounts:
    """Simulate the window counts of one path without per-event thinning.

    The latent motion is sampled exactly on a grid of ``substeps`` points per
    estimation window; counts are Poisson draws with the trapezoid integral
    of the intensity over each window.
    """
    if substeps < 2:
        raise ValueError("substeps must be at least 2")
    rng = np.random.Generator(np.random.Philox(key=[params.seed, stream]))
    T, k = params.horizon, params.bins
    n_steps = k * substeps
    dt = T / n_steps
    u0 = rng.random()
    w = np.empty(n_steps + 1)
    w[0] = 0.0
    np.cumsum(rng.standard_normal(n_steps), out=w[1:])
    w[1:] *= math.sqrt(dt)
    y = fractional_part(params.p0 + u0 + params.sigma * w)
    lam = h(y)
    seg = 0.5 * (lam[1:] + lam[:-1]) * dt
    integrals = params.mu * seg.reshape(k, substeps).sum(axis=1)
    counts = rng.poisson(integrals).astype(np.int64)
    return WindowCounts(
        params=params, u0=u0, counts=counts, y_at_edges=y[::substeps].copy()
    )


# ---------------------------------------------------------------------------
# limit variances assembled from the covariance grid
# ---------------------------------------------------------------------------


def _extended_grid(stats: CycleStatistics, h: ResponseFunction):
    # the centered occupation functional degenerates to 0 at the supremum of
    # the response, so the covariance is extended by an exact zero boundary
    t_ext = np.append(stats.t_grid, h.sup_value)
    m = len(t_ext)
    rho_ext = np.zeros((m, m))
    rho_ext[:-1, :-1] = stats.rho_grid
    return t_ext, rho_ext


def _interp_row(t_ext: np.ndarray, rho_ext: np.ndarray, t: float) -> np.ndarray:
    i = np.clip(np.searchsorted(t_ext, t) - 1, 0, len(t_ext) - 2)
    lam = (t - t_ext[i]) / (t_ext[i + 1] - t_ext[i])
    return (1 - lam) * rho_ext[i] + lam * rho_ext[i + 1]


def rho_value(stats: CycleStatistics, h: ResponseFunction, t1: float, t2: float) -> float:
    t_ext, rho_ext = _extended_grid(stats, h)
    row = _interp_row(t_ext, rho_ext, t1)
    return float(np.interp(t2, t_ext, row))


def rho_row_integral(stats: CycleStatistics, h: ResponseFunction, t: float) -> float:
    t_ext, rho_ext = _extended_grid(stats, h)
    row = _interp_row(t_ext, rho_ext, t)
    return float(np.trapezoid(row, t_ext))


def rho_double_integral(stats: CycleStatistics, h: ResponseFunction) -> float:
    t_ext, rho_ext = _extended_grid(stats, h)
    return float(np.trapezoid(np.trapezoid(rho_ext, t_ext, axis=1), t_ext))


def theorem1_variance(stats: CycleStatistics, h: ResponseFunction, t: float) -> float:
    """Limit variance of the normalized inverse-shape error at one point."""
    if not (0.0 < t < h.sup_value):
        raise ValueError("t must lie strictly inside (0, sup h)")
    hprime = float(h.deriv(h.inverse(t)))
    if hprime <= 0:
        raise ValueError("response derivative must be positive at the target point")
    c = t / hprime
    s2 = stats.sigma**2
    return s2 * (
        rho_value(stats, h, t, t)
        - 2.0 * c * rho_row_integral(stats, h, t)
        + c**2 * rho_double_integral(stats, h)
    )


def theorem2_variance(stats: CycleStatistics, h: ResponseFunction, u: float) -> float:
    """Limit variance of the normalized shape error at one point."""
    if not (0.0 < u < 1.0):
        raise ValueError("u must lie in (0, 1)")
    hprime = float(h.deriv(u))
    if hprime <= 0:
        raise ValueError("response derivative must be positive at the target point")
    s = float(h(u))
    hu = s
    s2 = stats.sigma**2
    return s2 * (
        hprime**2 * rho_value(stats, h, s, s)
        - 2.0 * hprime * hu * rho_row_integral(stats, h, s)
        + hu**2 * rho_double_integral(stats, h)
    )


def corollary_variance(stats: CycleStatistics, h: ResponseFunction, n_grid: int = 801) -> float:
    """Limit variance of the normalized fractional-price error, averaged over
    the uniform law of the true fractional price.
    """
    t_ext, rho_ext = _extended_grid(stats, h)
    diag = np.diag(rho_ext)
    u = np.linspace(0.0, 1.0, n_grid)
    vals = np.interp(h(u), t_ext, diag)
    return stats.sigma**2 * float(np.trapezoid(vals, u))


# ---------------------------------------------------------------------------
# replicated CLT checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CltReport:
    label: str
    n_reps: int
    sample_mean: float
    se_mean: float
    sample_var: float
    limit_var: float
    var_ratio: float
    jb_stat: float
    jb_pvalue: float
    samples: np.ndarray

    @property
    def mean_z_score(self) -> float:
        return self.sample_mean / self.se_mean if self.se_mean > 0 else math.inf


def _make_report(label: str, samples: np.ndarray, limit_var: float) -> CltReport:
    n = len(samples)
    var = float(samples.var(ddof=1))
    jb = sps.jarque_bera(samples)
    return CltReport(
        label=label,
        n_reps=n,
        sample_mean=float(samples.mean()),
        se_mean=float(samples.std(ddof=1) / math.sqrt(n)),
        sample_var=var,
        limit_var=limit_var,
        var_ratio=var / limit_var if limit_var > 0 else math.inf,
        jb_stat=float(jb.statistic),
        jb_pvalue=float(jb.pvalue),
        samples=samples,
    )


def clt_verify_mu(
    params: ModelParams,
    h: ResponseFunction,
    n_reps: int,
    stats: CycleStatistics,
    substeps: int = 64,
) -> CltReport:
    """Empirical law of sqrt(T)(mu_hat/mu - 1) against the cycle-oracle
    variance of the centered response integral.
    """
    T, mu = params.horizon, params.mu
    samples = np.empty(n_reps)
    for r in range(n_reps):
        wc = simulate_window_counts(params, h, substeps=substeps, stream=r)
        samples[r] = math.sqrt(T) * (wc.n_events / (mu * T) - 1.0)
    return _make_report("mu_hat", samples, stats.sigma**2 * stats.var_zh)


def clt_verify_hinv(
    params: ModelParams,
    h: ResponseFunction,
    t_point: float,
    n_reps: int,
    stats: CycleStatistics,
    substeps: int = 64,
) -> CltReport:
    """Empirical law of sqrt(T)(h_inv_hat(t) - h_inv(t)) at one point."""
    if not (0.0 < t_point < h.sup_value):
        raise ValueError("t_point must lie in (0, sup h)")
    T = params.horizon
    target = h.inverse(t_point)
    samples = np.empty(n_reps)
    for r in range(n_reps):
        wc = simulate_window_counts(params, h, substeps=substeps, stream=r)
        samples[r] = math.sqrt(T) * (estimate_h_inverse(wc.theta, t_point) - target)
    return _make_report(
        f"h_inv_hat({t_point})", samples, theorem1_variance(stats, h, t_point)
    )


def clt_verify_h(
    params: ModelParams,
    h: ResponseFunction,
    u_point: float,
    n_reps: int,
    stats: CycleStatistics,
    substeps: int = 64,
) -> CltReport:
    """Empirical law of sqrt(T)(h_hat(u) - h(u)) at one interior point."""
    if not (0.0 < u_point < 1.0):
        raise ValueError("u_point must lie in (0, 1)")
    if float(h.deriv(u_point)) <= 0:
        raise ValueError("flat response: the shape limit theorem needs h' > 0")
    T = params.horizon
    target = float(h(u_point))
    samples = np.empty(n_reps)
    for r in range(n_reps):
        wc = simulate_window_counts(params, h, substeps=substeps, stream=r)
        samples[r] = math.sqrt(T) * (estimate_h(wc.theta, u_point) - target)
    return _make_report(
        f"h_hat({u_point})", samples, theorem2_variance(stats, h, u_point)
    )


def clt_verify_yt(
    params: ModelParams,
    h: ResponseFunction,
    n_reps: int,
    stats: CycleStatistics,
    window_index: int | None = None,
    substeps: int = 64,
) -> CltReport:
    """Empirical law of sqrt(T)(Y_hat - Y) at one window boundary.

    The trailing-window rate estimate at a boundary equals that window's bin
    statistic, so the price estimate is the inverse step function evaluated
    there; the exact fractional price at the boundary comes from the latent
    grid.
    """
    T, k = params.horizon, params.bins
    j = k // 2 if window_index is None else window_index
    if not (1 <= j <= k):
        raise ValueError("window_index must be in 1..bins")
    samples = np.empty(n_reps)
    for r in range(n_reps):
        wc = simulate_window_counts(params, h, substeps=substeps, stream=r)
        theta = wc.theta
        y_hat = estimate_h_inverse(theta, theta[j - 1])
        samples[r] = math.sqrt(T) * (y_hat - wc.y_at_edges[j])
    return _make_report("y_hat", samples, corollary_variance(stats, h))


@dataclass(frozen=True)
class RateReport:
    t_point: float
    horizon_small: float
    horizon_large: float
    rmse_small: float
    rmse_large: float

    @property
    def ratio(self) -> float:
        return self.rmse_small / self.rmse_large


def rmse_ratio_check(
    params_small: ModelParams,
    params_large: ModelParams,
    h: ResponseFunction,
    t_point: float,
    n_reps: int,
    substeps: int = 64,
) -> RateReport:
    """RMSE of the inverse-shape estimate at two horizons.  With the large
    horizon 4x the small one the parametric rate predicts a ratio near 2.
    """
    target = h.inverse(t_point)

    def rmse(params):
        errs = np.empty(n_reps)
        for r in range(n_reps):
            wc = simulate_window_counts(params, h, substeps=substeps, stream=r)
            errs[r] = estimate_h_inverse(wc.theta, t_point) - target
        return float(np.sqrt(np.mean(errs**2)))

    return RateReport(
        t_point=t_point,
        horizon_small=params_small.horizon,
        horizon_large=params_large.horizon,
        rmse_small=rmse(params_small),
        rmse_large=rmse(params_large),
    )
