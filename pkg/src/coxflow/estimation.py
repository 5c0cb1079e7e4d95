"""Estimators built from the observed event stream alone.

Everything here uses only arrival times over a known window: the base rate is
events/horizon, the shape estimate comes from ranked normalized bin counts,
and its generalized inverse turns a windowed local rate back into a
fractional-price estimate.  None of these functions touch the latent path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ModelParams

__all__ = [
    "EventStream",
    "EstimationResult",
    "RegimeReport",
    "estimate_mu",
    "bin_counts",
    "estimate_h",
    "estimate_h_inverse",
    "estimate_hyt",
    "estimate_yt",
    "estimate",
    "check_regime",
]


@dataclass(frozen=True)
class EventStream:
    """Observed arrival times on (0, horizon], strictly increasing.

    bid_levels are optional and only needed to turn the fractional-price
    estimate back into an absolute price at an event time.
    """

    event_times: np.ndarray
    horizon: float
    bid_levels: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.event_times, dtype=float)
        object.__setattr__(self, "event_times", t)
        if not (self.horizon > 0):
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if len(t) and (t[0] <= 0 or t[-1] > self.horizon):
            raise ValueError("event times must lie in (0, horizon]")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("event times must be strictly increasing")
        if self.bid_levels is not None:
            b = np.asarray(self.bid_levels, dtype=np.int64)
            if b.shape != t.shape:
                raise ValueError("bid_levels must match event_times")
            object.__setattr__(self, "bid_levels", b)
        t.setflags(write=False)

    @classmethod
    def from_record(cls, record) -> "EventStream":
        return cls(
            event_times=record.event_times.copy(),
            horizon=record.params.horizon,
            bid_levels=record.bid_levels.copy(),
        )

    @property
    def n_events(self) -> int:
        return len(self.event_times)


def estimate_mu(stream: EventStream) -> float:
    """Base-rate estimate: number of events divided by the horizon."""
    return stream.n_events / stream.horizon


def _window_counts(times: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # counts on half-open windows (edges[i], edges[i+1]]; an event lands in
    # exactly one window
    pos = np.searchsorted(times, edges, side="right")
    return np.diff(pos).astype(float)


def bin_counts(stream: EventStream, bins: int) -> np.ndarray:
    """Normalized bin statistics: bins * count_j / total over the half-open
    windows ((j-1)T/k, jT/k].  Their mean is exactly 1.
    """
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be a positive integer, got {bins}")
    n = stream.n_events
    if n == 0:
        raise ValueError("cannot normalize bin counts for a stream with no events")
    edges = np.linspace(0.0, stream.horizon, bins + 1)
    counts = _window_counts(stream.event_times, edges)
    return bins * counts / n


def estimate_h(theta: np.ndarray, u: float) -> float:
    """Shape estimate at u: the (floor(u*k)+1)-th order statistic of theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        raise ValueError("theta is empty")
    if not (0.0 <= u < 1.0):
        raise ValueError(f"u must be in [0, 1), got {u}")
    k = len(theta)
    return float(np.sort(theta, kind="stable")[int(u * k)])


def estimate_h_inverse(theta: np.ndarray, t: float) -> float:
    """Generalized-inverse estimate at t: fraction of theta values <= t."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        raise ValueError("theta is empty")
    return float(np.count_nonzero(theta <= t)) / len(theta)


def estimate_hyt(stream: EventStream, t: float, bins: int) -> float:
    """Windowed local-rate estimate at time t: the normalized count over the
    trailing window (t - T/k, t].  A full window must fit inside [0, T].
    """
    T = stream.horizon
    width = T / bins
    if t < width - 1e-12 * T:
        raise ValueError(f"window underflow: t={t} < T/k={width}")
    if t > T:
        raise ValueError(f"t={t} beyond horizon {T}")
    n = stream.n_events
    if n == 0:
        raise ValueError("cannot normalize: stream has no events")
    times = stream.event_times
    count = np.searchsorted(times, t, side="right") - np.searchsorted(
        times, t - width, side="right"
    )
    return bins * count / n


@dataclass(frozen=True)
class EstimationResult:
    """Estimates from one stream: base rate, bin statistics, and the two step
    functions (shape and its generalized inverse).
    """

    mu_hat: float
    theta: np.ndarray
    theta_sorted: np.ndarray

    @classmethod
    def from_theta(cls, mu_hat: float, theta: np.ndarray) -> "EstimationResult":
        theta = np.asarray(theta, dtype=float)
        return cls(
            mu_hat=mu_hat,
            theta=theta,
            theta_sorted=np.sort(theta, kind="stable"),
        )

    @property
    def bins(self) -> int:
        return len(self.theta)

    def h_hat(self, u):
        """Step shape estimate, piecewise constant on [j/k, (j+1)/k)."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u >= 1):
            raise ValueError("u must be in [0, 1)")
        idx = (u * self.bins).astype(int)
        out = self.theta_sorted[idx]
        return float(out) if out.ndim == 0 else out

    def h_inv_hat(self, t):
        """Step inverse estimate, fraction of bin statistics <= t; defined for
        every t >= 0 and saturating at 1 beyond the largest statistic.
        """
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self.theta_sorted, t, side="right") / self.bins
        return float(out) if out.ndim == 0 else out


def estimate(stream: EventStream, bins: int) -> EstimationResult:
    """Run the full estimation pipeline on one stream."""
    mu_hat = estimate_mu(stream)
    theta = bin_counts(stream, bins)
    return EstimationResult.from_theta(mu_hat, theta)


def estimate_yt(result: EstimationResult, stream: EventStream, t: float) -> float:
    """Fractional-price estimate at t: the inverse step function applied to
    the windowed local-rate estimate.  With a bid level available at an event
    time, bid + estimate is the absolute price estimate.
    """
    local_rate = estimate_hyt(stream, t, result.bins)
    return float(result.h_inv_hat(local_rate))


@dataclass(frozen=True)
class RegimeReport:
    """Finite-sample values of the three asymptotic-regime ratios, evaluated
    at the reference exponents (both equal to 1).  Purely advisory: a ratio
    above 1 means that scaling condition is not yet visibly in force.
    """

    ratio_mu: float  # T^{5/2+eps} / mu at eps=1
    ratio_bins: float  # T^{p+1/2} / k^{p/2} at p=1
    ratio_bins_mu: float  # k sqrt(T) / mu

    @property
    def flags(self) -> dict:
        return {
            "mu_growth": self.ratio_mu > 1.0,
            "bin_growth": self.ratio_bins > 1.0,
            "bins_vs_mu": self.ratio_bins_mu > 1.0,
        }

    @property
    def ok(self) -> bool:
        return not any(self.flags.values())


def check_regime(params: ModelParams) -> RegimeReport:
    T, mu, k = params.horizon, params.mu, params.bins
    return RegimeReport(
        ratio_mu=T**3.5 / mu,
        ratio_bins=T**1.5 / np.sqrt(k),
        ratio_bins_mu=k * np.sqrt(T) / mu,
    )
