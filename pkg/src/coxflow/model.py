"""Model core: parameterization, response functions and exact path simulation.

The latent price is a Brownian motion with a uniform fractional offset; limit
orders arrive as a doubly stochastic Poisson process whose intensity is a
deterministic increasing function of the fractional part of the price.
Simulation is by thinning: homogeneous candidates at the dominating rate,
exact Gaussian increments of the latent path at candidate times, acceptance
with probability intensity/bound.  The accepted points have exactly the law
of the target point process (no discretization bias).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ModelParams",
    "ResponseFunction",
    "SimulationRecord",
    "fractional_part",
    "simulate",
    "path_value",
    "ergodic_average",
]

_INTEGRAL_TOL = 1e-9
_SUP_GRID = 10_000


def fractional_part(x):
    """Fractional part x - floor(x), in [0, 1).  Accepts scalars or arrays."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("fractional_part requires finite input")
    out = arr - np.floor(arr)
    # floor(-1e-18) == -1 gives out == 1.0; wrap back into [0, 1)
    out = np.where(out >= 1.0, out - 1.0, out)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Full model parameterization.

    sigma   -- volatility per unit time^1/2 (> 0)
    mu      -- base arrival intensity, events per unit time (> 0)
    horizon -- observation window length T (> 0)
    bins    -- number of estimation bins k (>= 1)
    p0      -- integer price floor in ticks (>= 0); tick size is 1
    seed    -- 64-bit seed; replicate r of an experiment uses stream (seed, r)
    """

    sigma: float
    mu: float
    horizon: float
    bins: int
    p0: int = 0
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not (self.mu > 0):
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not (self.horizon > 0):
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if int(self.bins) != self.bins or self.bins < 1:
            raise ValueError(f"bins must be a positive integer, got {self.bins}")
        if int(self.p0) != self.p0 or self.p0 < 0:
            raise ValueError(f"p0 must be a non-negative integer, got {self.p0}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")


class ResponseFunction:
    """Arrival-intensity shape on [0, 1), normalized to unit integral.

    Carries the function, its derivative, the supremum used as the thinning
    bound, and the generalized inverse.  The built-in kinds are ``linear``
    (2u), ``cubic`` (4u^3), ``constant`` (1) and piecewise-linear ``table``.
    The cubic shape has zero derivative at 0, which breaks the lower
    derivative bound the asymptotic theory assumes; it is accepted with
    ``assumption_warning`` set rather than rejected.
    """

    def __init__(
        self,
        kind: str,
        func: Callable[[np.ndarray], np.ndarray],
        deriv: Callable[[np.ndarray], np.ndarray],
        sup_value: float,
        inverse: Callable[[float], float],
        assumption_warning: bool = False,
        table: tuple | None = None,
    ):
        self.kind = kind
        self._func = func
        self._deriv = deriv
        self.sup_value = float(sup_value)
        self._inverse = inverse
        self.assumption_warning = assumption_warning
        self.table = table
        self._validate()

    def _validate(self):
        integral, _ = quad(lambda u: float(self._func(np.asarray(u))), 0.0, 1.0, limit=200)
        if abs(integral - 1.0) > _INTEGRAL_TOL:
            raise ValueError(
                f"response function must integrate to 1 on [0,1); got {integral!r}"
            )
        grid = np.linspace(0.0, 1.0, _SUP_GRID, endpoint=False)
        vals = self(grid)
        if np.any(vals < 0):
            raise ValueError("response function must be non-negative")
        if np.any(vals > self.sup_value + 1e-12):
            raise ValueError("sup_value is not an upper bound for the response function")

    def __call__(self, u):
        return self._func(np.asarray(u, dtype=float))

    def deriv(self, u):
        return self._deriv(np.asarray(u, dtype=float))

    def inverse(self, t):
        """Generalized inverse: Lebesgue measure of {u in [0,1): h(u) <= t}."""
        return self._inverse(float(t))

    @classmethod
    def linear(cls) -> "ResponseFunction":
        return cls(
            kind="linear",
            func=lambda u: 2.0 * u,
            deriv=lambda u: np.full_like(u, 2.0),
            sup_value=2.0,
            inverse=lambda t: min(max(t / 2.0, 0.0), 1.0),
        )

    @classmethod
    def cubic(cls) -> "ResponseFunction":
        return cls(
            kind="cubic",
            func=lambda u: 4.0 * u**3,
            deriv=lambda u: 12.0 * u**2,
            sup_value=4.0,
            inverse=lambda t: min(max((t / 4.0) ** (1.0 / 3.0), 0.0), 1.0) if t > 0 else 0.0,
            assumption_warning=True,
        )

    @classmethod
    def constant(cls) -> "ResponseFunction":
        # flat shape: orders arrive as a plain Poisson process; the derivative
        # bound of the asymptotic theory fails, flagged not rejected
        return cls(
            kind="constant",
            func=lambda u: np.ones_like(u),
            deriv=lambda u: np.zeros_like(u),
            sup_value=1.0,
            inverse=lambda t: 0.0 if t < 1.0 else 1.0,
            assumption_warning=True,
        )

    @classmethod
    def from_table(cls, knots, values) -> "ResponseFunction":
        """Piecewise-linear shape through (knots, values); values are rescaled
        so the integral over [0,1) is exactly one.  Knots must start at 0,
        end at 1 and increase; values must be non-negative and non-decreasing.
        """
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or len(knots) < 2:
            raise ValueError("table needs matching 1-d knots/values with >= 2 points")
        if knots[0] != 0.0 or knots[-1] != 1.0 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must increase from 0 to 1")
        if np.any(values < 0):
            raise ValueError("table values must be non-negative")
        if np.any(np.diff(values) < 0):
            raise ValueError("table values must be non-decreasing")
        integral = float(np.trapezoid(values, knots))
        if integral <= 0:
            raise ValueError("table integrates to zero")
        values = values / integral
        slopes = np.diff(values) / np.diff(knots)

        def func(u):
            return np.interp(u, knots, values)

        def deriv(u):
            idx = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, len(slopes) - 1)
            return slopes[idx]

        def inverse(t):
            if t <= values[0]:
                return 0.0
            if t >= values[-1]:
                return 1.0
            return float(np.interp(t, values, knots))

        # grid supremum inflated by 1%: a slack thinning bound only costs
        # rejected candidates, never correctness
        grid = np.linspace(0.0, 1.0, _SUP_GRID)
        sup_value = 1.01 * float(np.max(np.interp(grid, knots, values)))
        warning = bool(np.min(slopes) <= 0)
        return cls(
            "table", func, deriv, sup_value, inverse,
            assumption_warning=warning, table=(knots.copy(), values.copy()),
        )

    def spec(self) -> tuple:
        """Picklable description sufficient to rebuild the function in a
        worker process (the callables themselves are closures).
        """
        return (self.kind, self.table)

    @classmethod
    def from_spec(cls, spec: tuple) -> "ResponseFunction":
        kind, table = spec
        if kind == "table":
            return cls.from_table(*table)
        return cls.from_kind(kind)

    @classmethod
    def from_kind(cls, kind: str, table_path=None) -> "ResponseFunction":
        if kind == "linear":
            return cls.linear()
        if kind == "cubic":
            return cls.cubic()
        if kind == "constant":
            return cls.constant()
        if kind == "table":
            if table_path is None:
                raise ValueError("table response needs a table file")
            data = np.loadtxt(table_path, delimiter=",", skiprows=1, ndmin=2)
            return cls.from_table(data[:, 0], data[:, 1])
        raise ValueError(f"unknown response kind {kind!r}")


@dataclass(frozen=True)
class SimulationRecord:
    """One simulated path: exact skeleton of the latent Brownian motion at the
    candidate times, the fractional-price values, the accepted arrival times
    and the integer bid levels at those times.  Immutable after construction.
    """

    params: ModelParams
    response_kind: str
    u0: float
    skeleton_times: np.ndarray
    w_values: np.ndarray
    y_values: np.ndarray
    event_times: np.ndarray
    event_index: np.ndarray  # positions of the events inside the skeleton
    bid_levels: np.ndarray

    def __post_init__(self):
        for name in ("skeleton_times", "w_values", "y_values", "event_times", "bid_levels"):
            getattr(self, name).setflags(write=False)
        self.event_index.setflags(write=False)

    @property
    def n_events(self) -> int:
        return len(self.event_times)


def simulate(params: ModelParams, h: ResponseFunction, stream: int = 0) -> SimulationRecord:
    """Exact thinning simulation of one path over [0, horizon].

    Homogeneous Poisson candidates at rate mu * sup(h); the latent Brownian
    motion is extended by an exact Gaussian increment to each candidate time
    and the candidate is accepted with probability h(Y)/sup(h).  The skeleton
    always contains 0 and the horizon.  Draw order is fixed (u0, candidate
    count, candidate times, increments, acceptance uniforms) so a given
    (params, h, stream) always yields a bit-identical record.
    """
    rng = np.random.Generator(np.random.Philox(key=[params.seed, stream]))
    T = params.horizon
    u0 = rng.random()
    bound = params.mu * h.sup_value
    n_cand = int(rng.poisson(bound * T))
    cand_times = np.sort(rng.random(n_cand)) * T

    skeleton = np.concatenate(([0.0], cand_times, [T]))
    dt = np.diff(skeleton)
    increments = rng.standard_normal(len(dt)) * np.sqrt(dt)
    w = np.concatenate(([0.0], np.cumsum(increments)))
    p = params.p0 + u0 + params.sigma * w
    y = fractional_part(p)

    y_cand = y[1 : 1 + n_cand]
    accept = rng.random(n_cand) < h(y_cand) / h.sup_value
    event_index = np.flatnonzero(accept) + 1
    event_times = skeleton[event_index]
    bid_levels = np.floor(p[event_index]).astype(np.int64)

    return SimulationRecord(
        params=params,
        response_kind=h.kind,
        u0=u0,
        skeleton_times=skeleton,
        w_values=w,
        y_values=y,
        event_times=event_times,
        event_index=event_index,
        bid_levels=bid_levels,
    )


def path_value(record: SimulationRecord, t: float) -> tuple[float, float]:
    """Stored exact (W, Y) at a skeleton time.  The path is only exact at the
    sampled points, so any other t is a lookup error, never an interpolation.
    """
    times = record.skeleton_times
    i = np.searchsorted(times, t)
    if i >= len(times) or times[i] != t:
        raise KeyError(f"t={t!r} is not a skeleton time")
    return float(record.w_values[i]), float(record.y_values[i])


def ergodic_average(record: SimulationRecord, f: Callable) -> float:
    """Trapezoid approximation of the time average (1/T) int_0^T f(Y_s) ds
    over the skeleton.  Skeleton spacing is ~1/(mu*sup h), so the quadrature
    error is negligible against the 1/sqrt(T) statistical fluctuation.
    """
    if len(record.skeleton_times) < 2:
        raise ValueError("record has an empty skeleton")
    vals = np.asarray(f(record.y_values), dtype=float)
    if vals.shape != record.y_values.shape:
        vals = np.broadcast_to(vals, record.y_values.shape)
    T = record.skeleton_times[-1]
    return float(np.trapezoid(vals, record.skeleton_times) / T)
