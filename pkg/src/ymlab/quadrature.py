"""Time grids clustered at t = 0 and product-integration rules for s^(-a) weights."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput


@dataclass(frozen=True)
class TimeGrid:
    """Positive nodes ``t_1 < ... < t_N = T``; the initial time 0 is implicit.

    ``times`` prepends 0 so trajectories and states can be indexed uniformly.
    """

    T: float
    nodes: np.ndarray = field(repr=False)
    gamma: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise InvalidInput("time grid needs at least one node")
        if nodes[0] <= 0:
            raise InvalidInput("first time node must be positive")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidInput("time nodes must be strictly increasing")
        if not np.isclose(nodes[-1], self.T, rtol=0, atol=1e-12 * max(1.0, self.T)):
            raise InvalidInput("last time node must equal T")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def geometric(cls, T: float, N: int, gamma: float = 2.0, extra=()) -> "TimeGrid":
        """t_n = T (n/N)^gamma, n = 1..N, merged with any ``extra`` nodes in (0, T]."""
        if T <= 0 or N < 1:
            raise InvalidInput("need T > 0 and N >= 1")
        nodes = T * (np.arange(1, N + 1) / N) ** gamma
        return cls(T, _merge(nodes, extra, T), gamma)

    @classmethod
    def uniform(cls, T: float, N: int, extra=()) -> "TimeGrid":
        return cls.geometric(T, N, 1.0, extra)

    @classmethod
    def for_cfl(cls, T: float, dt_max: float, gamma: float = 2.0, extra=()) -> "TimeGrid":
        """Smallest geometric grid whose widest interval is at most ``dt_max``."""
        N = 1
        while True:
            tg = cls.geometric(T, N, gamma, extra)
            if np.max(np.diff(tg.times)) <= dt_max * (1 + 1e-12):
                return tg
            N = max(N + 1, int(N * 1.2))

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([[0.0], self.nodes])

    def index_of(self, t: float) -> int:
        """Index into ``times`` of a grid time; raises if t is not (close to) a node."""
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > 1e-12 * max(1.0, self.T):
            raise InvalidInput(f"time {t} is not a node of the grid")
        return i


def _merge(nodes, extra, T):
    extra = [float(x) for x in extra if 0 < float(x) <= T]
    allnodes = np.concatenate([nodes, extra])
    allnodes = np.unique(np.round(allnodes, 15))
    # drop near-duplicates introduced by rounding
    keep = np.concatenate([[True], np.diff(allnodes) > 1e-12 * max(1.0, T)])
    return allnodes[keep]


def power_weights(t0: float, t1: float, a: float):
    """Weights (w0, w1) with int_{t0}^{t1} s^-a f ds = w0 f(t0) + w1 f(t1) for affine f."""
    dt = t1 - t0
    if a == 1.0:
        m0 = np.log(t1 / t0)
    else:
        m0 = (t1 ** (1 - a) - t0 ** (1 - a)) / (1 - a)
    m1 = (t1 ** (2 - a) - t0 ** (2 - a)) / (2 - a)
    # f(s) = f0 (t1 - s)/dt + f1 (s - t0)/dt
    w0 = (t1 * m0 - m1) / dt
    w1 = (m1 - t0 * m0) / dt
    return w0, w1


def cumulative_power_trapezoid(times, values, a: float) -> np.ndarray:
    """Running int_0^{t_n} s^-a f(s) ds, exact for piecewise affine f (a < 1 if times[0] == 0)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for n in range(1, len(times)):
        w0, w1 = power_weights(times[n - 1], times[n], a)
        out[n] = out[n - 1] + w0 * values[n - 1] + w1 * values[n]
    return out


def power_trapezoid(times, values, a: float) -> float:
    return float(cumulative_power_trapezoid(times, values, a)[-1])
