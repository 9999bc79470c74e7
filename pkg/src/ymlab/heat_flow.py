"""Yang-Mills heat flow A' = -d_A^* B on the lattice, its action, and gauge maps."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import lie_algebra as la
from .covariant_calculus import cov_d_star, curvature
from .errors import ConfigurationError, DivergenceError, InconsistentState, IntegratorFailure, InvalidInput
from .lattice_forms import COMPONENTS, FormField, Grid, l2_norm, lp_norm
from .quadrature import TimeGrid, cumulative_power_trapezoid

log = logging.getLogger(__name__)

MONOTONE_RTOL = 1e-10


def stability_bound(grid: Grid) -> float:
    """Explicit-step bound h^2/6 for the parabolic lattice operators."""
    return grid.h**2 / 6.0


def stable_dt(grid: Grid, safety: float = 0.5) -> float:
    return safety * stability_bound(grid)


def ym_velocity(A: FormField, B: Optional[FormField] = None) -> FormField:
    """A' = -d_A^* B."""
    if B is None:
        B = curvature(A)
    return -cov_d_star(A, B)


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y.axpy(0.5 * dt, k1))
    k3 = f(y.axpy(0.5 * dt, k2))
    k4 = f(y.axpy(dt, k3))
    return y.like(y.data + (dt / 6.0) * (k1.data + 2 * k2.data + 2 * k3.data + k4.data))


def ym_step(A: FormField, dt: float, step_index: Optional[int] = None) -> FormField:
    """One classical RK4 step of the heat flow."""
    if dt <= 0 or dt > stability_bound(A.grid) * (1 + 1e-12):
        raise ConfigurationError(
            f"dt = {dt:.3e} outside the explicit stability bound h^2/6 = {stability_bound(A.grid):.3e}"
        )
    out = rk4_step(ym_velocity, A, dt)
    if not out.is_finite():
        raise DivergenceError(f"non-finite connection after step {step_index}", step_index)
    return out


def _hermite(t0, t1, y0, y1, v0, v1, t):
    d = t1 - t0
    s = (t - t0) / d
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return y0.like(h00 * y0.data + h10 * d * v0.data + h01 * y1.data + h11 * d * v1.data)


def _hermite_deriv(t0, t1, y0, y1, v0, v1, t):
    d = t1 - t0
    s = (t - t0) / d
    dh00 = (6 * s**2 - 6 * s) / d
    dh10 = 3 * s**2 - 4 * s + 1
    dh01 = (-6 * s**2 + 6 * s) / d
    dh11 = 3 * s**2 - 2 * s
    return y0.like(dh00 * y0.data + dh10 * v0.data + dh01 * y1.data + dh11 * v1.data)


@dataclass
class FlowTrajectory:
    """Connections at the nodes ``grid.times`` with cached curvatures and velocities.

    Between nodes A(t) is the cubic Hermite interpolant through the node values
    and velocities, which keeps intermediate RK stages fourth-order accurate.
    """

    grid: TimeGrid
    fields: List[FormField]
    curvatures: List[FormField] = field(repr=False)
    velocities: List[FormField] = field(repr=False)
    quadrature: str = "PowerWeightedTrapezoid"

    def __post_init__(self):
        n = len(self.grid.times)
        if not (len(self.fields) == len(self.curvatures) == len(self.velocities) == n):
            raise InconsistentState("trajectory needs one field, curvature and velocity per node")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return len(self.fields)

    def _interval(self, t):
        times = self.times
        if t < -1e-14 or t > times[-1] * (1 + 1e-12):
            raise InvalidInput(f"time {t} outside the trajectory span [0, {times[-1]}]")
        i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        return i

    def node_index(self, t) -> int:
        return self.grid.index_of(t)

    def at(self, t: float) -> FormField:
        i = self._interval(t)
        t0, t1 = self.times[i], self.times[i + 1]
        if t == t0:
            return self.fields[i]
        if t == t1:
            return self.fields[i + 1]
        return _hermite(t0, t1, self.fields[i], self.fields[i + 1], self.velocities[i], self.velocities[i + 1], t)

    def velocity_at(self, t: float) -> FormField:
        i = self._interval(t)
        t0, t1 = self.times[i], self.times[i + 1]
        if t == t0:
            return self.velocities[i]
        if t == t1:
            return self.velocities[i + 1]
        return _hermite_deriv(
            t0, t1, self.fields[i], self.fields[i + 1], self.velocities[i], self.velocities[i + 1], t
        )

    def connection_and_curvature(self, t: float):
        i = self._interval(t)
        if t == self.times[i]:
            return self.fields[i], self.curvatures[i]
        if t == self.times[i + 1]:
            return self.fields[i + 1], self.curvatures[i + 1]
        A = self.at(t)
        return A, curvature(A)

    def check_cache(self, tol: float = 1e-12) -> float:
        """Largest relative deviation of a cached curvature from a fresh computation."""
        worst = 0.0
        for A, B in zip(self.fields, self.curvatures):
            ref = curvature(A)
            scale = max(l2_norm(ref), 1e-300)
            worst = max(worst, l2_norm(ref - B) / scale if l2_norm(ref) > 0 else l2_norm(B))
        if worst > tol:
            raise InconsistentState(f"cached curvature deviates by {worst:.2e}")
        return worst

    def energy(self) -> np.ndarray:
        """||B(t_n)||_2 at every node."""
        return np.array([l2_norm(B) for B in self.curvatures])


def ym_flow(
    A0: FormField,
    tg: TimeGrid,
    cfl_safety: float = 0.5,
    check_monotone: bool = True,
    callback: Optional[Callable] = None,
) -> FlowTrajectory:
    """Integrate the heat flow over the node grid, substepping each interval at the CFL bound."""
    A0.validate()
    if A0.degree != 1:
        raise InvalidInput("initial connection must be a 1-form")
    dt_max = stable_dt(A0.grid, cfl_safety)
    times = tg.times
    A = A0
    B = curvature(A)
    fields, curvs, vels = [A], [B], [ym_velocity(A, B)]
    step = 0
    for n in range(1, len(times)):
        span = times[n] - times[n - 1]
        m = max(1, int(np.ceil(span / dt_max - 1e-9)))
        dt = span / m
        for _ in range(m):
            A = ym_step(A, dt, step)
            step += 1
        Bn = curvature(A)
        if check_monotone:
            e0, e1 = l2_norm(curvs[-1]), l2_norm(Bn)
            if e1 > e0 + MONOTONE_RTOL * e0:
                raise IntegratorFailure(
                    f"||B|| increased from {e0:.12e} to {e1:.12e} at node {n}; reduce dt", n
                )
        fields.append(A)
        curvs.append(Bn)
        vels.append(ym_velocity(A, Bn))
        if callback is not None:
            callback(n, times[n], A, Bn)
    return FlowTrajectory(tg, fields, curvs, vels)


def action_rho_series(traj: FlowTrajectory, a: float) -> np.ndarray:
    """rho_A(t_n) = (1/2) int_0^{t_n} s^-a ||B(s)||_2^2 ds at every node."""
    if not 0.5 <= a < 1.0:
        raise InvalidInput(f"action exponent a must lie in [1/2, 1), got {a}")
    return 0.5 * cumulative_power_trapezoid(traj.times, traj.energy() ** 2, a)


def action_rho(traj: FlowTrajectory, a: float = 0.5) -> float:
    if len(traj) == 0:
        raise InvalidInput("empty trajectory")
    return float(action_rho_series(traj, a)[-1])


def initial_behavior_series(traj: FlowTrajectory, a: float) -> np.ndarray:
    """Running sup_{s <= t} s^(1-a) ||B(s)||_2^2 over the nodes."""
    t = traj.times
    return np.maximum.accumulate(t ** (1 - a) * traj.energy() ** 2)


def time_series_rows(traj: FlowTrajectory, a: float):
    """Rows (t, |B|_2, |B|_3, |B|_6, |B|_inf, rho, |A'|_2, t^(1-a) |B|_2^2)."""
    rho = action_rho_series(traj, a)
    rows = []
    for n, t in enumerate(traj.times):
        B = traj.curvatures[n]
        b2 = l2_norm(B)
        rows.append(
            (
                float(t),
                b2,
                lp_norm(B, 3),
                lp_norm(B, 6),
                lp_norm(B, np.inf),
                float(rho[n]),
                l2_norm(traj.velocities[n]),
                float(t ** (1 - a) * b2**2),
            )
        )
    return rows


TIME_SERIES_COLUMNS = ("t", "B_L2", "B_L3", "B_L6", "B_Linf", "rho_A", "Aprime_L2", "weighted_B_L2sq")


# -- gauge transformations -------------------------------------------------------


@dataclass(frozen=True)
class GaugeFunction:
    """g(x) = exp(X(x)) for a smooth algebra-valued generator X.

    ``generator(X, Y, Z)`` returns coefficients of shape (dim, ...).  Keeping the
    generator (rather than samples) lets g be evaluated exactly at every
    staggered location.
    """

    group: la.GroupSpec
    generator: Callable

    def at(self, grid: Grid, offset=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Group elements at sites shifted by ``offset`` (in units of h), shape (n,n,n,N,N)."""
        X, Y, Z = grid.coords(())
        h = grid.h
        coeffs = self.generator(X + offset[0] * h, Y + offset[1] * h, Z + offset[2] * h)
        coeffs = np.broadcast_to(coeffs, (self.group.dim,) + grid.shape)
        return la.exp_coeffs(coeffs, self.group)

    def at_component(self, grid: Grid, K) -> np.ndarray:
        return self.at(grid, tuple(0.5 if d in K else 0.0 for d in range(3)))

    def inverse(self) -> "GaugeFunction":
        gen = self.generator
        return GaugeFunction(self.group, lambda X, Y, Z: -np.asarray(gen(X, Y, Z)))


def _link_log(gauge: GaugeFunction, grid: Grid, j: int) -> np.ndarray:
    """log(g(x)^{-1} g(x + h e_j)) / h, a second-order sample of g^{-1} d_j g at the edge."""
    g0 = gauge.at(grid)
    off = [0.0, 0.0, 0.0]
    off[j] = 1.0
    g1 = gauge.at(grid, off)
    link = np.conj(np.swapaxes(g0, -1, -2)) @ g1
    return la.log_coeffs(link, gauge.group) / grid.h


def pure_gauge(gauge: GaugeFunction, grid: Grid) -> FormField:
    """Lattice version of g^{-1} dg built from the group logarithm of link products."""
    A = FormField(1, grid, gauge.group)
    for j in range(3):
        A.data[j] = _link_log(gauge, grid, j)
    return A


def transform_form(f: FormField, gauge: GaugeFunction) -> FormField:
    """f -> g^{-1} f g with g evaluated at each component's location."""
    if f.group.abelian:
        return f.copy()
    out = f.zeros_like()
    for c, K in enumerate(COMPONENTS[f.degree]):
        out.data[c] = la.adjoint_inverse(gauge.at_component(f.grid, K), np.moveaxis(f.data[c], 0, 0), f.group)
    return out


def gauge_transform(A: FormField, gauge: GaugeFunction) -> FormField:
    """A^g = g^{-1} A g + g^{-1} dg."""
    out = transform_form(A, gauge)
    out.data += pure_gauge(gauge, A.grid).data
    return out
