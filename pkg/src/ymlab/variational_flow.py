"""Linearised flow: augmented equation, vertical correction, and cross-check solvers.

The augmented equation

    -w' = (d_A^* d_A + d_A d_A^*) w + [w _| B]

is strictly parabolic.  Adding the vertical correction d_{A(t)} int psi ds,
psi = d_A^* w, turns its solution into a solution of the weakly parabolic
variational equation -v' = d_A^* d_A v + [v _| B].  ``solve_direct`` integrates
the latter directly and exists only as an oracle for ``recover_v``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .covariant_calculus import (
    bochner_laplacian,
    cov_d,
    cov_d_star,
    covariant_gradient_sq,
    covariant_partial,
    curvature,
    hodge_laplacian,
    interior_comm,
    wedge_comm,
)
from .errors import (
    DivergenceError,
    HorizonTooLong,
    InconsistentState,
    InvalidInput,
    NumericError,
)
from .heat_flow import FlowTrajectory, stable_dt, ym_flow
from .lattice_forms import FormField, avg_bwd, avg_fwd, inner, l2_norm, lp_norm
from . import lie_algebra as la
from .quadrature import TimeGrid, cumulative_power_trapezoid

log = logging.getLogger(__name__)


@dataclass
class VariationalState:
    w: FormField
    t: float
    psi: FormField
    eta_accumulator: FormField
    wprime: Optional[FormField] = field(default=None, repr=False)


@dataclass(frozen=True)
class RecoveryConfig:
    tau: float = 0.0
    b: float = 0.5
    mode: Optional[str] = None

    def __post_init__(self):
        if self.tau < 0:
            raise InvalidInput("tau must be non-negative")
        if not 0.5 <= self.b < 1.0:
            raise InvalidInput(f"b must lie in [1/2, 1), got {self.b}")
        expected = "AlmostStrong" if self.tau == 0 else "Strong"
        if self.mode is None:
            object.__setattr__(self, "mode", expected)
        elif self.mode != expected:
            raise InvalidInput(f"mode {self.mode!r} inconsistent with tau = {self.tau}")


# -- right-hand sides -------------------------------------------------------------


def _check_curvature(A, B, tol=1e-12):
    ref = curvature(A)
    scale = max(l2_norm(ref), 1.0)
    if l2_norm(ref - B) > tol * scale:
        raise InconsistentState("B is not the curvature of A")


def augmented_rhs(w, A, B, *, form: str = "bochner", check: bool = True) -> FormField:
    """w' for the augmented equation.

    ``form="bochner"`` evaluates Delta_A w - 2 [w _| B]; ``form="hodge"`` evaluates
    -((d_A^* d_A + d_A d_A^*) w + [w _| B]) directly.  The two agree up to the
    lattice Weitzenboeck defect, O(h^2).  Time integration uses the Hodge form
    because the energy identities then hold exactly in space.
    """
    if check:
        _check_curvature(A, B)
    if form == "bochner":
        return bochner_laplacian(A, w) - 2.0 * interior_comm(w, B)
    if form == "hodge":
        return hodge_laplacian(A, w) - interior_comm(w, B)
    raise InvalidInput(f"unknown form {form!r}")


def variational_rhs(v, A, B) -> FormField:
    """v' = -(d_A^* d_A v + [v _| B])."""
    return -(cov_d_star(A, cov_d(A, v)) + interior_comm(v, B))


class _PathCache:
    """Memoises A(t), B(t) at the handful of stage times an RK step touches."""

    def __init__(self, traj: FlowTrajectory):
        self.traj = traj
        self._cache = {}

    def __call__(self, t):
        key = float(t)
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) > 8:
                self._cache.clear()
            hit = self.traj.connection_and_curvature(key)
            self._cache[key] = hit
        return hit


def _step(rhs, y, t, dt, index):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y.axpy(0.5 * dt, k1))
    k3 = rhs(t + 0.5 * dt, y.axpy(0.5 * dt, k2))
    k4 = rhs(t + dt, y.axpy(dt, k3))
    out = y.like(y.data + (dt / 6.0) * (k1.data + 2 * k2.data + 2 * k3.data + k4.data))
    if not out.is_finite():
        raise DivergenceError(f"non-finite state at node {index}", index)
    return out


def _substeps(span, dt_max):
    return max(1, int(np.ceil(span / dt_max - 1e-9)))


# -- augmented solve and recovery ----------------------------------------------------


def solve_augmented(
    w0: FormField,
    traj: FlowTrajectory,
    *,
    cfl_safety: float = 0.5,
    form: str = "hodge",
    substep_factor: int = 1,
) -> List[VariationalState]:
    """RK4 in time along the trajectory; substeps never cross trajectory nodes."""
    w0.validate()
    if w0.degree != 1:
        raise InvalidInput("w0 must be a 1-form")
    path = _PathCache(traj)

    def rhs(t, w):
        A, B = path(t)
        return augmented_rhs(w, A, B, form=form, check=False)

    dt_max = stable_dt(w0.grid, cfl_safety)
    times = traj.times
    w = w0
    states = []
    eta = FormField(0, w0.grid, w0.group)
    for n, t in enumerate(times):
        if n > 0:
            span = t - times[n - 1]
            m = _substeps(span, dt_max) * substep_factor
            dt = span / m
            for k in range(m):
                w = _step(rhs, w, times[n - 1] + k * dt, dt, n)
        A, B = traj.fields[n], traj.curvatures[n]
        psi = cov_d_star(A, w)
        if n >= 2:
            eta = eta.axpy(0.5 * (t - times[n - 1]), states[-1].psi + psi)
        states.append(VariationalState(w, float(t), psi, eta, augmented_rhs(w, A, B, form=form, check=False)))
    return states


def sliver_integral(states: Sequence[VariationalState], b: float) -> FormField:
    """Estimate of int_0^{eps0} psi ds assuming psi ~ s^((b-1)/2) near 0."""
    first = states[1]
    return first.psi * (first.t * 2.0 / (b + 1.0))


def eta_from_zero(states, b) -> List[FormField]:
    """int_0^{t_n} psi ds at every node: sliver plus the trapezoid accumulator."""
    sl = sliver_integral(states, b)
    out = [states[0].psi.zeros_like()]
    out += [sl + s.eta_accumulator for s in states[1:]]
    return out


def recover_v(states: Sequence[VariationalState], traj: FlowTrajectory, cfg: RecoveryConfig) -> List[FormField]:
    """v_tau(t_n) = w(t_n) + d_{A(t_n)} int_tau^{t_n} psi ds (tau = 0 gives v itself)."""
    if len(states) != len(traj):
        raise InvalidInput("states and trajectory have different node counts")
    eta = eta_from_zero(states, cfg.b)
    if cfg.tau == 0:
        base = eta[0]
    else:
        base = eta[traj.grid.index_of(cfg.tau)]
    return [s.w + cov_d(A, e - base) for s, A, e in zip(states, traj.fields, eta)]


def alpha_tau(states, traj, cfg: RecoveryConfig) -> FormField:
    """alpha_tau = int_0^tau psi ds with the same quadrature as ``recover_v``."""
    eta = eta_from_zero(states, cfg.b)
    return eta[traj.grid.index_of(cfg.tau)] if cfg.tau > 0 else eta[0]


def vertical_solution(alpha: FormField, traj: FlowTrajectory) -> List[FormField]:
    if alpha.degree != 0:
        raise InvalidInput("vertical solutions are generated by 0-forms")
    return [cov_d(A, alpha) for A in traj.fields]


def vertical_residual(alpha: FormField, traj: FlowTrajectory, n: int) -> float:
    """||z' + d_A^* d_A z + [z _| B]||_2 at node n, with z' = [A' ^ alpha] exactly."""
    A, B, Ap = traj.fields[n], traj.curvatures[n], traj.velocities[n]
    z = cov_d(A, alpha)
    zprime = wedge_comm(Ap, alpha)
    return l2_norm(zprime - variational_rhs(z, A, B))


def direct_variational_step(v: FormField, traj: FlowTrajectory, t: float, dt: float, index=None) -> FormField:
    """One RK4 step of -v' = d_A^* d_A v + [v _| B] along the trajectory.

    Oracle only: the gauge directions are undamped, so use small steps.
    """
    path = _PathCache(traj)

    def rhs(s, y):
        A, B = path(s)
        return variational_rhs(y, A, B)

    return _step(rhs, v, t, dt, index)


def solve_direct(v0: FormField, traj: FlowTrajectory, *, cfl_safety: float = 0.5, substep_factor: int = 4):
    """Direct integration of the variational equation (4x finer steps than the augmented solve)."""
    path = _PathCache(traj)

    def rhs(s, y):
        A, B = path(s)
        return variational_rhs(y, A, B)

    dt_max = stable_dt(v0.grid, cfl_safety)
    times = traj.times
    v = v0
    out = [v0]
    for n in range(1, len(times)):
        span = times[n] - times[n - 1]
        m = _substeps(span, dt_max) * substep_factor
        dt = span / m
        for k in range(m):
            v = _step(rhs, v, times[n - 1] + k * dt, dt, n)
        out.append(v)
    return out


# -- split of the augmented operator around a fixed connection ---------------------------


def _edge_to_edge(a: np.ndarray, j: int, k: int) -> np.ndarray:
    """Move samples of an edge-j quantity to edge-k locations."""
    if j == k:
        return a
    return avg_bwd(avg_fwd(a, k), j)


def mult_operator_M(w, alpha, A_bar, B) -> FormField:
    """sum_j (ad alpha_j)^2 w + [div_Abar alpha, w] - 2 [w _| B]."""
    g = w.group
    out = -2.0 * interior_comm(w, B)
    if g.abelian:
        return out
    div = -cov_d_star(A_bar, alpha)
    for k in range(3):
        acc = la.bracket(avg_fwd(div.data[0], k), w.data[k], g)
        for j in range(3):
            aj = _edge_to_edge(alpha.data[j], j, k)
            acc += la.bracket(aj, la.bracket(aj, w.data[k], g), g)
        out.data[k] += acc
    return out


def operator_K(w, alpha, A_bar, B) -> FormField:
    """2 [(alpha . nabla^Abar) w] + M w, with centred covariant differences."""
    out = mult_operator_M(w, alpha, A_bar, B)
    g = w.group
    if g.abelian:
        return out
    for j in range(3):
        Dj = covariant_partial(A_bar, w, j)
        for k in range(3):
            centred = avg_bwd(Dj.data[k], j)
            out.data[k] += 2.0 * la.bracket(_edge_to_edge(alpha.data[j], j, k), centred, g)
    return out


def split_residual(w, A, B, A_bar) -> FormField:
    """Delta_Abar w + K w - (Delta_A w - 2 [w _| B]); zero in the continuum."""
    alpha = A - A_bar
    lhs = bochner_laplacian(A_bar, w) + operator_K(w, alpha, A_bar, B)
    return lhs - augmented_rhs(w, A, B, form="bochner", check=False)


# -- semigroup and mild solutions ----------------------------------------------------------


def conjugate_gradient(apply, b: np.ndarray, x0=None, tol: float = 1e-10, maxiter: int = 1000):
    """Plain CG for a symmetric positive definite operator; returns (x, iterations)."""
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = float(np.sum(r * r))
    bnorm = float(np.sqrt(np.sum(b * b)))
    if bnorm == 0:
        return x, 0
    for it in range(1, maxiter + 1):
        Ap = apply(p)
        alpha = rr / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(np.sum(r * r))
        if np.sqrt(rr_new) <= tol * bnorm:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NumericError(f"CG did not reach residual {tol:g} in {maxiter} iterations")


def apply_semigroup(A_bar: FormField, t: float, f: FormField, m: int = 1, tol: float = 1e-10) -> FormField:
    """e^{t Delta_Abar} f by m backward-Euler substeps, each an SPD solve by CG."""
    if t < 0 or m < 1:
        raise InvalidInput("need t >= 0 and m >= 1")
    if t == 0:
        return f.copy()
    tau = t / m
    shape = f.data.shape
    maxiter = 10 * f.data.size

    def apply(x):
        y = f.like(x.reshape(shape))
        return (y - tau * bochner_laplacian(A_bar, y)).data.reshape(-1)

    x = f.data.reshape(-1).copy()
    for _ in range(m):
        x, _ = conjugate_gradient(apply, x.copy(), x0=x, tol=tol, maxiter=maxiter)
    return f.like(x.reshape(shape))


@dataclass
class PicardResult:
    iterates: List[List[FormField]]
    corrections: List[float]
    ratios: List[float]
    A_bar: FormField

    @property
    def limit(self) -> List[FormField]:
        return self.iterates[-1]


def solve_mild_picard(
    w0: FormField,
    traj: FlowTrajectory,
    n_iter: int = 8,
    m: int = 1,
    tol: float = 1e-12,
) -> PicardResult:
    """Fixed-point iteration of w = e^{t Delta_Abar} w0 + int_0^t e^{(t-s) Delta_Abar} K(s) w(s) ds.

    Abar = A(T) at the last node.  The Duhamel integral uses the composite
    trapezoid rule on the trajectory nodes, propagated recursively with the
    semigroup property so each sweep costs one semigroup application per node.
    """
    times = traj.times
    A_bar = traj.fields[-1]
    free = [w0]
    for n in range(1, len(times)):
        free.append(apply_semigroup(A_bar, times[n] - times[n - 1], free[-1], m))
    iterates = [free]
    corrections, ratios = [], []
    bad = 0
    for it in range(n_iter):
        cur = iterates[-1]
        F = [operator_K(w, A - A_bar, A_bar, B) for w, A, B in zip(cur, traj.fields, traj.curvatures)]
        new = [w0]
        for n in range(1, len(times)):
            dt = times[n] - times[n - 1]
            carried = new[-1].axpy(0.5 * dt, F[n - 1])
            new.append(apply_semigroup(A_bar, dt, carried, m).axpy(0.5 * dt, F[n]))
        corr = max(l2_norm(a - b) for a, b in zip(new, cur))
        iterates.append(new)
        corrections.append(corr)
        if len(corrections) >= 2 and corrections[-2] > 0:
            ratio = corr / corrections[-2]
            ratios.append(ratio)
            bad = bad + 1 if ratio >= 1.0 else 0
            if bad >= 3:
                raise HorizonTooLong(f"Picard corrections stopped contracting (ratio {ratio:.3f}); shorten T")
        scale = max(l2_norm(w) for w in new)
        if corr <= tol * max(scale, 1e-300):
            break
    return PicardResult(iterates, corrections, ratios, A_bar)


def choose_picard_horizon(
    A0: FormField,
    w0: FormField,
    T_max: float = 0.05,
    threshold: float = 0.5,
    probe_iter: int = 3,
    max_halvings: int = 8,
) -> float:
    """Largest T = T_max / 2^k whose probe Picard sweeps contract with ratio < threshold."""
    T = T_max
    for _ in range(max_halvings + 1):
        N = max(2, int(np.ceil(T / stable_dt(A0.grid))))
        traj = ym_flow(A0, TimeGrid.uniform(T, N))
        probe = solve_mild_picard(w0, traj, n_iter=probe_iter, m=1)
        if probe.ratios and max(probe.ratios) < threshold:
            return T
        T *= 0.5
    raise HorizonTooLong(f"no contracting horizon found down to T = {2 * T:.3e}")


# -- functionals and monitors ---------------------------------------------------------------


def b_action_series(states, traj, b: float) -> np.ndarray:
    """Running int_0^t s^-b (||nabla^A w||^2 + ||w||^2) ds at every node."""
    if not 0 <= b < 1:
        raise InvalidInput(f"b must lie in [0, 1), got {b}")
    vals = np.array([covariant_gradient_sq(A, s.w) + inner(s.w, s.w) for s, A in zip(states, traj.fields)])
    return cumulative_power_trapezoid(traj.times, vals, b)


def b_action(states, traj, b: float) -> float:
    return float(b_action_series(states, traj, b)[-1])


def initial_behavior_monitor(states, traj, b: float) -> dict:
    """Weighted first- and second-order quantities of w as time series over the nodes."""
    t = traj.times
    first, rate1, second, rate2 = [], [], [], []
    for s, A, B in zip(states, traj.fields, traj.curvatures):
        w = s.w
        wp = s.wprime if s.wprime is not None else augmented_rhs(w, A, B, form="hodge", check=False)
        dw, dsw = cov_d(A, w), cov_d_star(A, w)
        L = hodge_laplacian(A, w)
        first.append(inner(dw, dw) + inner(dsw, dsw))
        rate1.append(inner(wp, wp) + inner(L, L))
        second.append(inner(wp, wp))
        dwp, dswp = cov_d(A, wp), cov_d_star(A, wp)
        rate2.append(inner(dwp, dwp) + inner(dswp, dswp))
    first, rate1, second, rate2 = map(np.array, (first, rate1, second, rate2))
    return {
        "t": t,
        "weighted_dA_w": t ** (1 - b) * first,
        "int_weighted_wprime_Lw": cumulative_power_trapezoid(t, rate1, b - 1),
        "weighted_wprime": t ** (2 - b) * second,
        "int_weighted_dA_wprime": cumulative_power_trapezoid(t, rate2, b - 2),
        "b_action": b_action_series(states, traj, b),
    }


def run_table(states, traj, b: float) -> List[tuple]:
    """Rows (t, |w|_2, |d_A w|_2, |psi|_2, |psi|_6, b-action) for CSV output."""
    bact = b_action_series(states, traj, b)
    rows = []
    for n, (s, A) in enumerate(zip(states, traj.fields)):
        rows.append(
            (
                s.t,
                l2_norm(s.w),
                l2_norm(cov_d(A, s.w)),
                l2_norm(s.psi),
                lp_norm(s.psi, 6),
                float(bact[n]),
            )
        )
    return rows


RUN_COLUMNS = ("t", "w_L2", "dA_w_L2", "psi_L2", "psi_L6", "b_action")
