"""Executable inequalities and identity residuals, collected into a report."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import lie_algebra as la
from .covariant_calculus import (
    bianchi_residual,
    cov_d,
    cov_d_star,
    curvature,
    hodge_laplacian,
    interior_comm,
    wedge_comm,
    weitzenboeck_residual,
)
from .errors import ConfigurationError, InvalidInput
from .heat_flow import FlowTrajectory, ym_velocity
from .lattice_forms import FormField, Grid, h1A_norm, inner, l2_norm, lp_norm, spectral_random_field
from .quadrature import cumulative_power_trapezoid
from .variational_flow import augmented_rhs, split_residual

REPORT_SCHEMA_VERSION = 1
ORDER2_WINDOW = (3.2, 4.8)


@dataclass
class ReportEntry:
    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    verdict: str
    provenance: str


@dataclass
class DiagnosticsReport:
    entries: List[ReportEntry] = field(default_factory=list)

    def add(self, entry: ReportEntry) -> ReportEntry:
        self.entries.append(entry)
        return entry

    def add_inequality(self, name, lhs, rhs, tolerance, provenance) -> ReportEntry:
        lhs, rhs = float(lhs), float(rhs)
        verdict = "pass" if lhs <= rhs + tolerance else "fail"
        return self.add(ReportEntry(name, lhs, rhs, lhs - rhs, float(tolerance), verdict, provenance))

    def add_residual(self, name, residual, tolerance, provenance, lhs=float("nan"), rhs=float("nan")) -> ReportEntry:
        residual = float(residual)
        verdict = "pass" if residual <= tolerance else "fail"
        return self.add(ReportEntry(name, float(lhs), float(rhs), residual, float(tolerance), verdict, provenance))

    def add_window(self, name, value, lo, hi, provenance) -> ReportEntry:
        """Pass iff lo <= value <= hi; residual is the distance outside the window."""
        value = float(value)
        resid = max(lo - value, value - hi, 0.0)
        verdict = "pass" if lo <= value <= hi else "fail"
        return self.add(ReportEntry(name, value, float(hi), resid, 0.0, verdict, f"{provenance}; window [{lo}, {hi}]"))

    def extend(self, other: "DiagnosticsReport"):
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(e.verdict == "pass" for e in self.entries)

    def failures(self) -> List[ReportEntry]:
        return [e for e in self.entries if e.verdict != "pass"]

    def sorted_entries(self) -> List[ReportEntry]:
        return sorted(self.entries, key=lambda e: e.name)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "passed": self.passed,
            "entries": [_clean(asdict(e)) for e in self.sorted_entries()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self):
        for e in self.sorted_entries():
            yield (e.name, e.lhs, e.rhs, e.residual, e.tolerance, e.verdict, e.provenance)


CSV_COLUMNS = ("name", "lhs", "rhs", "residual", "tolerance", "verdict", "provenance")


def _clean(d):
    # JSON has no NaN; report missing sides as null
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}


# -- Hardy inequality ------------------------------------------------------------------


def hardy_check(g: Sequence[float], times: Sequence[float], beta: float, T: Optional[float] = None, name="hardy"):
    """int_0^T t^-beta G^2 dt <= 4/(1-beta)^2 int_0^T s^(2-beta) g^2 ds with G(t) = int_t^T g.

    ``g`` is sampled at positive ``times`` ending at T.  The interval [0, t_1]
    is closed with g held at its first sample.  The quadrature error is
    estimated by comparing with the rule on every other node.
    """
    if beta >= 1:
        raise InvalidInput(f"Hardy inequality needs beta < 1, got {beta}")
    times = np.asarray(times, dtype=float)
    g = np.asarray(g, dtype=float)
    if T is None:
        T = times[-1]
    if not np.isclose(times[-1], T):
        raise InvalidInput("samples must end at T")
    t = np.concatenate([[0.0], times])
    gg = np.concatenate([[g[0]], g])

    def sides(t, gg):
        seg = 0.5 * np.diff(t) * (gg[1:] + gg[:-1])
        G = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        lhs = cumulative_power_trapezoid(t, G**2, beta)[-1]
        rhs = 4.0 / (1 - beta) ** 2 * cumulative_power_trapezoid(t, gg**2, beta - 2)[-1]
        return lhs, rhs

    lhs, rhs = sides(t, gg)
    idx = np.unique(np.concatenate([np.arange(0, len(t), 2), [len(t) - 1]]))
    lhs_c, rhs_c = sides(t[idx], gg[idx])
    err = abs(lhs - lhs_c) + abs(rhs - rhs_c)
    report = DiagnosticsReport()
    return report.add_inequality(
        name, lhs, rhs * (1 + 1e-6), err, f"Hardy inequality, beta={beta}, constant 4/(1-beta)^2"
    )


# -- Gaffney-Friedrichs-Sobolev ---------------------------------------------------------


@dataclass(frozen=True)
class GFSCalibration:
    kappa: float
    kappa_measured: float
    commutator_bound: float
    gamma: float
    seed: int
    n_fields: int
    grid_n: int
    box_L: float
    group: str
    safety: float

    @property
    def run_id(self) -> str:
        payload = json.dumps(
            {k: v for k, v in asdict(self).items() if k not in ("kappa", "kappa_measured", "gamma")},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["run_id"] = self.run_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GFSCalibration":
        d = {k: v for k, v in d.items() if k != "run_id"}
        return cls(**d)


def _bump_field(grid: Grid, group, rng) -> FormField:
    """A 1-form concentrated in a periodic Gaussian bump of random width."""
    width = grid.L * 10 ** rng.uniform(np.log10(1.5 / grid.n), np.log10(0.25))
    centre = rng.uniform(0, grid.L, 3)
    amp = rng.standard_normal((3, group.dim))

    def fn(K, X, Y, Z):
        r2 = 0.0
        for x, c in zip((X, Y, Z), centre):
            d = (x - c + 0.5 * grid.L) % grid.L - 0.5 * grid.L
            r2 = r2 + d**2
        return amp[K[0]][:, None, None, None] * np.exp(-r2 / (2 * width**2))[None]

    return FormField.from_function(1, grid, group, fn)


def calibrate_gfs(grid: Grid, group: la.GroupSpec, seed: int, n_fields: int = 1000, safety: float = 1.5):
    """Measure the lattice Sobolev constant and derive gamma = (27/4) kappa^6 c^4."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6F5]))
    zero = FormField.zeros(1, grid, group)
    best = 0.0
    for i in range(n_fields):
        if i % 2 == 0:
            w = spectral_random_field(1, grid, group, rng.uniform(-0.5, 2.5), rng)
        else:
            w = _bump_field(grid, group, rng)
        best = max(best, lp_norm(w, 6) / h1A_norm(w, zero))
    kappa = safety * best
    c = group.commutator_bound
    gamma = 27.0 / 4.0 * kappa**6 * c**4
    return GFSCalibration(kappa, best, c, gamma, int(seed), n_fields, grid.n, float(grid.L), group.name, safety)


def gfs_sides(omega: FormField, A: FormField, gamma: float):
    B = curvature(A)
    lhs = 0.5 * h1A_norm(omega, A) ** 2
    rhs = 0.0
    if omega.degree >= 1:
        ds = cov_d_star(A, omega)
        rhs += inner(ds, ds)
    if omega.degree <= 2:
        d = cov_d(A, omega)
        rhs += inner(d, d)
    lam = 1.0 + gamma * l2_norm(B) ** 4
    rhs += lam * inner(omega, omega)
    return lhs, rhs, lam


def gfs_check(omega: FormField, A: FormField, calibration: Optional[GFSCalibration], name="gfs") -> ReportEntry:
    """(1/2)||w||_{H_1^A}^2 <= ||d_A^* w||^2 + ||d_A w||^2 + lambda(B) ||w||^2."""
    if calibration is None:
        raise ConfigurationError("GFS check needs a calibrated gamma; run calibrate_gfs first")
    lhs, rhs, lam = gfs_sides(omega, A, calibration.gamma)
    tol = 1e-12 * max(abs(rhs), 1.0)
    return DiagnosticsReport().add_inequality(
        name, lhs, rhs, tol, f"GFS with lambda(B) = 1 + gamma |B|^4, gamma={calibration.gamma:.6e} (calibration {calibration.run_id})"
    )


# -- pointwise identities at a snapshot --------------------------------------------------


def spatial_identity_residuals(A: FormField, w: FormField) -> Dict[str, float]:
    """L2 norms of identity defects that vanish in the continuum (time derivatives exact)."""
    B = curvature(A)
    Ap = ym_velocity(A, B)
    wp = augmented_rhs(w, A, B, form="hodge", check=False)
    zeta = cov_d_star(A, cov_d(A, w)) + interior_comm(w, B)
    psi = cov_d_star(A, w)
    dpsi = cov_d_star(A, wp) + interior_comm(Ap, w)
    out = {
        "bianchi": l2_norm(bianchi_residual(A, B)),
        "weitzenboeck": l2_norm(weitzenboeck_residual(A, w, B)),
        "pi11a": l2_norm(cov_d_star(A, zeta) - interior_comm(w, Ap)),
        "pi12a": l2_norm(dpsi + cov_d_star(A, cov_d(A, psi)) - 2.0 * interior_comm(Ap, w)),
        "split": l2_norm(split_residual(w, A, B, A - 0.25 * Ap)),
    }
    return out


IDENTITY_PROVENANCE = {
    "bianchi": "d_A B = 0",
    "weitzenboeck": "(d_A^* d_A + d_A d_A^*) w = -Delta_A w + [w _| B]",
    "pi11a": "d_A^* zeta = [w _| A']",
    "pi12a": "psi' = -d_A^* d_A psi + 2 [A' _| w]",
    "split": "Delta_Abar w + K w = Delta_A w - 2 [w _| B]",
}


# -- energy balances along a run ------------------------------------------------------------


def _hermite_mid(y0, y1, v0, v1, dt):
    return y0.like(0.5 * (y0.data + y1.data) + 0.125 * dt * (v0.data - v1.data))


def _balance_terms(which: str, w, A, B, Ap):
    wp = augmented_rhs(w, A, B, form="hodge", check=False)
    dw, psi = cov_d(A, w), cov_d_star(A, w)
    if which == "intid35":
        return inner(w, w), -2 * (inner(dw, dw) + inner(psi, psi)) - 2 * inner(B, wedge_comm(w, w))
    if which == "intid36":
        L = hodge_laplacian(A, w)
        wB = interior_comm(w, B)
        rate = (
            -inner(wp, wp)
            - inner(L, L)
            + 2 * (inner(wedge_comm(Ap, w), dw) + inner(interior_comm(Ap, w), psi))
            + inner(wB, wB)
        )
        return inner(dw, dw) + inner(psi, psi), rate
    if which == "intid38":
        dwp, dswp = cov_d(A, wp), cov_d_star(A, wp)
        wB_dot = interior_comm(wp, B) + interior_comm(w, cov_d(A, Ap))
        bracket = (
            inner(wedge_comm(Ap, w), dwp)
            + inner(interior_comm(Ap, w), dswp)
            + inner(interior_comm(Ap, dw) + wedge_comm(Ap, psi), wp)
            + inner(wB_dot, wp)
        )
        return inner(wp, wp), -2 * (inner(dwp, dwp) + inner(dswp, dswp)) - 2 * bracket
    raise InvalidInput(f"unknown balance {which!r}")


def energy_balance(states, traj: FlowTrajectory, which: str = "intid35") -> np.ndarray:
    """Per-interval defect E(t_{n+1}) - E(t_n) - Simpson(rate) for the chosen identity.

    Midpoint states come from the cubic Hermite interpolant of (w, w').
    """
    times = traj.times
    out = np.zeros(len(times) - 1)
    prev = None
    for n in range(len(times) - 1):
        t0, t1 = times[n], times[n + 1]
        dt = t1 - t0
        s0, s1 = states[n], states[n + 1]
        if prev is None:
            prev = _balance_terms(which, s0.w, traj.fields[n], traj.curvatures[n], traj.velocities[n])
        nxt = _balance_terms(which, s1.w, traj.fields[n + 1], traj.curvatures[n + 1], traj.velocities[n + 1])
        tm = 0.5 * (t0 + t1)
        wm = _hermite_mid(s0.w, s1.w, s0.wprime, s1.wprime, dt)
        Am = traj.at(tm)
        mid = _balance_terms(which, wm, Am, curvature(Am), traj.velocity_at(tm))
        out[n] = (nxt[0] - prev[0]) - dt / 6.0 * (prev[1] + 4 * mid[1] + nxt[1])
        prev = nxt
    return out


# -- aggregation ------------------------------------------------------------------------------


@dataclass
class IdentityArtifacts:
    """Inputs for ``identity_suite``.

    ``snapshots`` maps grid size n to (A, w) sampled from the same smooth data;
    ``runs`` holds (states, trajectory) pairs of one problem at successively
    halved time steps.
    """

    snapshots: Dict[int, tuple] = field(default_factory=dict)
    runs: List[tuple] = field(default_factory=list)
    balances: Sequence[str] = ("intid35", "intid36")
    min_dt_ratio: float = 12.0


def identity_suite(art: IdentityArtifacts) -> DiagnosticsReport:
    report = DiagnosticsReport()
    ns = sorted(art.snapshots)
    resid = {n: spatial_identity_residuals(*art.snapshots[n]) for n in ns}
    abelian = bool(ns) and art.snapshots[ns[0]][0].group.abelian
    for n in ns:
        for key, val in resid[n].items():
            if abelian and key != "weitzenboeck":
                report.add_residual(f"{key}@n={n}", val, 1e-10, IDENTITY_PROVENANCE[key] + "; abelian")
    if not abelian:
        for n0, n1 in zip(ns[:-1], ns[1:]):
            for key in resid[n0]:
                ratio = resid[n0][key] / max(resid[n1][key], 1e-300)
                report.add_window(
                    f"{key}:ratio:{n0}->{n1}", ratio, *ORDER2_WINDOW, IDENTITY_PROVENANCE[key] + "; order h^2"
                )
    if len(art.runs) >= 2:
        for which in art.balances:
            totals = [float(np.sum(np.abs(energy_balance(s, tr, which)))) for s, tr in art.runs]
            for k in range(len(totals) - 1):
                ratio = totals[k] / max(totals[k + 1], 1e-300)
                report.add_inequality(
                    f"{which}:dt_ratio:{k}",
                    -ratio,
                    -art.min_dt_ratio,
                    0.0,
                    f"energy balance {which}; accumulated defect shrinks by >= {art.min_dt_ratio} per dt halving",
                )
    return report


# -- perturbation growth ---------------------------------------------------------------------


def gronwall_check(dv: Sequence[FormField], traj: FlowTrajectory, slack: float = 1e-3) -> DiagnosticsReport:
    """||dv(t_n)|| <= ||dv(0)|| exp(int_0^{t_n} 2 c ||B||_inf ds) (1 + slack) at every node.

    ``dv`` is the difference of two variational solutions along ``traj``.
    """
    c = traj.fields[0].group.commutator_bound
    binf = np.array([lp_norm(B, np.inf) for B in traj.curvatures])
    growth = np.exp(cumulative_power_trapezoid(traj.times, 2 * c * binf, 0.0))
    d0 = l2_norm(dv[0])
    report = DiagnosticsReport()
    for n, (d, gr) in enumerate(zip(dv, growth)):
        report.add_inequality(
            f"gronwall:{n:04d}", l2_norm(d), d0 * gr * (1 + slack), 0.0, f"perturbation growth bound, c={c:.6g}"
        )
    return report
