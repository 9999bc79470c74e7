"""Command-line runner: one scenario per invocation, reproducible artifacts on disk.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or schema
error, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import platform
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import scipy

from . import __version__
from . import lie_algebra as la
from .config import ExperimentConfig, InitialData, load, stream
from .covariant_calculus import cov_d
from .diagnostics import (
    CSV_COLUMNS,
    DiagnosticsReport,
    GFSCalibration,
    IdentityArtifacts,
    calibrate_gfs,
    gfs_check,
    hardy_check,
    identity_suite,
)
from .errors import ConfigurationError, DivergenceError, InvalidInput
from .heat_flow import TIME_SERIES_COLUMNS, action_rho, time_series_rows, ym_flow
from .lattice_forms import COMPONENTS, FormField, Grid, l2_norm, spectral_random_field, write_snapshot
from .quadrature import TimeGrid
from .spectral_oracle import h_half_seminorm, helmholtz_split, rho_closed_form, rho_tail_fraction, spectral_heat
from .variational_flow import (
    RUN_COLUMNS,
    RecoveryConfig,
    alpha_tau,
    b_action,
    recover_v,
    run_table,
    solve_augmented,
    solve_direct,
)

log = logging.getLogger("ymlab")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3
SUMMARY_SCHEMA_VERSION = 1
C_HALF = float(np.sqrt(np.pi / 2))


# -- initial data ------------------------------------------------------------------


def mode_field(grid: Grid, group: la.GroupSpec, modes) -> FormField:
    """Sum of amp * sin/cos(k . x) placed on one component and basis direction each."""
    f = FormField(1, grid, group)
    for m in modes:
        j = int(m["component"])
        a = int(m.get("basis", 0))
        if not (0 <= j < 3 and 0 <= a < group.dim):
            raise ConfigurationError(f"mode {m} has component/basis out of range")
        k = np.asarray(m["k"], dtype=float)
        if k.shape != (3,) or np.any(k != np.round(k)):
            raise ConfigurationError(f"mode wave vector must be three integers, got {m['k']}")
        X, Y, Z = grid.coords(COMPONENTS[1][j])
        scale = 2 * np.pi / grid.L
        phase = scale * (k[0] * X + k[1] * Y + k[2] * Z)
        kind = m.get("phase", "sin")
        if kind not in ("sin", "cos"):
            raise ConfigurationError(f"mode phase must be 'sin' or 'cos', got {kind!r}")
        f.data[j, a] += float(m["amp"]) * (np.sin(phase) if kind == "sin" else np.cos(phase))
    return f


def build_initial(spec: InitialData, grid: Grid, group: la.GroupSpec, seed: int, label: str) -> FormField:
    if spec.kind == "modes":
        if not spec.modes:
            raise ConfigurationError(f"{label}: 'modes' initial data needs at least one mode")
        f = mode_field(grid, group, spec.modes)
    else:
        f = spectral_random_field(1, grid, group, spec.s, stream(seed, label), spec.amplitude, spec.kmax)
    if spec.coulomb:
        if not group.abelian:
            raise ConfigurationError("Coulomb projection is only available for abelian groups")
        f, _ = helmholtz_split(f)
    return f


# -- output helpers -----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, columns, rows, config_hash: str):
    buf = io.StringIO()
    buf.write(f"# config_hash: {config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    path.write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def versions() -> dict:
    return {
        "ymlab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


@dataclasses.dataclass
class RunContext:
    cfg: ExperimentConfig
    out: Path
    threads: int = 1

    @property
    def grid(self) -> Grid:
        return Grid(self.cfg.n, self.cfg.L)

    @property
    def group(self) -> la.GroupSpec:
        return la.group_spec(self.cfg.group)

    def time_grid(self) -> TimeGrid:
        cfg = self.cfg
        N = cfg.N if cfg.N is not None else 32
        return TimeGrid.geometric(cfg.T, N, cfg.gamma, cfg.extra_times)

    def connection(self) -> FormField:
        return build_initial(self.cfg.connection, self.grid, self.group, self.cfg.seed, "connection")

    def variation(self) -> FormField:
        if self.cfg.variation is None:
            raise ConfigurationError(f"scenario {self.cfg.scenario} needs initial_data.variation")
        return build_initial(self.cfg.variation, self.grid, self.group, self.cfg.seed, "variation")

    def snapshot(self, name: str, n: int, f: FormField):
        k = self.cfg.snapshot_every
        if k > 0 and n % k == 0:
            d = self.out / "snapshots"
            d.mkdir(exist_ok=True)
            write_snapshot(f, d / f"{name}_{n:05d}.ymf")


def _monotone(values, rtol=1e-10) -> bool:
    values = np.asarray(values)
    return bool(np.all(values[1:] <= values[:-1] * (1 + rtol)))


# -- scenarios ---------------------------------------------------------------------


def _flow(ctx: RunContext):
    traj = ym_flow(ctx.connection(), ctx.time_grid(), ctx.cfg.cfl_safety, check_monotone=False)
    for n, A in enumerate(traj.fields):
        ctx.snapshot("A", n, A)
    return traj


def run_heatflow(ctx: RunContext):
    cfg = ctx.cfg
    traj = _flow(ctx)
    rows = time_series_rows(traj, cfg.a)
    write_csv(ctx.out / "timeseries.csv", TIME_SERIES_COLUMNS, rows, cfg.hash())
    energy = traj.energy()
    verdicts = {"energy_monotone": _monotone(energy)}
    metrics = {"rho_A": action_rho(traj, cfg.a), "B_L2_initial": energy[0], "B_L2_final": energy[-1], "nodes": len(traj)}
    return verdicts, metrics


def run_variational(ctx: RunContext):
    cfg = ctx.cfg
    traj = _flow(ctx)
    states = solve_augmented(ctx.variation(), traj, cfl_safety=cfg.cfl_safety)
    for n, s in enumerate(states):
        ctx.snapshot("w", n, s.w)
    write_csv(ctx.out / "variational.csv", RUN_COLUMNS, run_table(states, traj, cfg.b), cfg.hash())
    verdicts = {"finite": all(s.w.is_finite() for s in states)}
    metrics = {"b_action": b_action(states, traj, cfg.b), "w_L2_final": l2_norm(states[-1].w)}
    return verdicts, metrics


def run_recover(ctx: RunContext):
    cfg = ctx.cfg
    traj = _flow(ctx)
    v0 = ctx.variation()
    states = solve_augmented(v0, traj, cfl_safety=cfg.cfl_safety)
    v = recover_v(states, traj, RecoveryConfig(0.0, cfg.b))
    taus = sorted(set(cfg.taus) | ({cfg.tau} if cfg.tau > 0 else set()), reverse=True)
    rows, sups = [], []
    worst_rec5 = 0.0
    for tau in taus:
        rc = RecoveryConfig(tau, cfg.b)
        vt = recover_v(states, traj, rc)
        alpha = alpha_tau(states, traj, rc)
        diffs = [l2_norm(a - b) for a, b in zip(v, vt)]
        rec5 = max(
            l2_norm(vt[n] - (v[n] - cov_d(traj.fields[n], alpha))) / max(l2_norm(v[n]), 1e-300) for n in range(len(v))
        )
        worst_rec5 = max(worst_rec5, rec5)
        sups.append(max(diffs))
        rows.append((tau, max(diffs), diffs[-1], rec5))
    write_csv(ctx.out / "recover.csv", ("tau", "sup_v_minus_vtau_L2", "final_v_minus_vtau_L2", "rec_identity_rel"), rows, cfg.hash())
    verdicts = {"identity_v_tau": worst_rec5 <= 1e-12}
    metrics = {"v_L2_final": l2_norm(v[-1]), "taus": taus, "sup_diffs": sups}
    if len(sups) >= 2:
        verdicts["sup_monotone_in_tau"] = all(s1 < s0 for s0, s1 in zip(sups[:-1], sups[1:]))
        metrics["sup_ratio_last_first"] = sups[-1] / sups[0] if sups[0] > 0 else 0.0
    for n, vn in enumerate(v):
        ctx.snapshot("v", n, vn)
    if cfg.recover_direct:
        vd = solve_direct(v0, traj, cfl_safety=cfg.cfl_safety)
        err = l2_norm(v[-1] - vd[-1]) / l2_norm(vd[-1])
        metrics["direct_rel_error"] = err
        verdicts["matches_direct"] = err <= cfg.recover_tolerance
    return verdicts, metrics


def _load_calibration(ctx: RunContext) -> GFSCalibration:
    opt = ctx.cfg.gfs
    if opt.calibration:
        path = Path(opt.calibration)
        try:
            cal = GFSCalibration.from_dict(json.loads(path.read_text()))
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"cannot load GFS calibration {path}: {exc}") from exc
        if cal.grid_n != ctx.cfg.n or cal.group != ctx.cfg.group:
            raise ConfigurationError("GFS calibration was made for a different grid or group")
        return cal
    if opt.calibrate:
        cal = calibrate_gfs(ctx.grid, ctx.group, ctx.cfg.seed, opt.n_fields, opt.safety)
        write_json(ctx.out / "gfs_calibration.json", cal.to_dict())
        return cal
    raise ConfigurationError("checks.gfs needs 'calibration: <file>' or 'calibrate: true'; gamma is uncalibrated")


def random_hardy_instance(rng: np.random.Generator, samples: int):
    """A random piecewise-smooth g on a geometric grid, with beta drawn from {0, 1/2, 0.9}."""
    T = float(rng.uniform(0.2, 1.0))
    times = T * (np.arange(1, samples + 1) / samples) ** 2
    beta = float(rng.choice([0.0, 0.5, 0.9]))
    g = np.zeros_like(times)
    for _ in range(rng.integers(1, 4)):
        p = rng.uniform(-0.4, 2.0)
        g += rng.normal() * (times / T) ** p
    jump = rng.uniform(0, T)
    g += np.where(times > jump, rng.normal(), 0.0) + 0.5 * rng.normal() * np.sin(rng.uniform(1, 20) * times)
    return g, times, beta, T


def random_gfs_instance(rng: np.random.Generator, grid: Grid, group: la.GroupSpec):
    degree = int(rng.integers(0, 4))
    omega = spectral_random_field(degree, grid, group, rng.uniform(0.0, 2.0), rng, 1.0)
    A = spectral_random_field(1, grid, group, rng.uniform(0.5, 2.0), rng, rng.uniform(0.0, 3.0))
    return omega, A


def run_checks(ctx: RunContext):
    cfg = ctx.cfg
    report = DiagnosticsReport()
    cal = _load_calibration(ctx) if cfg.gfs.count > 0 else None
    rng = stream(cfg.seed, "hardy")
    for i in range(cfg.hardy_count):
        g, times, beta, T = random_hardy_instance(rng, cfg.hardy_samples)
        report.add(hardy_check(g, times, beta, T, name=f"hardy:{i:03d}"))
    rng = stream(cfg.seed, "gfs")
    for i in range(cfg.gfs.count):
        omega, A = random_gfs_instance(rng, ctx.grid, ctx.group)
        report.add(gfs_check(omega, A, cal, name=f"gfs:{i:03d}"))
    if cfg.identities:
        report.extend(identity_suite(identity_artifacts(ctx)))
    write_json(ctx.out / "report.json", report.to_dict())
    write_csv(ctx.out / "report.csv", CSV_COLUMNS, report.csv_rows(), cfg.hash())
    verdicts = {"report": report.passed}
    metrics = {"entries": len(report.entries), "failures": [e.name for e in report.failures()]}
    if cal is not None:
        metrics["gfs_gamma"] = cal.gamma
        metrics["gfs_calibration_run_id"] = cal.run_id
    return verdicts, metrics


def identity_artifacts(ctx: RunContext) -> IdentityArtifacts:
    """Snapshots at n and 2n plus three dt-halved runs on an 8^3 grid, all from mode data."""
    cfg = ctx.cfg
    for d in (cfg.connection, cfg.variation):
        if d is None or d.kind != "modes":
            raise ConfigurationError("identity checks need mode-list initial data for connection and variation")
    snaps = {}
    for n in (cfg.n, 2 * cfg.n):
        g = Grid(n, cfg.L)
        snaps[n] = (mode_field(g, ctx.group, cfg.connection.modes), mode_field(g, ctx.group, cfg.variation.modes))
    runs = []
    small = Grid(8, cfg.L)
    T = min(cfg.T, 0.2)
    for N in (4, 8, 16):
        tg = TimeGrid.uniform(T, N)
        traj = ym_flow(mode_field(small, ctx.group, cfg.connection.modes), tg)
        runs.append((solve_augmented(mode_field(small, ctx.group, cfg.variation.modes), traj), traj))
    return IdentityArtifacts(snaps, runs)


def run_oracle(ctx: RunContext):
    cfg = ctx.cfg
    A0 = ctx.connection()
    traj = _flow(ctx)
    ref = spectral_heat(A0, cfg.T, kind=cfg.oracle_symbol, workers=ctx.threads)
    err = l2_norm(traj.fields[-1] - ref) / l2_norm(ref)
    rho = action_rho(traj, cfg.a)
    rho_exact = rho_closed_form(A0, cfg.T, cfg.a, kind=cfg.oracle_symbol)
    hh = h_half_seminorm(A0, kind=cfg.oracle_symbol, workers=ctx.threads)
    tail = rho_tail_fraction(A0, cfg.T, kind=cfg.oracle_symbol)
    ratio = rho / (0.5 * C_HALF * hh**2)
    row = (cfg.T, err, rho, rho_exact, hh, ratio, tail)
    write_csv(
        ctx.out / "oracle.csv",
        ("T", "flow_rel_error", "rho_numeric", "rho_closed_form", "H_half_seminorm", "rho_over_c_H_half_sq", "tail_fraction"),
        [row],
        cfg.hash(),
    )
    verdicts = {
        "flow_matches_oracle": err <= cfg.oracle_tolerance,
        "rho_matches_closed_form": abs(rho / rho_exact - 1) <= cfg.oracle_rho_tolerance,
    }
    if cfg.a == 0.5 and tail < 0.005:
        verdicts["rho_matches_H_half"] = abs(ratio - 1) <= cfg.oracle_rho_tolerance
    metrics = dict(zip(("T", "flow_rel_error", "rho_numeric", "rho_closed_form", "H_half", "rho_ratio", "tail"), row))
    return verdicts, metrics


SCENARIO_RUNNERS = {
    "heatflow": run_heatflow,
    "variational": run_variational,
    "recover": run_recover,
    "checks": run_checks,
    "oracle": run_oracle,
}


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ymlab", description=__doc__.splitlines()[0])
    p.add_argument("scenario", choices=sorted(SCENARIO_RUNNERS))
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None, help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, default=None, help="master seed, unsigned 64-bit")
    p.add_argument("--threads", type=int, default=1, help="FFT worker threads; outputs do not depend on it")
    p.add_argument("--snapshot-every", type=int, default=None, help="write field snapshots every K nodes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def execute(args) -> int:
    cfg = load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.snapshot_every is not None:
        overrides["snapshot_every"] = args.snapshot_every
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if cfg.scenario != args.scenario:
        raise ConfigurationError(f"config describes scenario {cfg.scenario!r}, not {args.scenario!r}")
    if args.threads < 1:
        raise ConfigurationError("--threads must be >= 1")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg, out, args.threads)
    verdicts, metrics = SCENARIO_RUNNERS[cfg.scenario](ctx)
    ok = all(verdicts.values())
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "scenario": cfg.scenario,
        "config_hash": cfg.hash(),
        "config": cfg.canonical(),
        "seed": cfg.seed,
        "versions": versions(),
        "verdicts": {k: ("pass" if v else "fail") for k, v in verdicts.items()},
        "metrics": metrics,
        "passed": ok,
    }
    write_json(out / "summary.json", summary)
    for k, v in sorted(verdicts.items()):
        log.info("%s: %s", k, "pass" if v else "fail")
    return EXIT_OK if ok else EXIT_CHECK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return execute(args)
    except (ConfigurationError, InvalidInput) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"numerical divergence at node {exc.index}: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
