"""Acceptance criteria A1-A10 at their stated tolerances.

Each criterion prints one PASS/FAIL line.  Run standalone with
``python tests/test_acceptance.py`` or through pytest.
"""
import dataclasses
import filecmp
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from ymlab import cli
from ymlab import lie_algebra as la
from ymlab.config import load, stream
from ymlab.diagnostics import GFSCalibration, calibrate_gfs, gronwall_check, identity_suite
from ymlab.errors import IntegratorFailure
from ymlab.heat_flow import stable_dt, ym_flow
from ymlab.lattice_forms import Grid, l2_norm, spectral_random_field
from ymlab.quadrature import TimeGrid
from ymlab.variational_flow import choose_picard_horizon, solve_augmented, solve_direct, solve_mild_picard

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
sys.path.insert(0, str(Path(__file__).parent))
from conftest import smooth_su2_pair  # noqa: E402


def _run(config, out, **override):
    """Run a scenario in-process and return its summary."""
    cfg = load(CONFIGS / config)
    cfg = dataclasses.replace(cfg, out_dir=str(out), **override)
    out.mkdir(parents=True, exist_ok=True)
    verdicts, metrics = cli.SCENARIO_RUNNERS[cfg.scenario](cli.RunContext(cfg, out))
    return verdicts, metrics


# -- criteria ------------------------------------------------------------------------------


def criterion_A1(tmp):
    errs = {}
    for n in (16, 32):
        _, m = _run("oracle_u1_32.yaml", tmp / f"a1_{n}", n=n)
        errs[n] = m["flow_rel_error"]
    ratio = errs[16] / errs[32]
    ok = errs[32] <= 5e-3 and ratio >= 3.2
    return ok, f"32^3 rel L2 error {errs[32]:.3e} (<= 5e-3), 16->32 ratio {ratio:.2f} (>= 3.2)"


def criterion_A2(tmp):
    g, grid = la.su2(), Grid(16)
    violations, runs = 0, 20
    for i in range(runs):
        rng = stream(2024, f"A2:{i}")
        A0 = spectral_random_field(1, grid, g, rng.uniform(1.0, 2.0), rng, rng.uniform(1.0, 4.0))
        # one node per CFL step, so the monitor sees every step
        tg = TimeGrid.for_cfl(0.1, stable_dt(grid), 1.0)
        try:
            traj = ym_flow(A0, tg, check_monotone=True)
        except IntegratorFailure:
            violations += 1
            continue
        e = traj.energy()
        violations += int(np.sum(e[1:] > e[:-1] * (1 + 1e-10)))
    return violations == 0, f"{runs} seeded SU2 16^3 runs, {violations} monotonicity violations"


def criterion_A3(tmp):
    verdicts, m = _run("recover_vs_direct.yaml", tmp / "a3")
    ok = verdicts["matches_direct"] and verdicts["identity_v_tau"]
    return ok, (
        f"recovered vs direct rel error {m['direct_rel_error']:.3e} (<= 5e-3); "
        f"v_tau identity {'holds' if verdicts['identity_v_tau'] else 'FAILS'} to 1e-12"
    )


def criterion_A4(tmp):
    verdicts, m = _run("recover_tau_sweep.yaml", tmp / "a4")
    sups = m["sup_diffs"]
    ok = m["taus"] == [0.2, 0.1, 0.05, 0.025] and verdicts["sup_monotone_in_tau"] and sups[-1] <= 0.3 * sups[0]
    return ok, "sup_t ||v - v_tau|| = " + ", ".join(f"{s:.3e}" for s in sups) + f"; last/first {sups[-1] / sups[0]:.3f}"


def criterion_A5(tmp):
    verdicts, m = _run("oracle_rho_u1.yaml", tmp / "a5")
    dev = abs(m["rho_ratio"] - 1)
    ok = dev <= 0.02 and m["tail"] < 0.005 and verdicts.get("rho_matches_H_half", False)
    return ok, f"|rho/(c/2 |A0|^2_H1/2) - 1| = {dev:.2e} (<= 2%), tail {m['tail']:.2e} (< 0.5%)"


def criterion_A6(tmp):
    cfg = dataclasses.replace(load(CONFIGS / "checks_su2.yaml"), out_dir=str(tmp / "a6"))
    report = identity_suite(cli.identity_artifacts(cli.RunContext(cfg, tmp / "a6")))
    need = ("bianchi", "weitzenboeck", "pi11a", "pi12a", "intid35", "intid36")
    names = {e.name.split(":")[0] for e in report.entries}
    ok = report.passed and all(k in names for k in need)
    worst = [f"{e.name}={abs(e.lhs):.2f}" for e in report.sorted_entries()]
    return ok, "; ".join(worst)


def criterion_A7(tmp):
    verdicts, m = _run("checks_su2.yaml", tmp / "a7", identities=False)
    rep = json.loads((tmp / "a7" / "report.json").read_text())
    hardy = [e for e in rep["entries"] if e["name"].startswith("hardy:")]
    gfs = [e for e in rep["entries"] if e["name"].startswith("gfs:")]
    cal = GFSCalibration.from_dict(json.loads((tmp / "a7" / "gfs_calibration.json").read_text()))
    again = calibrate_gfs(Grid(cal.grid_n, cal.box_L), la.group_spec(cal.group), cal.seed, cal.n_fields, cal.safety)
    ok = (
        len(hardy) == 100
        and len(gfs) == 100
        and all(e["verdict"] == "pass" for e in hardy + gfs)
        and again == cal
    )
    return ok, (
        f"hardy {sum(e['verdict'] == 'pass' for e in hardy)}/100, gfs {sum(e['verdict'] == 'pass' for e in gfs)}/100 "
        f"with gamma={cal.gamma:.4e}; calibration {cal.run_id} {'reproduced' if again == cal else 'NOT reproduced'}"
    )


def criterion_A8(tmp):
    A0, w0 = smooth_su2_pair(16)
    T = choose_picard_horizon(A0, w0)
    N = max(2, int(np.ceil(T / stable_dt(A0.grid))))
    traj = ym_flow(A0, TimeGrid.uniform(T, N))
    ref = solve_augmented(w0, traj)[-1].w
    pr = solve_mild_picard(w0, traj, n_iter=8, m=4)
    late = pr.ratios[1:]
    err = l2_norm(pr.limit[-1] - ref) / l2_norm(ref)
    ok = bool(late) and max(late) < 0.9 and err <= 5e-3
    return ok, f"T={T:g}, correction ratios after it. 2 <= {max(late):.3f} (< 0.9), limit vs augmented {err:.2e} (<= 5e-3)"


def criterion_A9(tmp):
    A0, v0 = smooth_su2_pair(16)
    traj = ym_flow(A0, TimeGrid.geometric(0.25, 32, 2.0))
    delta = spectral_random_field(1, A0.grid, A0.group, 1.0, stream(99, "A9"), 1e-3)
    va, vb = solve_direct(v0, traj), solve_direct(v0 + delta, traj)
    rep = gronwall_check([b - a for a, b in zip(va, vb)], traj)
    worst = max(e.lhs / e.rhs for e in rep.entries[1:])
    return rep.passed, f"{len(rep.entries)} nodes, max ||dv(t)||/bound after t=0: {worst:.3e} (<= 1)"


_A10_BASE = """\
schema_version: 1
scenario: {scenario}
group: {group}
seed: 17
grid: {{n: 8}}
time: {{T: 0.1, N: 6}}
taus: [0.05]
initial_data:
  connection: {{kind: spectral, s: 1.0, amplitude: 2.0{coulomb}}}
  variation: {{kind: spectral, s: 1.0, amplitude: 1.0}}
checks:
  hardy: {{count: 5, samples: 60}}
  gfs: {{count: 5, calibrate: true, n_fields: 20}}
oracle: {{symbol: continuum, tolerance: 1.0, rho_tolerance: 1.0}}
output: {{snapshot_every: 3}}
"""


def criterion_A10(tmp):
    mismatches, runs = [], 0
    env = dict(os.environ)
    for scenario in ("heatflow", "variational", "recover", "checks", "oracle"):
        group = "U1" if scenario == "oracle" else "SU2"
        coulomb = ", coulomb: true" if group == "U1" else ""
        cfg = tmp / f"a10_{scenario}.yaml"
        cfg.write_text(_A10_BASE.format(scenario=scenario, group=group, coulomb=coulomb))
        outs = []
        for threads in (1, 4, 8):
            out = tmp / f"a10_{scenario}_{threads}"
            cmd = [sys.executable, "-m", "ymlab", scenario, "--config", str(cfg), "--out", str(out), "--threads", str(threads)]
            code = subprocess.run(cmd, env=env, capture_output=True).returncode
            runs += 1
            if code != 0:
                mismatches.append(f"{scenario}/threads={threads} exit {code}")
            outs.append(out)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        for other in outs[1:]:
            other_files = sorted(p.relative_to(other) for p in other.rglob("*") if p.is_file())
            if other_files != files:
                mismatches.append(f"{scenario}: file sets differ")
                continue
            for f in files:
                if not filecmp.cmp(outs[0] / f, other / f, shallow=False):
                    mismatches.append(f"{scenario}: {f} differs")
    return not mismatches, f"{runs} CLI runs over 5 scenarios x threads {{1,4,8}}; mismatches: {mismatches or 'none'}"


CRITERIA = {f"A{i}": globals()[f"criterion_A{i}"] for i in range(1, 11)}


def _line(key, ok, detail):
    return f"{key} {'PASS' if ok else 'FAIL'}: {detail}"


@pytest.mark.parametrize("key", list(CRITERIA))
def test_acceptance(key, tmp_path, capsys):
    ok, detail = CRITERIA[key](tmp_path)
    with capsys.disabled():
        print("\n" + _line(key, ok, detail))
    assert ok, detail


def main(argv=None) -> int:
    keys = (argv or sys.argv[1:]) or list(CRITERIA)
    failed = 0
    with tempfile.TemporaryDirectory() as d:
        for key in keys:
            ok, detail = CRITERIA[key](Path(d))
            failed += not ok
            print(_line(key, ok, detail), flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
