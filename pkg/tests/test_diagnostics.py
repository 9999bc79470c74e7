import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymlab.diagnostics import (
    CSV_COLUMNS,
    DiagnosticsReport,
    GFSCalibration,
    IdentityArtifacts,
    calibrate_gfs,
    energy_balance,
    gfs_check,
    gfs_sides,
    hardy_check,
    identity_suite,
    spatial_identity_residuals,
)
from ymlab.errors import ConfigurationError, InvalidInput
from ymlab.heat_flow import ym_flow
from ymlab.lattice_forms import FormField, Grid, l2_norm
from ymlab.quadrature import TimeGrid
from ymlab.variational_flow import solve_augmented

from conftest import random_form, smooth_su2_pair


def _geo(T=1.0, N=400):
    return T * (np.arange(1, N + 1) / N) ** 2


def test_report_verdicts_and_serialisation():
    rep = DiagnosticsReport()
    rep.add_inequality("b", 1.0, 2.0, 0.0, "x")
    rep.add_residual("a", 0.5, 1.0, "y")
    rep.add_window("c", 5.0, 3.2, 4.8, "z")
    assert [e.verdict for e in rep.entries] == ["pass", "pass", "fail"]
    assert not rep.passed and [e.name for e in rep.failures()] == ["c"]
    d = json.loads(rep.to_json())
    assert d["schema_version"] == 1 and [e["name"] for e in d["entries"]] == ["a", "b", "c"]
    assert d["entries"][0]["lhs"] is None  # NaN sides serialise as null
    assert len(next(iter(rep.csv_rows()))) == len(CSV_COLUMNS)


def test_hardy_closed_form_example():
    e = hardy_check(np.ones(400), _geo(), 0.0, 1.0)
    assert e.lhs == pytest.approx(1 / 3, rel=1e-4)
    assert e.rhs == pytest.approx(4 / 3, rel=1e-4)
    assert e.verdict == "pass"


def test_hardy_zero_and_errors():
    e = hardy_check(np.zeros(50), _geo(N=50), 0.5)
    assert e.lhs == 0 and e.rhs == 0 and e.verdict == "pass"
    with pytest.raises(InvalidInput):
        hardy_check(np.ones(10), _geo(N=10), 1.0)
    with pytest.raises(InvalidInput):
        hardy_check(np.ones(10), _geo(N=10), 0.0, T=2.0)


@given(st.sampled_from([0.0, 0.5, 0.9]), st.floats(-0.4, 2.0), st.floats(-3, 3), st.floats(0.1, 0.9))
def test_hardy_power_laws(beta, p, c, jump):
    t = _geo(N=200)
    g = c * t**p + np.where(t > jump, 1.0, 0.0)
    assert hardy_check(g, t, beta).verdict == "pass"


def test_gfs_requires_calibration(su2):
    g = Grid(4)
    with pytest.raises(ConfigurationError):
        gfs_check(FormField(1, g, su2), FormField(1, g, su2), None)


def test_gfs_trivial_cases(su2, u1, rng):
    cal = GFSCalibration(0.5, 0.33, 1.0, 27 / 4 * 0.5**6, 0, 1, 8, 2 * np.pi, "SU2", 1.5)
    g = Grid(8)
    omega = FormField(1, g, su2)
    omega.data[:] = 1.0
    A0 = FormField.zeros(1, g, su2)
    lhs, rhs, lam = gfs_sides(omega, A0, cal.gamma)
    assert lam == 1.0 and lhs == pytest.approx(0.5 * rhs)
    # abelian, A = 0: the flat identity gives a factor-two margin
    w = random_form(1, g, u1, rng)
    e = gfs_check(w, FormField.zeros(1, g, u1), cal)
    assert e.verdict == "pass" and e.lhs == pytest.approx(0.5 * e.rhs)


def test_calibration_is_reproducible(su2):
    a = calibrate_gfs(Grid(8), su2, seed=11, n_fields=20)
    b = calibrate_gfs(Grid(8), su2, seed=11, n_fields=20)
    assert a == b and a.run_id == b.run_id
    assert a.gamma == pytest.approx(27 / 4 * a.kappa**6 * a.commutator_bound**4)
    assert a.kappa == pytest.approx(1.5 * a.kappa_measured)
    assert GFSCalibration.from_dict(json.loads(json.dumps(a.to_dict()))) == a
    assert calibrate_gfs(Grid(8), su2, seed=12, n_fields=20).run_id != a.run_id


def test_gfs_nonabelian_sweep(su2):
    cal = calibrate_gfs(Grid(8), su2, seed=3, n_fields=40)
    rng = np.random.default_rng(5)
    g = Grid(8)
    for i in range(10):
        from ymlab.lattice_forms import spectral_random_field

        om = spectral_random_field(int(rng.integers(0, 4)), g, su2, 1.0, rng)
        A = spectral_random_field(1, g, su2, 1.0, rng, rng.uniform(0, 3))
        assert gfs_check(om, A, cal).verdict == "pass"


def test_spatial_identities_abelian_exact(u1, rng):
    g = Grid(8)
    A, w = random_form(1, g, u1, rng), random_form(1, g, u1, rng)
    res = spatial_identity_residuals(A, w)
    scale = l2_norm(w) / g.h**4
    assert all(v < 1e-10 * scale for v in res.values())


def test_energy_balance_fourth_order():
    A, w = smooth_su2_pair(8)
    totals = []
    for N in (4, 8):
        traj = ym_flow(A, TimeGrid.uniform(0.2, N))
        st_ = solve_augmented(w, traj)
        totals.append(np.sum(np.abs(energy_balance(st_, traj, "intid35"))))
    assert totals[0] / totals[1] >= 12
    with pytest.raises(InvalidInput):
        energy_balance(st_, traj, "nope")


def test_identity_suite_abelian(u1, rng):
    g = Grid(8)
    snaps = {8: (random_form(1, g, u1, rng), random_form(1, g, u1, rng))}
    rep = identity_suite(IdentityArtifacts(snaps))
    assert rep.passed and len(rep.entries) == 4
