import numpy as np
import pytest

from ymlab import heat_flow as hf
from ymlab.covariant_calculus import curvature
from ymlab.errors import ConfigurationError, DivergenceError, InconsistentState, IntegratorFailure, InvalidInput
from ymlab.heat_flow import (
    TIME_SERIES_COLUMNS,
    action_rho,
    action_rho_series,
    initial_behavior_series,
    stability_bound,
    stable_dt,
    time_series_rows,
    ym_flow,
    ym_step,
    ym_velocity,
)
from ymlab.lattice_forms import FormField, Grid, inner, l2_norm, spectral_random_field
from ymlab.quadrature import TimeGrid
from ymlab.spectral_oracle import helmholtz_split, spectral_heat

from conftest import smooth_su2_pair


def test_stability_bound():
    g = Grid(16)
    assert stability_bound(g) == pytest.approx(g.h**2 / 6)
    assert stable_dt(g) == pytest.approx(0.5 * g.h**2 / 6)


def test_step_guards(su2):
    A, _ = smooth_su2_pair(8)
    with pytest.raises(ConfigurationError):
        ym_step(A, 1.01 * stability_bound(A.grid))
    bad = A.copy()
    bad.data[0, 0, 0, 0, 0] = np.inf
    with pytest.raises(DivergenceError) as exc:
        with np.errstate(invalid="ignore"):
            ym_step(bad, 0.1 * stability_bound(A.grid), step_index=5)
    assert exc.value.index == 5


def test_flat_connection_is_stationary(su2):
    A = FormField.zeros(1, Grid(8), su2)
    traj = ym_flow(A, TimeGrid.uniform(0.1, 4))
    assert all(not np.any(f.data) for f in traj.fields)


def test_energy_dissipation_rate(su2):
    # d/dt ||B||^2 = -2 ||A'||^2 along the semi-discrete flow
    A, _ = smooth_su2_pair(8)
    dt = 1e-4
    B0 = curvature(A)
    A1 = ym_step(A, dt)
    rate = (l2_norm(curvature(A1)) ** 2 - l2_norm(B0) ** 2) / dt
    v0, v1 = ym_velocity(A, B0), ym_velocity(A1)
    mid = -(inner(v0, v0) + inner(v1, v1))
    assert rate == pytest.approx(mid, rel=1e-5)


def test_abelian_flow_matches_discrete_oracle(u1, rng):
    g = Grid(8)
    A0, _ = helmholtz_split(spectral_random_field(1, g, u1, 1.0, rng, kmax=2.0))
    traj = ym_flow(A0, TimeGrid.uniform(0.3, 6))
    ref = spectral_heat(A0, 0.3, kind="discrete")
    assert l2_norm(traj.fields[-1] - ref) / l2_norm(ref) < 1e-6


def test_trajectory_interpolation_and_cache(su2):
    A, _ = smooth_su2_pair(8)
    traj = ym_flow(A, TimeGrid.geometric(0.2, 6, 2.0))
    t = traj.times
    assert traj.at(t[3]) is traj.fields[3]
    mid = 0.5 * (t[3] + t[4])
    # Hermite interpolant is fourth-order; compare with a direct integration to the midpoint
    steps = 40
    ref = traj.fields[3]
    for _ in range(steps):
        ref = ym_step(ref, (mid - t[3]) / steps)
    assert l2_norm(traj.at(mid) - ref) / l2_norm(ref) < 1e-5
    assert traj.check_cache() == 0.0
    traj.curvatures[2] = traj.curvatures[2] * 1.01
    with pytest.raises(InconsistentState):
        traj.check_cache()
    with pytest.raises(InvalidInput):
        traj.at(1.0)
    A_mid, B_mid = traj.connection_and_curvature(mid)
    assert np.allclose(B_mid.data, curvature(A_mid).data)


def test_monotone_monitor_fires(monkeypatch, su2):
    A, _ = smooth_su2_pair(8)
    monkeypatch.setattr(hf, "ym_step", lambda A, dt, i=None: A * 1.01)
    with pytest.raises(IntegratorFailure):
        ym_flow(A, TimeGrid.uniform(0.1, 3))


def test_action_and_time_series(su2):
    A, _ = smooth_su2_pair(8)
    traj = ym_flow(A, TimeGrid.geometric(0.2, 8, 2.0))
    rho = action_rho_series(traj, 0.5)
    assert rho[0] == 0 and np.all(np.diff(rho) > 0)
    assert action_rho(traj, 0.5) == rho[-1]
    # rho_A <= (1/2) ||B_0||^2 T^(1-a)/(1-a) by monotonicity
    e0 = traj.energy()[0]
    assert rho[-1] <= 0.5 * e0**2 * 0.2**0.5 / 0.5
    rows = time_series_rows(traj, 0.5)
    assert len(rows) == len(traj) and len(rows[0]) == len(TIME_SERIES_COLUMNS)
    assert all(r[1] <= r[4] * (2 * np.pi) ** 1.5 for r in rows)
    ib = initial_behavior_series(traj, 0.5)
    assert np.all(np.diff(ib) >= 0)
    for a in (0.4, 1.0):
        with pytest.raises(InvalidInput):
            action_rho(traj, a)


def test_flow_rejects_bad_input(su2):
    with pytest.raises(InvalidInput):
        ym_flow(FormField.zeros(2, Grid(4), su2), TimeGrid.uniform(0.1, 2))
