import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ymlab import lie_algebra as la
from ymlab.covariant_calculus import coext_d, ext_d
from ymlab.errors import InvalidInput
from ymlab.lattice_forms import FormField, Grid, inner, l2_norm, spectral_random_field
from ymlab.spectral_oracle import (
    continuum_symbol,
    h_half_seminorm,
    helmholtz_split,
    maxwell_energy,
    rho_closed_form,
    rho_tail_fraction,
    spectral_heat,
    spectral_norm,
    symbol,
)

seeds = st.integers(0, 2**31)


def _field(seed, s=1.0, kmax=None, n=8):
    return spectral_random_field(1, Grid(n), la.u1(), s, np.random.default_rng(seed), kmax=kmax)


@given(seeds)
def test_parseval(seed):
    f = _field(seed)
    assert spectral_norm(f) == pytest.approx(l2_norm(f), rel=1e-12)


@given(seeds)
def test_helmholtz_split(seed):
    f = _field(seed)
    div_free, grad = helmholtz_split(f)
    assert np.allclose((div_free + grad).data, f.data)
    assert l2_norm(coext_d(div_free)) < 1e-10 * l2_norm(f) / Grid(8).h
    assert l2_norm(ext_d(grad)) < 1e-10 * l2_norm(f) / Grid(8).h
    assert abs(inner(div_free, grad)) < 1e-12 * l2_norm(f) ** 2


def test_single_mode_values(u1):
    g = Grid(16)
    f = FormField.from_function(1, g, u1, lambda K, X, Y, Z: (np.sin(X + Y) * (K == (2,)))[None])
    lam_c = 2.0
    lam_d = float(symbol(g)[1, 1, 0])
    assert lam_d == pytest.approx(2 * 4 * np.sin(g.h / 2) ** 2 / g.h**2)
    assert continuum_symbol(g)[1, 1, 0] == lam_c
    assert h_half_seminorm(f, "continuum") == pytest.approx(lam_c**0.25 * l2_norm(f))
    assert l2_norm(spectral_heat(f, 0.3, "continuum")) == pytest.approx(np.exp(-0.3 * lam_c) * l2_norm(f))
    assert maxwell_energy(f, 0.0) == pytest.approx(l2_norm(ext_d(f)) ** 2, rel=1e-12)
    assert rho_tail_fraction(f, 1.0, "continuum") == pytest.approx(0.004677734981047266, rel=1e-9)


def test_heat_semigroup_property():
    f = _field(4)
    a = spectral_heat(spectral_heat(f, 0.1), 0.2)
    assert np.allclose(a.data, spectral_heat(f, 0.3).data, atol=1e-13)
    assert spectral_heat(f, 0.0).data is not f.data
    with pytest.raises(InvalidInput):
        spectral_heat(f, -1.0)


def test_maxwell_energy_along_oracle():
    f, _ = helmholtz_split(_field(5, kmax=3))
    for t in (0.0, 0.2):
        assert maxwell_energy(f, t) == pytest.approx(l2_norm(ext_d(spectral_heat(f, t))) ** 2, rel=1e-10)


def test_rho_closed_form_limit():
    # rho(T -> inf) = (1/2) sqrt(pi/2) ||A0||_{H^1/2}^2 for a = 1/2
    f, _ = helmholtz_split(_field(6, kmax=3))
    limit = 0.5 * np.sqrt(np.pi / 2) * h_half_seminorm(f) ** 2
    assert rho_closed_form(f, 200.0) == pytest.approx(limit, rel=1e-12)
    assert rho_closed_form(f, 1.0) < limit


def test_h_half_rejects_mean(u1):
    f = FormField(1, Grid(8), u1)
    f.data[:] = 1.0
    with pytest.raises(InvalidInput):
        h_half_seminorm(f)


def test_nonabelian_rejected(su2):
    f = FormField(1, Grid(4), su2)
    for fn in (lambda: spectral_heat(f, 0.1), lambda: helmholtz_split(f), lambda: h_half_seminorm(f)):
        with pytest.raises(InvalidInput):
            fn()
    with pytest.raises(InvalidInput):
        symbol(Grid(4), "bogus")
