import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvpolar import fixtures
from nvpolar.coherence import (
    CoherenceSeries,
    GridKind,
    abs_factor_doubleprime,
    abs_factor_prime,
    build_grid,
    coherence,
    dressed_spins,
    prime_envelope,
    sample_series,
    series_on_grid,
    single_spin_factor,
)
from nvpolar.hyperfine import CouplingRow, DressedSpin, dress, larmor_frequency
from nvpolar.lattice import EnvironmentRealization, Spin, set_polarizations

coupling = st.floats(-2, 2, allow_nan=False)
polar = st.floats(-1, 1)
omegas = st.floats(0.05, 60)


@st.composite
def spins(draw):
    omega = draw(omegas)
    row = CouplingRow(draw(coupling), draw(coupling), draw(coupling))
    if math.sqrt(row.Azx**2 + row.Azy**2 + (omega + row.Azz) ** 2) < 1e-6:
        row = CouplingRow(row.Azx + 0.1, row.Azy, row.Azz)
    return dress(row, omega, draw(polar)), omega


def eq11_modulus(spin, t):
    """|+-a sin(w_k t/2) -+ i p cos(w_k t/2)| evaluated directly."""
    return abs(complex(spin.a_k * math.sin(spin.omega_k * t / 2), -spin.p_k * math.cos(spin.omega_k * t / 2)))


def eq15_modulus(spin, t):
    return abs(complex(math.cos(spin.omega_k * t / 2), spin.p_k * spin.a_k * math.sin(spin.omega_k * t / 2)))


def test_factor_at_zero():
    assert single_spin_factor(0.0, DressedSpin(3.0, 0.4, 0.7), 2.0) == 1 + 0j


@given(st.floats(0, 500), omegas, polar)
def test_decoupled_spin_is_identity(t, omega, p):
    L = single_spin_factor(t, DressedSpin(omega, 1.0, p), omega)
    assert abs(L - 1) < 1e-12


@given(spins(), st.floats(0, 1000))
def test_factor_bounded(sp, t):
    spin, omega = sp
    assert abs(single_spin_factor(t, spin, omega)) <= 1 + 1e-12


@given(spins(), st.floats(0, 1000))
def test_polarization_sign_conjugates(sp, t):
    spin, omega = sp
    flipped = DressedSpin(spin.omega_k, spin.a_k, -spin.p_k)
    assert single_spin_factor(t, flipped, omega) == pytest.approx(np.conj(single_spin_factor(t, spin, omega)), abs=1e-15)


@given(spins(), st.integers(0, 1000))
def test_prime_grid_identity(sp, n):
    spin, omega = sp
    t = 2 * math.pi / omega * (n + 0.5)
    ref = abs(single_spin_factor(t, spin, omega))
    assert abs_factor_prime(spin, t) == pytest.approx(ref, abs=1e-12)
    assert abs_factor_prime(spin, t) == pytest.approx(eq11_modulus(spin, t), abs=1e-12)


@given(spins(), st.integers(0, 1000))
def test_doubleprime_grid_identity(sp, n):
    spin, omega = sp
    t = 2 * math.pi / omega * n
    assert abs_factor_doubleprime(spin, t) == pytest.approx(abs(single_spin_factor(t, spin, omega)), abs=1e-12)
    assert abs_factor_doubleprime(spin, t) == pytest.approx(eq15_modulus(spin, t), abs=1e-12)
    lo = abs(spin.a_k * spin.p_k)
    assert lo - 1e-15 <= abs_factor_doubleprime(spin, t) <= 1 + 1e-15


@given(spins(), st.integers(0, 10_000))
def test_grid_identity_floor_grows_with_index(sp, n):
    # a double t' misses the node by ~omega * ulp(t) / 2, linear in n
    spin, omega = sp
    for offset, closed in ((0.5, abs_factor_prime), (0.0, abs_factor_doubleprime)):
        t = 2 * math.pi / omega * (n + offset)
        assert abs(abs(single_spin_factor(t, spin, omega)) - closed(spin, t)) <= 2e-15 * (n + 1) + 1e-14


def test_abs_factor_nodes():
    spin = DressedSpin(2.0, 0.9, 0.6)
    assert abs_factor_prime(spin, 0.0) == pytest.approx(0.6)
    assert abs_factor_prime(spin, math.pi / 2.0) == pytest.approx(0.9)
    assert abs_factor_doubleprime(spin, 0.0) == 1.0
    assert abs_factor_doubleprime(spin, math.pi / 2.0) == pytest.approx(0.54)


@pytest.mark.parametrize("a,p", [(0.9, 0.6), (0.5, 0.8), (-0.7, 0.3)])
def test_prime_range_law(a, p):
    omega = 10.71
    spin = DressedSpin(11.3, a, p)
    t = 2 * math.pi / omega * (np.arange(10_001) + 0.5)
    vals = np.array([abs(single_spin_factor(ti, spin, omega)) for ti in t[:2000]])
    vals = np.concatenate([vals, abs_factor_prime(spin, t[2000:])])
    lo = min(abs(a), abs(p))
    assert vals.min() >= lo - 1e-12
    assert vals.min() - lo < 1e-3


def test_build_grid():
    g = build_grid("t_prime", 10.71, 2.0)
    # (2 pi / 10.71)(n + 1/2), evaluated by hand
    assert g.times[:3] == pytest.approx([0.29333264739400494, 0.8799979421820148, 1.4666632369700248], abs=1e-12)
    assert build_grid("t_prime", 21.42, 2.0).times[:3] == pytest.approx(g.times[:3] / 2)
    assert build_grid("t_doubleprime", 3.3, 10).times[0] == 0.0
    assert build_grid("continuous", 1.0, 1.0, dt=0.25).times == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        build_grid("t_prime", 0.0, 10)
    with pytest.raises(ValueError):
        build_grid("bogus", 1.0, 10)


@given(st.floats(0.1, 100), st.floats(1, 500), st.sampled_from(["t_prime", "t_doubleprime"]))
def test_grid_times_are_locked(omega, t_max, kind):
    t = build_grid(kind, omega, t_max).times
    if len(t) == 0:
        assert kind == "t_prime" and np.pi / omega > t_max
        return
    assert np.all(np.diff(t) > 0)
    assert t[-1] <= t_max * (1 + 1e-12)
    half = 0.5 * omega * t
    if kind == "t_prime":
        assert np.max(np.abs(np.cos(half))) < 1e-9
    else:
        assert np.max(np.abs(np.sin(half))) < 1e-9


def test_coherence_basics(table1_p08):
    assert coherence(0.0, table1_p08) == 0.5
    one = EnvironmentRealization((Spin(CouplingRow(0.2, -0.1, 0.3), 0.7),), B_z=0.5)
    omega = larmor_frequency(0.5)
    (spin,) = dressed_spins(one)
    for t in (0.3, 7.1, 150.0):
        assert coherence(t, one) == pytest.approx(0.5 * single_spin_factor(t, spin, omega), abs=1e-15)


def test_unpolarized_is_real_on_grids(table1):
    for kind in ("t_prime", "t_doubleprime"):
        s = series_on_grid(table1, None, kind, 400.0)
        assert np.max(np.abs(s.rho01.imag)) < 1e-12


def test_free_phase_flag_keeps_modulus(table1_p08):
    t = np.linspace(0, 50, 301)
    plain = coherence(t, table1_p08)
    phased = coherence(t, table1_p08, include_free_phase=True)
    assert np.abs(phased) == pytest.approx(np.abs(plain), abs=1e-15)
    assert not np.allclose(phased, plain)


def test_missing_field_is_an_error(table1):
    with pytest.raises(ValueError):
        coherence(1.0, table1.with_field(1.0).__class__(table1.spins))


@pytest.mark.parametrize("p,floor", [(0.8, 8.39e-2), (0.6, 8.40e-3)])
def test_fig1_floors(table1, p, floor):
    s = series_on_grid(set_polarizations(table1, p), None, "t_prime", 1600.0)
    assert 0.5 * p**8 == pytest.approx(floor, abs=5e-5)
    assert 2 * s.abs.min() >= p**8


def test_series_consistency_and_empty(table1_p08):
    grid = build_grid("t_prime", 10.71, 0.1)
    empty = sample_series(table1_p08, None, grid)
    assert len(empty) == 0
    s = series_on_grid(table1_p08, None, "t_prime", 300.0)
    assert s.abs == pytest.approx(np.abs(s.rho01))
    assert np.all(s.abs <= 0.5 + 1e-15)
    assert np.all(np.diff(s.t) > 0)
    assert s.samples[0][2] == pytest.approx(abs(s.rho01[0]))
    again = series_on_grid(table1_p08, None, "t_prime", 300.0)
    assert np.array_equal(s.rho01, again.rho01)


def test_series_matches_envelope_on_prime_grid(table1_p08):
    s = series_on_grid(table1_p08, None, "t_prime", 800.0)
    assert s.abs == pytest.approx(prime_envelope(s.t, table1_p08), abs=1e-12)


def test_series_io_roundtrip(tmp_path, table1_p08):
    s = series_on_grid(table1_p08, None, "t_doubleprime", 100.0)
    s.write(tmp_path / "s")
    back = CoherenceSeries.read(tmp_path / "s")
    assert back.grid.kind is GridKind.T_DOUBLEPRIME
    assert back.rho01 == pytest.approx(s.rho01, rel=1e-8, abs=1e-12)
    assert back.env_fingerprint == s.env_fingerprint
    assert back.polarizations == s.polarizations
    assert back.constants == s.constants


def test_tables_2_to_4_load():
    for name in fixtures.NAMES:
        env = fixtures.load(name, 3.0)
        assert env.n_spins == 8
    fixtures.verify()
