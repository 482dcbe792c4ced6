import math

import numpy as np
import pytest

from nvpolar.hyperfine import PhysicalConstants
from nvpolar.lattice import (
    DIAMOND_LATTICE_CONSTANT,
    EmptyEnvironmentError,
    EnvironmentRealization,
    LatticeConfig,
    candidate_sites,
    crystal_to_nv_frame,
    generate_environment,
    generate_sites,
    nv_frame_rotation,
    read_environment,
    select_environment,
    set_polarizations,
    write_environment,
)

a = DIAMOND_LATTICE_CONSTANT


def brute_force_sites(radius):
    """All diamond sites within ``radius`` by explicit enumeration of conventional cells."""
    fcc = [(0, 0, 0), (0, .5, .5), (.5, 0, .5), (.5, .5, 0)]
    basis = [(0, 0, 0), (.25, .25, .25)]
    m = int(radius / a) + 2
    out = set()
    for i in range(-m, m + 1):
        for j in range(-m, m + 1):
            for k in range(-m, m + 1):
                for f in fcc:
                    for b in basis:
                        q = (i + f[0] + b[0], j + f[1] + b[1], k + f[2] + b[2])
                        if q in [(0, 0, 0), (.25, .25, .25)]:
                            continue
                        if a * math.sqrt(sum(c * c for c in q)) <= radius:
                            out.add(tuple(round(c * a, 9) for c in q))
    return out


def test_candidate_sites_match_enumeration():
    got = {tuple(round(c, 9) for c in r) for r in candidate_sites(1.0)}
    assert got == brute_force_sites(1.0)


def test_nearest_neighbour_distance():
    sites = candidate_sites(0.5)
    assert np.linalg.norm(sites, axis=1).min() == pytest.approx(a * math.sqrt(3) / 4)


def test_frame_is_right_handed_orthonormal():
    R = nv_frame_rotation()
    assert R @ R.T == pytest.approx(np.eye(3), abs=1e-15)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_axis_site_maps_to_z():
    r = crystal_to_nv_frame([a, a, a])
    assert r == pytest.approx([0, 0, math.sqrt(3) * a], abs=1e-12)


def test_abundance_zero_is_empty():
    with pytest.raises(EmptyEnvironmentError):
        generate_sites(LatticeConfig(abundance=0.0))


def test_abundance_one_returns_all():
    cfg = LatticeConfig(abundance=1.0, supercell_radius=0.8)
    assert len(generate_sites(cfg)) == len(brute_force_sites(0.8))


def test_determinism():
    cfg = LatticeConfig(seed=7, supercell_radius=2.0, abundance=0.05)
    assert np.array_equal(generate_sites(cfg), generate_sites(cfg))
    e1, e2 = generate_environment(cfg), generate_environment(cfg)
    assert e1.to_csv() == e2.to_csv()
    assert e1.fingerprint() == e2.fingerprint()


def test_exclusion_radius():
    sites = generate_sites(LatticeConfig(abundance=1.0, supercell_radius=1.0, exclusion_radius=0.5))
    assert np.linalg.norm(sites, axis=1).min() >= 0.5


def test_abundance_statistics():
    radius = 1.5
    n_sites = len(candidate_sites(radius))
    p = 0.011
    total = sum(len(generate_sites(LatticeConfig(seed=s, supercell_radius=radius, abundance=p))) for s in range(200))
    trials = 200 * n_sites
    sigma = math.sqrt(trials * p * (1 - p))
    assert abs(total - trials * p) < 3 * sigma


def test_config_validation():
    for kwargs in ({"abundance": 1.5}, {"supercell_radius": 0}, {"max_spins": 0}):
        with pytest.raises(ValueError):
            LatticeConfig(**kwargs)


def test_select_truncates_and_ranks():
    sites = generate_sites(LatticeConfig(seed=1, abundance=1.0, supercell_radius=0.6))[:20]
    env = select_environment(sites, config=LatticeConfig(max_spins=8))
    assert env.n_spins == 8
    assert all(s.p == 0 for s in env.spins)
    norms = [s.coupling.norm for s in env.spins]
    assert norms == sorted(norms, reverse=True)
    everything = select_environment(sites, config=LatticeConfig(max_spins=50, selection_rule="nearest"))
    dists = [s.coupling.r for s in everything.spins]
    assert len(dists) == 20 and np.all(np.diff(dists) > -1e-12)


@pytest.mark.parametrize("rule", ["strongest_coupling", "nearest"])
def test_closer_site_on_same_ray_ranks_first(rule):
    ray = np.array([0.3, -0.5, 0.7])
    env = select_environment(np.array([2 * ray, ray]), config=LatticeConfig(selection_rule=rule))
    assert env.spins[0].coupling.r == pytest.approx(np.linalg.norm(ray))


def test_set_polarizations(table1):
    env = set_polarizations(table1, 0.8)
    assert np.all(env.polarizations == 0.8)
    assert np.all(set_polarizations(env, 0).polarizations == 0)
    p = np.linspace(-1, 1, 8)
    assert np.array_equal(set_polarizations(env, p).polarizations, p)
    with pytest.raises(ValueError, match="index 3"):
        set_polarizations(env, [0, 0, 0, 1.2, 0, 0, 0, 0])
    with pytest.raises(ValueError, match="index 0"):
        set_polarizations(env, 1.2)
    with pytest.raises(ValueError):
        set_polarizations(env, [0.1, 0.2])


def test_csv_json_roundtrip(tmp_path):
    env = generate_environment(LatticeConfig(seed=11), PhysicalConstants())
    env = set_polarizations(env, np.linspace(0.1, 0.9, env.n_spins))
    csv_path, json_path = write_environment(env, tmp_path / "env")
    for path in (csv_path, json_path):
        back = read_environment(path)
        assert back.couplings == pytest.approx(np.round(env.couplings, 6), abs=5e-7)
        assert back.polarizations == pytest.approx(env.polarizations, abs=5e-7)
        assert back.to_csv() == env.to_csv()


def test_bad_header_rejected():
    with pytest.raises(ValueError):
        EnvironmentRealization.from_csv("k,r,Azx,Azy,Azz,p\n1,1,0,0,0,0\n")


def test_empty_environment_rejected():
    with pytest.raises(EmptyEnvironmentError):
        EnvironmentRealization(())
