import numpy as np
import pytest

from annealbench.instance_gen import GeneratorConfig, generate_usa_instance
from annealbench.spectrum import (
    critical_field,
    default_grid,
    full_spectrum,
    gap_at,
    gap_profile,
    golden_section_min,
    ground_state,
    load_profile,
    save_profile,
)
from annealbench.spin_core import dense_hamiltonian


def test_gap_at_full_driver_is_one_over_n(small_instances):
    # H[1] has levels -N, -N+2, ..., N: gap 2, bandwidth 2N
    for inst in small_instances:
        gap, w, e0, e1 = gap_at(inst, 1.0)
        assert gap == pytest.approx(1.0 / inst.n_spins, abs=1e-12)
        assert w == pytest.approx(2.0 * inst.n_spins)


def test_gap_at_problem_end(small_instances):
    for inst in small_instances:
        gap, w, e0, e1 = gap_at(inst, 0.0)
        nonzero = inst.diagonal[inst.diagonal > 0]
        assert e0 == 0.0
        assert gap == pytest.approx(nonzero.min() / inst.diagonal.max())


def test_profile_bounds(inst5):
    prof = gap_profile(inst5, default_grid(33))
    assert np.all(prof.gap > 0) and np.all(prof.gap <= 1)
    np.testing.assert_allclose(prof.raw_gap, prof.gap * prof.bandwidth)


def test_golden_section_on_parabola():
    x, fx = golden_section_min(lambda x: (x - 0.3141) ** 2, 0.0, 1.0, 1e-8)
    assert x == pytest.approx(0.3141, abs=1e-7)


def test_refined_minimum_matches_fine_grid():
    for seed in range(3):
        inst = generate_usa_instance(GeneratorConfig(6, seed=seed))
        crit = critical_field(gap_profile(inst))
        fine = np.linspace(0, 1, 2001)
        gaps = np.array([gap_at(inst, h)[0] for h in fine])
        k = int(np.argmin(gaps))
        assert crit.refined
        assert crit.h_c_delta == pytest.approx(fine[k], abs=6e-4)
        assert crit.min_gap <= gaps[k] + 1e-9


def test_critical_field_without_instance_uses_grid(inst5):
    prof = gap_profile(inst5, default_grid(17))
    prof.instance = None
    crit = critical_field(prof)
    assert not crit.refined and crit.h_c_delta == prof.h_grid[np.argmin(prof.gap)]


def test_ground_state_sparse_path_matches_dense():
    inst = generate_usa_instance(GeneratorConfig(9, seed=2))
    e0, v = ground_state(inst, 0.55)
    ev, vecs = np.linalg.eigh(dense_hamiltonian(inst, 0.55))
    assert e0 == pytest.approx(ev[0], abs=1e-9)
    assert abs(np.vdot(vecs[:, 0], v)) == pytest.approx(1.0, abs=1e-8)


def test_full_spectrum_sorted(inst5):
    ev = full_spectrum(inst5, 0.4)
    assert np.all(np.diff(ev) >= 0) and ev.size == 32


def test_grid_validation(inst5):
    with pytest.raises(ValueError):
        gap_profile(inst5, [0.5, 0.2])
    with pytest.raises(ValueError):
        gap_profile(inst5, [0.0, 1.5])


def test_profile_roundtrip(tmp_path, inst5):
    prof = gap_profile(inst5, default_grid(9))
    back = load_profile(save_profile(prof, tmp_path / "p.csv"), inst5)
    np.testing.assert_allclose(back.gap, prof.gap, rtol=1e-11)
    assert critical_field(back).h_c_delta == pytest.approx(critical_field(prof).h_c_delta, abs=1e-9)
