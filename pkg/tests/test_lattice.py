import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weylgrav.checks import fit_classical_pencil, plane_wave
from weylgrav.lattice import (FieldState, LatticeSpec, SiteId, acceleration, bloch_matrices,
                              build_lattice, site_index, site_of, stability_scan)
from weylgrav.potentials import tanh_interface, uniform_field, zero_field
from weylgrav.spectra import BlochPencil, quadratic_eigensolve


def test_default_beta_and_b_self_gain_vanishes():
    spec = LatticeSpec(3, 3)
    assert spec.beta == -8.0
    model = build_lattice(spec, zero_field(spec))
    t = model.gain_table
    b_self = (t.actuated == t.measured) & (t.actuated % 2 == 1) & (t.quantity == 0)
    assert not b_self.any()


def test_seventeen_gains_per_cell_on_periodic_grid():
    spec = LatticeSpec(3, 3, boundary="periodic")
    model = build_lattice(spec, uniform_field(spec, (0.5, 0.0)))
    counts = np.bincount(model.gain_table.actuated // 2, minlength=spec.ncells)
    assert np.all(counts == 17)


def test_gain_breakdown_per_cell():
    spec = LatticeSpec(3, 3, boundary="periodic")
    t = build_lattice(spec, uniform_field(spec, (0.5, 0.0))).gain_table
    on = t.actuated // 2 == 4
    a_side = on & (t.actuated % 2 == 0)
    b_side = on & (t.actuated % 2 == 1)
    assert a_side.sum() == 1 + 2 + 2 + 2   # self, t_y, V_x, t_x
    assert b_side.sum() == 2 + 4 + 2 + 2   # t_y, t_z, t_x, V_x


def test_chain_has_no_y_entries():
    spec = LatticeSpec(6, dimensionality="chain1d")
    model = build_lattice(spec, uniform_field(spec, 0.3))
    assert set(np.unique(model.gain_table.direction)) <= {-1, 0, 1}
    cells_a = model.gain_table.actuated // 2
    cells_m = model.gain_table.measured // 2
    assert np.all(np.abs(cells_a - cells_m) <= 1)


def test_chain_table_is_grid_table_without_y():
    grid = LatticeSpec(5, 1)
    chain = LatticeSpec(5, 1, dimensionality="chain1d")
    tg = build_lattice(grid, zero_field(grid)).gain_table
    tc = build_lattice(chain, zero_field(chain)).gain_table
    keep = tg.direction < 2
    g = sorted(e for e, k in zip(tg.entries(), keep) if k and e[0] != e[1])
    c = sorted(e for e in tc.entries() if e[0] != e[1])
    assert g == c
    # the self gain follows the coordination number
    assert LatticeSpec(5, 1, dimensionality="chain1d").stability_beta == -4.0


def test_zero_state_zero_acceleration():
    spec = LatticeSpec(4, 4)
    model = build_lattice(spec, uniform_field(spec, (0.7, 0.2)))
    assert np.all(acceleration(model, FieldState.zeros(spec)) == 0)


def test_single_displaced_a_site_sparsity():
    spec = LatticeSpec(5, 5)
    model = build_lattice(spec, zero_field(spec))
    u = np.zeros(spec.nsites)
    u[site_index(spec, SiteId(2, 2, "A"))] = 1.0
    acc = acceleration(model, FieldState(u, np.zeros_like(u)))
    hit = {site_of(spec, i) for i in np.flatnonzero(acc)}
    expected = {SiteId(2, 2, "A"), SiteId(1, 2, "A"), SiteId(3, 2, "A"),
                SiteId(2, 1, "A"), SiteId(2, 3, "A"), SiteId(2, 1, "B"), SiteId(2, 3, "B")}
    assert hit == expected


def test_site_index_roundtrip():
    spec = LatticeSpec(4, 3)
    for i in range(spec.nsites):
        assert site_index(spec, site_of(spec, i)) == i
    with pytest.raises(IndexError):
        site_index(spec, SiteId(4, 0, "A"))


def test_bloch_matrices_examples():
    spec = LatticeSpec(4, 4)
    M0, M1 = bloch_matrices(spec, (0.0, 0.0), (0.0, 0.0))
    assert np.allclose(M0, 4 * np.eye(2)) and np.allclose(M1, 0)
    w, _ = quadratic_eigensolve(BlochPencil(M0, M1))
    assert np.allclose(w, [-2, -2, 2, 2])
    M0, M1 = bloch_matrices(spec, (0.5, 0.0), (np.pi / 2, 0.0))
    assert np.allclose(M0, np.diag([5, 3]), atol=1e-14)
    assert np.allclose(M1, [[0.5, -1], [-1, 0.5]], atol=1e-14)


def test_bloch_matrices_parity():
    spec = LatticeSpec(4, 4)
    k = np.array([0.4, -1.1])
    M0p, M1p = bloch_matrices(spec, (0, 0), k)
    M0m, M1m = bloch_matrices(spec, (0, 0), -k)
    assert np.allclose(M1p, -M1m)
    assert np.allclose(M0p, M0m.conj())


def test_fitted_pencil_matches_closed_form_with_tilt():
    spec = LatticeSpec(8, 8, boundary="periodic")
    V = (0.3, -0.4)
    model = build_lattice(spec, uniform_field(spec, V))
    for j in range(3):
        k = (2 * np.pi * j / 8, 2 * np.pi * (j + 1) / 8)
        M0, M1 = fit_classical_pencil(model, k)
        R0, R1 = bloch_matrices(spec, V, k)
        assert np.allclose(M0, R0, atol=1e-12) and np.allclose(M1, R1, atol=1e-12)


def test_plane_wave_acceleration_equals_minus_m0():
    spec = LatticeSpec(6, 6, boundary="periodic")
    model = build_lattice(spec, uniform_field(spec, (0.5, 0.0)))
    k = (2 * np.pi / 6, 4 * np.pi / 6)
    eps = np.array([0.3 + 0.2j, -0.7 + 0.1j])
    z = plane_wave(spec, k, 0) * eps[0] + plane_wave(spec, k, 1) * eps[1]
    acc = acceleration(model, FieldState(z.real, np.zeros(spec.nsites)))
    M0, _ = bloch_matrices(spec, (0.5, 0.0), k)
    target = -(plane_wave(spec, k, 0) * (M0 @ eps)[0] + plane_wave(spec, k, 1) * (M0 @ eps)[1])
    assert np.allclose(acc, target.real, atol=1e-12)


def test_velocity_gains_skew_and_stiffness_symmetric():
    spec = LatticeSpec(6, 5)
    model = build_lattice(spec, uniform_field(spec, (0.8, -0.3)))
    assert abs(model.G + model.G.T).max() == 0
    assert abs(model.K - model.K.T).max() < 1e-15


def test_bond_tilt_keeps_g_skew_for_varying_field():
    spec = LatticeSpec(200, dimensionality="chain1d")
    field_ = tanh_interface(spec, 0.1, 100.0)
    assert abs(build_lattice(spec, field_).G + build_lattice(spec, field_).G.T).max() < 1e-15
    cell = build_lattice(LatticeSpec(200, dimensionality="chain1d", tilt_eval="cell"), field_)
    assert abs(cell.G + cell.G.T).max() > 1e-4


def test_mismatched_field_rejected():
    spec = LatticeSpec(4, 4)
    with pytest.raises(ValueError):
        build_lattice(spec, zero_field(LatticeSpec(3, 4)))


def test_stability_scan_examples():
    im, m0 = stability_scan(LatticeSpec(2, 2), (0, 0), 64)
    assert im < 1e-9 and m0 >= -1e-12
    _, m0 = stability_scan(LatticeSpec(2, 2, beta=0.0), (0, 0), 16)
    assert m0 < 0
    im2, m02 = stability_scan(LatticeSpec(2, 2), (2.0, 0.0), 16)
    assert np.isfinite(im2) and m02 >= -1e-12


@settings(max_examples=30, deadline=None)
@given(kx=st.floats(-np.pi, np.pi), ky=st.floats(-np.pi, np.pi),
       vx=st.floats(-2, 2), vy=st.floats(-2, 2))
def test_spectrum_symmetric_under_k_reversal(kx, ky, vx, vy):
    spec = LatticeSpec(4, 4)
    w1, _ = quadratic_eigensolve(BlochPencil.at(spec, (vx, vy), (kx, ky)))
    w2, _ = quadratic_eigensolve(BlochPencil.at(spec, (vx, vy), (-kx, -ky)))
    assert np.allclose(np.sort_complex(w1), np.sort_complex(-w2), atol=1e-8)
