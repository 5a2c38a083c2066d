import io

import numpy as np
import pytest
from scipy import integrate

from pbrom.discretization import build_operator
from pbrom.errors import GridError
from pbrom.grid import GridSpec, spline_surface_value
from pbrom.molecule import Molecule
from pbrom.postprocess import (
    EnergyReport,
    born_analytic,
    electrostatic_energy,
    extract_slice,
    solvation_energy,
    write_slice_csv,
)
from pbrom.solver import solve_spd

KB, NA = 1.380649e-23, 6.02214076e23


def test_unit_potential_energy(constants):
    g = GridSpec(9, 8.0)
    atom = Molecule([[0.2, -0.1, 0.3]], [1.0], [1.0])
    rep = electrostatic_energy(np.full(g.shape, 2.0), atom, g, constants)
    assert rep.total_energy_kT == pytest.approx(1.0, rel=1e-14)
    assert rep.total_energy_kJ_per_mol == pytest.approx(KB * 298.15 * NA / 1000, rel=1e-12)
    assert rep.total_energy_kJ_per_mol == pytest.approx(2.479, abs=1e-3)
    assert rep.total_energy_kJ_per_mol == rep.total_energy_kT * constants.kT_to_kJ_per_mol


def test_energy_sign_symmetry_and_zero(globule, constants):
    g = GridSpec.around(globule, 17, box_length=60.0)
    u = np.random.default_rng(0).standard_normal(g.shape)
    flipped = Molecule(globule.positions, -globule.charges, globule.radii)
    a = electrostatic_energy(u, globule, g, constants).total_energy_kT
    b = electrostatic_energy(-u, flipped, g, constants).total_energy_kT
    assert a == pytest.approx(b, rel=1e-14)
    assert electrostatic_energy(np.zeros(g.shape), globule, g, constants).total_energy_kT == 0.0


def test_energy_shape_check(globule):
    g = GridSpec.around(globule, 17, box_length=60.0)
    with pytest.raises(GridError):
        electrostatic_energy(np.zeros((5, 5, 5)), globule, g)


def test_energy_report_json():
    rep = EnergyReport(1.0, 2.5, {"n": 9})
    assert '"total_energy_kJ_per_mol": 2.5' in rep.to_json()


def test_born_reference_value():
    assert born_analytic(1, 3, 1.0, 78.54) == pytest.approx(-230.62, abs=0.01)
    assert born_analytic(1, 3, 2.0, 2.0) == 0.0
    assert born_analytic(2, 3, 1.0, 78.54) == pytest.approx(4 * born_analytic(1, 3, 1.0, 78.54), rel=1e-15)
    with pytest.raises(ValueError):
        born_analytic(1, 0.0)


def test_born_codata_value():
    e, eps0 = 1.602176634e-19, 8.8541878128e-12
    k = e**2 * NA / (8 * np.pi * eps0 * 1e-10) / 1000
    assert born_analytic(1, 3, 1.0, 78.54, "codata") == pytest.approx(k / 3 * (1 / 78.54 - 1), rel=1e-9)
    assert born_analytic(1, 3, 1.0, 78.54, 700.0) == pytest.approx(700 / 3 * (1 / 78.54 - 1))


def smoothed_born_quadrature(q, radius, window, eps_in, eps_out):
    """Born energy of the smoothed harmonic-blend sphere by radial quadrature.

    With spherical symmetry the displacement field is q / (4 pi r^2) whatever
    eps(r) is, so the energy difference reduces to a 1-D integral of
    (1/eps(r) - 1/eps_in) / r^2 = (1/eps_out - 1/eps_in) chi(r) / r^2.
    """
    e, eps0 = 1.602176634e-19, 8.8541878128e-12
    k = e**2 * NA / (8 * np.pi * eps0 * 1e-10) / 1000
    lo, hi = radius - window, radius + window
    chi = lambda r: float(spline_surface_value(r, radius, window))
    inner = integrate.quad(lambda r: chi(r) / r**2, lo, hi, epsabs=0, epsrel=1e-12)[0]
    return k * q * q * (1 / eps_out - 1 / eps_in) * (inner + 1 / hi)


def test_born_fdm_against_radial_quadrature(born_ion, constants):
    ref = smoothed_born_quadrature(1.0, 3.0, 0.3, 1.0, 78.54)
    assert ref == pytest.approx(-229.07, abs=0.01)
    rep = solvation_energy(born_ion, GridSpec(65, 32.0), 1.0, 78.54, mu=0.0, constants=constants)
    assert rep.total_energy_kJ_per_mol == pytest.approx(ref, rel=2e-3)
    meta = rep.metadata
    assert meta["G_hetero_kJ_per_mol"] - meta["G_homo_kJ_per_mol"] == pytest.approx(
        rep.total_energy_kJ_per_mol, rel=1e-12
    )


def test_no_contrast_no_solvation(globule, constants):
    g = GridSpec.around(globule, 17, box_length=60.0)
    rep = solvation_energy(globule, g, 2.0, 2.0, constants=constants)
    scale = abs(rep.metadata["G_homo_kJ_per_mol"])
    assert abs(rep.total_energy_kJ_per_mol) <= 1e-9 * scale


def test_solvation_grid_mismatch(born_ion):
    g = GridSpec(17, 32.0)
    other = build_operator(born_ion, GridSpec(19, 32.0), 1.0, 78.54)
    with pytest.raises(GridError):
        solvation_energy(born_ion, g, 1.0, 78.54, op_hetero=other)


def test_slice_of_constant_field():
    u = np.full((7, 7, 7), 3.5)
    plane, a, b = extract_slice(u, axis=0, index=2)
    assert plane.shape == (7, 7) and np.all(plane == 3.5)
    with pytest.raises(IndexError):
        extract_slice(u, axis=2, index=7)
    with pytest.raises(ValueError):
        extract_slice(u, axis=3)


def test_slice_csv_layout():
    g = GridSpec(5, 4.0)
    u = np.arange(125, dtype=float).reshape(5, 5, 5)
    plane, a, b = extract_slice(u, 2, 1, g)
    text = write_slice_csv(plane, a, b)
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,value"
    assert len(lines) == 26
    x, y, v = map(float, lines[2].split(","))
    assert (x, y, v) == (-2.0, -1.0, u[0, 1, 1])
    buf = io.StringIO()
    write_slice_csv(plane, a, b, buf)
    assert buf.getvalue() == text


def _born_field(born_ion, mu, n=33):
    op = build_operator(born_ion, GridSpec(n, 32.0), 1.0, 78.54)
    u, _ = solve_spd(op.matrix(mu), op.rhs(mu), tol=1e-10)
    return op, op.lift(u, mu)


def _radial_deviation(born_ion, n, lo, hi, constants):
    op, u = _born_field(born_ion, 0.0, n)
    g = op.grid
    plane, a, b = extract_slice(u, 2, n // 2, g)
    R = np.hypot(*np.meshgrid(a, b, indexing="ij"))
    shell = (R >= lo) & (R < hi)
    # outside the ion the exact potential is the bare Coulomb field in water
    ref = constants.bjerrum_scale / (78.54 * R[shell])
    return np.abs(plane[shell] / ref - 1).max(), plane


def test_born_slice_follows_radial_profile(born_ion, constants):
    far, plane = _radial_deviation(born_ion, 33, 8.0, 16.0, constants)
    assert far <= 1e-2
    np.testing.assert_allclose(plane, plane.T, rtol=1e-8, atol=1e-12 * np.abs(plane).max())
    coarse, _ = _radial_deviation(born_ion, 33, 5.0, 8.0, constants)
    fine, _ = _radial_deviation(born_ion, 65, 5.0, 8.0, constants)
    assert fine < 0.5 * coarse


def test_screening_monotone_in_solvent(born_ion):
    peaks = []
    for mu in (0.0, 0.05, 0.15, 0.5):
        op, u = _born_field(born_ion, mu)
        solvent = op.maps.ion_access == 1.0
        peaks.append(np.abs(u[solvent]).max())
    assert all(a > b for a, b in zip(peaks, peaks[1:]))


def test_lower_slice_peak_decreases(globule):
    g = GridSpec.around(globule, 33, box_length=60.0)
    op = build_operator(globule, g)
    peaks = []
    for mu in (0.0, 0.05, 0.15, 0.5):
        u, _ = solve_spd(op.matrix(mu), op.rhs(mu), tol=1e-10)
        plane, _, _ = extract_slice(op.lift(u, mu), 2, 1, g)
        peaks.append(np.abs(plane).max())
    assert all(a > b for a, b in zip(peaks, peaks[1:]))
