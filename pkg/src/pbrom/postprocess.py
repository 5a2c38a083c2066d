"""Energies, Born reference values and plane slices of grid solutions."""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import constants as sc

from .discretization import build_operator, interpolate_at_atoms
from .errors import GridError
from .grid import EPS_IN, EPS_OUT, build_constants
from .solver import solve_spd

__all__ = [
    "EnergyReport",
    "electrostatic_energy",
    "solvation_energy",
    "born_analytic",
    "extract_slice",
    "write_slice_csv",
    "BORN_REFERENCE_COEFFICIENT",
]

# kJ/mol * Angstrom. The tabulated Born reference for a unit charge in a
# 3 A sphere (-230.62 kJ/mol between eps 1 and 78.54) corresponds to
# -691.85 q^2/r, i.e. this value of N_A e^2 / (8 pi eps0) after dividing out
# (1 - 1/78.54). CODATA gives 694.68; see born_analytic.
BORN_REFERENCE_COEFFICIENT = 691.85 / (1.0 - 1.0 / 78.54)


def _codata_born_coefficient():
    return sc.e**2 * sc.N_A / (8.0 * np.pi * sc.epsilon_0 * 1e-10) / 1000.0


@dataclass
class EnergyReport:
    total_energy_kT: float
    total_energy_kJ_per_mol: float
    metadata: dict = field(default_factory=dict)

    def to_json(self, **kwargs):
        return json.dumps(asdict(self), **kwargs)


def electrostatic_energy(u, molecule, grid, constants=None, **metadata):
    """``G = 1/2 sum_i z_i u(x_i)`` with ``u`` read off by the spreading weights.

    Parameters
    ----------
    u : (n, n, n) array
        Potential in ``k_B T / e`` on the full grid, boundary included.
    """
    constants = constants or build_constants()
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise GridError(f"field shape {u.shape} does not match grid {grid.shape}")
    phi = interpolate_at_atoms(u, molecule, grid)
    g_kT = 0.5 * float(np.dot(molecule.charges, phi))
    meta = {"n": grid.n, "box_length": grid.box_length, "center": list(grid.center)}
    meta.update(metadata)
    return EnergyReport(g_kT, g_kT * constants.kT_to_kJ_per_mol, meta)


def _solve_full(op, mu, tol, solver_kwargs):
    A, f = op.matrix(mu), op.rhs(mu)
    u, report = solve_spd(A, f, tol=tol, **solver_kwargs)
    return op.lift(u, mu), report


def solvation_energy(
    molecule,
    grid,
    eps_in=EPS_IN,
    eps_out=EPS_OUT,
    mu=0.0,
    constants=None,
    tol=1e-10,
    op_hetero=None,
    op_homo=None,
    **options,
):
    """Polar solvation energy ``G_hetero - G_homo`` from two full solves.

    The homogeneous system has ``eps_in`` everywhere, boundary data
    included, so the grid self-energy of the spread charges cancels in the
    difference. Remaining keyword arguments go to ``build_operator``
    (``stern_radius``, ``window``, ``blend``) or, under ``solver``, to
    :func:`solve_spd`.
    """
    constants = constants or build_constants()
    solver_kwargs = dict(options.pop("solver", {}) or {})
    if op_hetero is None:
        op_hetero = build_operator(molecule, grid, eps_in, eps_out, constants=constants, **options)
    if op_homo is None:
        op_homo = build_operator(molecule, grid, eps_in, eps_in, constants=constants, **options)
    if op_hetero.grid != grid or op_homo.grid != grid:
        raise GridError("operators were assembled on a different grid")
    u_het, rep_het = _solve_full(op_hetero, mu, tol, solver_kwargs)
    u_hom, rep_hom = _solve_full(op_homo, mu, tol, solver_kwargs)
    g_het = electrostatic_energy(u_het, molecule, grid, constants)
    g_hom = electrostatic_energy(u_hom, molecule, grid, constants)
    d_kT = g_het.total_energy_kT - g_hom.total_energy_kT
    meta = {
        "n": grid.n,
        "box_length": grid.box_length,
        "center": list(grid.center),
        "mu": mu,
        "eps_in": eps_in,
        "eps_out": eps_out,
        "G_hetero_kJ_per_mol": g_het.total_energy_kJ_per_mol,
        "G_homo_kJ_per_mol": g_hom.total_energy_kJ_per_mol,
        "solver_hetero": rep_het.as_dict(),
        "solver_homo": rep_hom.as_dict(),
    }
    return EnergyReport(d_kT, d_kT * constants.kT_to_kJ_per_mol, meta)


def born_analytic(q, r, eps_in=1.0, eps_out=EPS_OUT, coefficient="reference"):
    """Born ion transfer energy in kJ/mol.

    ``coefficient="reference"`` uses the prefactor behind the tabulated
    -230.62 kJ/mol value; ``"codata"`` uses ``N_A e^2 / (8 pi eps0)`` from
    CODATA (about 0.9 % smaller in magnitude). A float is taken as the
    prefactor itself, in kJ/mol * Angstrom.
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    if coefficient == "reference":
        k = BORN_REFERENCE_COEFFICIENT
    elif coefficient == "codata":
        k = _codata_born_coefficient()
    else:
        k = float(coefficient)
    return k * q * q / r * (1.0 / eps_out - 1.0 / eps_in)


def extract_slice(u, axis=2, index=None, grid=None):
    """Plane of ``u`` normal to ``axis`` at ``index`` (default: middle).

    Returns ``(plane, a, b)`` where ``a`` and ``b`` are the coordinates of
    the two remaining axes (grid indices if ``grid`` is omitted).
    """
    u = np.asarray(u)
    if u.ndim != 3:
        raise ValueError("expected a 3-D field")
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
    n_axis = u.shape[axis]
    if index is None:
        index = n_axis // 2
    if not 0 <= index < n_axis:
        raise IndexError(f"slice index {index} outside [0, {n_axis})")
    plane = np.take(u, index, axis=axis)
    rest = [k for k in range(3) if k != axis]
    if grid is None:
        a, b = (np.arange(u.shape[k], dtype=float) for k in rest)
    else:
        a, b = (grid.axis(k) for k in rest)
    return plane, a, b


def write_slice_csv(plane, a, b, fh=None):
    """Write a plane as ``x,y,value`` rows in row-major order."""
    out = fh if fh is not None else io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["x", "y", "value"])
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(plane[i, j]))])
    if fh is None:
        return out.getvalue()
    return None
