"""Reduced-order linearized Poisson-Boltzmann solver over ionic strength.

Finite-difference full-order model on a Cartesian grid, greedy reduced
basis with a residual error estimator, and discrete empirical interpolation
of the Debye-Hueckel boundary term.
"""

from .deim import DeimModel, build_deim, build_snapshots_b, deim_apply, deim_error_estimate, pod_truncate
from .discretization import ParametricOperator, assemble, build_operator, materialize, spread_charges
from .greedy import ReducedBasis, ReducedModel, TrainingSet, greedy_build, project, rom_solve
from .grid import GridSpec, build_constants, build_maps
from .molecule import Atom, Molecule, center_of_geometry, parse_pqr, read_pqr
from .postprocess import born_analytic, electrostatic_energy, solvation_energy
from .solver import solve_spd

__version__ = "0.1.0"
