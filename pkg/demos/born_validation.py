"""Born ion: closed-form transfer energy against finite-difference solves.

Run with ``python demos/born_validation.py [n ...]`` (default grids 33 and 65).
"""

import sys

from pbrom.grid import GridSpec
from pbrom.molecule import Molecule
from pbrom.postprocess import born_analytic, solvation_energy

ns = [int(a) for a in sys.argv[1:]] or [33, 65]
ion = Molecule([[0.0, 0.0, 0.0]], [1.0], [3.0])

ref = born_analytic(1.0, 3.0, 1.0, 78.54)
print(f"analytic (reference constant): {ref:9.3f} kJ/mol")
print(f"analytic (CODATA constant):    {born_analytic(1.0, 3.0, 1.0, 78.54, 'codata'):9.3f} kJ/mol")
print()
print("   n   h (A)    FDM kJ/mol   rel. error")
for n in ns:
    grid = GridSpec(n, 32.0)
    rep = solvation_energy(ion, grid, 1.0, 78.54, mu=0.0)
    e = rep.total_energy_kJ_per_mol
    print(f"{n:4d}  {grid.h:6.3f}  {e:11.3f}   {abs(e - ref) / abs(ref):.2e}")
