"""Mid-plane potential of the globule at several ionic strengths.

Writes ``slice_mu<value>.csv`` files (x, y, value) into the current directory
and prints how the far-field potential decays as screening grows.
"""

import os

import numpy as np

from pbrom.discretization import build_operator
from pbrom.grid import GridSpec
from pbrom.molecule import read_pqr
from pbrom.postprocess import extract_slice, write_slice_csv
from pbrom.solver import solve_spd

HERE = os.path.dirname(os.path.abspath(__file__))
mol = read_pqr(os.path.join(HERE, "..", "tests", "data", "globule.pqr"))
grid = GridSpec.around(mol, 33, box_length=60.0)
op = build_operator(mol, grid)

print("  mu (M)   max |u| on plane   u at 20 A from centre")
for mu in (0.0, 0.05, 0.1, 0.15):
    u, _ = solve_spd(op.matrix(mu), op.rhs(mu))
    plane, a, b = extract_slice(op.lift(u, mu), axis=2, grid=grid)
    with open(f"slice_mu{mu:.2f}.csv", "w") as fh:
        write_slice_csv(plane, a, b, fh)
    i = int(np.argmin(abs(a - (grid.center[0] + 20.0))))
    print(f"  {mu:5.2f}   {abs(plane).max():15.4f}   {plane[i, grid.n // 2]:18.5f}")
