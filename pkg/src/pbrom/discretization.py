"""Charge spreading, Debye-Hueckel boundary data and affine operator assembly.

The discrete system at ionic strength ``mu`` is

    (A1 + mu * A2) u = rho + b(mu)

on the ``(n-2)**3`` interior nodes. Boundary unknowns are eliminated: the
interior/boundary coupling is kept as a sparse matrix so that
``b(mu) = coupling @ g(mu)`` where ``g`` is the multiple Debye-Hueckel
potential on the boundary nodes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridError, PlacementError, SingularityError
from .grid import build_constants, build_maps

__all__ = [
    "cubic_bspline",
    "spreading_weights",
    "SourceField",
    "spread_charges",
    "interpolate_at_atoms",
    "mdh_potential",
    "BoundaryGenerator",
    "mdh_boundary",
    "BoundarySampler",
    "ParametricOperator",
    "assemble",
    "assemble_direct",
    "materialize",
    "build_operator",
]

SPREAD_MARGIN = 2.0


def cubic_bspline(t):
    """Centred cubic B-spline, support ``(-2, 2)``."""
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    inner = t < 1.0
    outer = (t >= 1.0) & (t < 2.0)
    out[inner] = 2.0 / 3.0 - t[inner] ** 2 + 0.5 * t[inner] ** 3
    out[outer] = (2.0 - t[outer]) ** 3 / 6.0
    return out


def spreading_weights(molecule, grid):
    """Per-atom 4-point stencils.

    Returns
    -------
    base : (m, 3) int array
        Index of the first of the four nodes along each axis.
    weights : (m, 3, 4) array
        Axis weights; the tensor product gives the 4x4x4 stencil.
    """
    s = grid.fractional(molecule.positions)
    lo_bad = s < SPREAD_MARGIN
    hi_bad = s > grid.n - 1 - SPREAD_MARGIN
    bad = np.flatnonzero(np.any(lo_bad | hi_bad, axis=1))
    if bad.size:
        i = int(bad[0])
        raise PlacementError(
            f"atom {i} at {tuple(molecule.positions[i])} is closer than "
            f"{SPREAD_MARGIN:g} grid spacings to the boundary",
            atom_index=i,
        )
    base = np.floor(s).astype(int) - 1
    offsets = base[:, :, None] + np.arange(4)
    weights = cubic_bspline(offsets - s[:, :, None])
    # renormalise away the last-ulp drift of the polynomial sum
    weights /= weights.sum(axis=2, keepdims=True)
    return base, weights


def _stencil_blocks(base, weights):
    for b, w in zip(base, weights):
        block = tuple(slice(b[k], b[k] + 4) for k in range(3))
        yield block, np.einsum("i,j,k->ijk", w[0], w[1], w[2])


@dataclass(frozen=True)
class SourceField:
    """Spread charge and the scaled right-hand side.

    ``charge`` holds the spread charge per node (sums to the molecular
    charge). ``rho`` is ``H * C * charge / H``: the cell-integrated source
    of the finite-volume equations, with ``C = 4 pi e^2 / (k_B T)``.
    """

    charge: np.ndarray
    rho: np.ndarray
    H: float
    C: float


def spread_charges(molecule, grid, constants=None):
    constants = constants or build_constants()
    charge = np.zeros(grid.shape)
    if len(molecule):
        base, weights = spreading_weights(molecule, grid)
        for q, (block, w3) in zip(molecule.charges, _stencil_blocks(base, weights)):
            charge[block] += q * w3
    C = constants.charge_scale
    return SourceField(charge=charge, rho=C * charge, H=grid.cell_volume, C=C)


def interpolate_at_atoms(u, molecule, grid):
    """Evaluate a full-grid field at atom centres with the spreading weights."""
    if u.shape != grid.shape:
        raise GridError(f"field shape {u.shape} does not match grid {grid.shape}")
    base, weights = spreading_weights(molecule, grid)
    return np.array([np.sum(u[block] * w3) for block, w3 in _stencil_blocks(base, weights)])


def mdh_potential(points, molecule, eps_w, constants, mu, chunk=4096):
    """Multiple Debye-Hueckel potential (units of k_B T / e) at ``points``."""
    if mu < 0:
        raise ValueError("ionic strength must be non-negative")
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    kappa = np.sqrt(constants.kappa2_per_ionic_strength * mu / eps_w)
    z = molecule.charges
    a = molecule.radii
    pre = constants.bjerrum_scale * z / (eps_w * (1.0 + kappa * a))
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        d = np.sqrt(((p[:, None, :] - molecule.positions[None, :, :]) ** 2).sum(axis=2))
        if np.any(d == 0.0):
            raise SingularityError("boundary node coincides with an atom centre")
        if kappa > 0:
            out[start:start + chunk] = (pre * np.exp(-kappa * (d - a)) / d).sum(axis=1)
        else:
            out[start:start + chunk] = (pre / d).sum(axis=1)
    return out


class BoundaryGenerator:
    """Debye-Hueckel Dirichlet data on a fixed, ordered set of boundary nodes.

    ``evaluations`` counts node-potential evaluations, which is how tests
    check that reduced-order queries never touch the whole boundary.
    """

    def __init__(self, molecule, eps_w, constants, node_positions, node_index=None):
        self.molecule = molecule
        self.eps_w = float(eps_w)
        self.constants = constants
        self.node_positions = np.asarray(node_positions, dtype=float).reshape(-1, 3)
        self.node_index = node_index
        self.evaluations = 0

    def __len__(self):
        return len(self.node_positions)

    def kappa(self, mu):
        return np.sqrt(self.constants.kappa2_per_ionic_strength * mu / self.eps_w)

    def values(self, mu, nodes=None):
        pts = self.node_positions if nodes is None else self.node_positions[nodes]
        self.evaluations += len(pts)
        return mdh_potential(pts, self.molecule, self.eps_w, self.constants, mu)


def mdh_boundary(bgen, mu):
    return bgen.values(mu)


class BoundarySampler:
    """Selected entries of ``b(mu)`` from their few feeding boundary nodes.

    Parameters
    ----------
    weights : sparse (k, m)
        Coupling rows for the ``k`` selected interior entries restricted to
        the ``m`` boundary nodes they touch.
    node_positions : (m, 3) array
    molecule, eps_w, constants
        Everything needed for the Debye-Hueckel sum.
    """

    def __init__(self, weights, node_positions, molecule, eps_w, constants):
        self.weights = sp.csr_matrix(weights)
        self.node_positions = np.asarray(node_positions, dtype=float).reshape(-1, 3)
        self.molecule = molecule
        self.eps_w = float(eps_w)
        self.constants = constants
        self.entry_evaluations = 0
        self.node_evaluations = 0

    def __len__(self):
        return self.weights.shape[0]

    def __call__(self, mu):
        self.entry_evaluations += self.weights.shape[0]
        self.node_evaluations += len(self.node_positions)
        g = mdh_potential(self.node_positions, self.molecule, self.eps_w, self.constants, mu)
        return self.weights @ g

    def subset(self, rows):
        w = self.weights[rows]
        used = np.unique(w.indices)
        return BoundarySampler(
            w[:, used], self.node_positions[used], self.molecule, self.eps_w, self.constants
        )


@dataclass
class ParametricOperator:
    """Affine full-order operator ``A(mu) = A1 + mu*A2`` with ``f = rho + b(mu)``."""

    A1: sp.csr_matrix
    A2: sp.dia_matrix
    rho_vec: np.ndarray
    coupling: sp.csr_matrix
    bgen: BoundaryGenerator
    grid: object
    constants: object
    maps: object = None
    source: object = None

    @property
    def size(self):
        return self.A1.shape[0]

    def matrix(self, mu):
        return (self.A1 + mu * self.A2).tocsr()

    def boundary_values(self, mu):
        return mdh_boundary(self.bgen, mu)

    def b(self, mu):
        return self.coupling @ self._coupled_values(mu)

    def _coupled_values(self, mu):
        # nodes with an all-zero coupling column (edges, corners) are skipped
        g = np.zeros(len(self.bgen))
        cols = self._coupled_nodes
        g[cols] = self.bgen.values(mu, cols)
        return g

    def __post_init__(self):
        self._coupled_nodes = np.flatnonzero(np.diff(self.coupling.tocsc().indptr))

    def rhs(self, mu):
        return self.rho_vec + self.b(mu)

    def sampler(self, rows):
        """A :class:`BoundarySampler` for the interior entries ``rows``."""
        w = self.coupling[np.asarray(rows, dtype=int)]
        used = np.unique(w.indices)
        return BoundarySampler(
            w[:, used],
            self.bgen.node_positions[used],
            self.bgen.molecule,
            self.bgen.eps_w,
            self.bgen.constants,
        )

    def lift(self, u_interior, mu):
        """Full-grid field: interior solution plus Dirichlet data."""
        n = self.grid.n
        u = np.empty(self.grid.shape)
        u[1:-1, 1:-1, 1:-1] = np.asarray(u_interior).reshape((n - 2,) * 3)
        u.reshape(-1)[self.bgen.node_index] = self.boundary_values(mu)
        return u


def _interior_numbering(n):
    m = n - 2
    full = -np.ones((n, n, n), dtype=np.int64)
    full[1:-1, 1:-1, 1:-1] = np.arange(m**3).reshape(m, m, m)
    return full


def _stencil(maps, grid, extra_diagonal):
    """COO triplets of the interior stencil and of the boundary coupling."""
    n = grid.n
    if maps.ion_access.shape != grid.shape:
        raise GridError(f"maps are for a {maps.ion_access.shape} grid, not {grid.shape}")
    H = grid.cell_volume
    inner = slice(1, -1)
    numbering = _interior_numbering(n)
    bnd_flat = np.flatnonzero(grid.boundary_mask().reshape(-1))
    bnd_number = -np.ones(n**3, dtype=np.int64)
    bnd_number[bnd_flat] = np.arange(bnd_flat.size)
    bnd_number = bnd_number.reshape(n, n, n)

    idx = numbering[inner, inner, inner]
    diag = np.array(extra_diagonal, dtype=float).reshape(idx.shape).copy()
    rows, cols, vals = [], [], []
    crow, ccol, cval = [], [], []
    spacing = grid.spacing
    for axis, eps in enumerate((maps.eps_x, maps.eps_y, maps.eps_z)):
        scale = H / spacing[axis] ** 2
        for side in (-1, +1):
            # face between node i and i+side along this axis
            face_sl = [inner, inner, inner]
            face_sl[axis] = slice(0, n - 2) if side < 0 else slice(1, n - 1)
            coef = scale * eps[tuple(face_sl)]
            diag += coef
            nb_sl = [inner, inner, inner]
            nb_sl[axis] = slice(0, n - 2) if side < 0 else slice(2, n)
            nb_int = numbering[tuple(nb_sl)]
            nb_bnd = bnd_number[tuple(nb_sl)]
            is_int = nb_int >= 0
            rows.append(idx[is_int])
            cols.append(nb_int[is_int])
            vals.append(-coef[is_int])
            is_bnd = ~is_int
            crow.append(idx[is_bnd])
            ccol.append(nb_bnd[is_bnd])
            cval.append(coef[is_bnd])
    N = idx.size
    rows.append(idx.reshape(-1))
    cols.append(idx.reshape(-1))
    vals.append(diag.reshape(-1))
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    coupling = sp.coo_matrix(
        (np.concatenate(cval), (np.concatenate(crow), np.concatenate(ccol))),
        shape=(N, bnd_flat.size),
    ).tocsr()
    A.sort_indices()
    coupling.sort_indices()
    return A, coupling, bnd_flat


def _kappa_diagonal(maps, grid, constants):
    inner = grid.interior_slice()
    return grid.cell_volume * constants.kappa2_per_ionic_strength * maps.ion_access[inner].reshape(-1)


def assemble(maps, source, bgen, grid, constants=None):
    """Build the :class:`ParametricOperator` for the given maps and source."""
    constants = constants or bgen.constants
    if source.rho.shape != grid.shape:
        raise GridError("source field and grid disagree in shape")
    A1, coupling, bnd_flat = _stencil(maps, grid, np.zeros(grid.n_interior))
    if len(bgen) != bnd_flat.size:
        raise GridError(
            f"boundary generator has {len(bgen)} nodes, grid has {bnd_flat.size}"
        )
    a2 = _kappa_diagonal(maps, grid, constants)
    A2 = sp.diags(a2, format="dia")
    rho_vec = source.rho[grid.interior_slice()].reshape(-1).copy()
    return ParametricOperator(
        A1=A1, A2=A2, rho_vec=rho_vec, coupling=coupling, bgen=bgen,
        grid=grid, constants=constants, maps=maps, source=source,
    )


def assemble_direct(maps, grid, constants, mu):
    """Assemble ``A(mu)`` in one pass with the mobile-ion term already on the diagonal."""
    inner = grid.interior_slice()
    kappa2 = constants.kappa2_per_ionic_strength * mu
    extra = grid.cell_volume * kappa2 * maps.ion_access[inner].reshape(-1)
    A, _, _ = _stencil(maps, grid, extra)
    return A


def materialize(op, mu):
    if mu < 0:
        raise ValueError("ionic strength must be non-negative")
    return op.matrix(mu), op.rhs(mu)


def boundary_generator(molecule, grid, eps_w, constants):
    coords = np.stack(np.meshgrid(*grid.coordinates(), indexing="ij"), axis=-1).reshape(-1, 3)
    flat = np.flatnonzero(grid.boundary_mask().reshape(-1))
    return BoundaryGenerator(molecule, eps_w, constants, coords[flat], node_index=flat)


def build_operator(
    molecule,
    grid,
    eps_in=None,
    eps_out=None,
    stern_radius=None,
    window=None,
    constants=None,
    blend=None,
):
    """Maps, source and affine operator for a molecule on a grid in one call."""
    from . import grid as _g

    constants = constants or build_constants()
    eps_in = _g.EPS_IN if eps_in is None else eps_in
    eps_out = _g.EPS_OUT if eps_out is None else eps_out
    stern_radius = _g.STERN_RADIUS if stern_radius is None else stern_radius
    window = _g.SPLINE_WINDOW if window is None else window
    blend = _g.BLEND if blend is None else blend
    maps = build_maps(molecule, grid, eps_in, eps_out, stern_radius, window, blend)
    source = spread_charges(molecule, grid, constants)
    bgen = boundary_generator(molecule, grid, eps_out, constants)
    return assemble(maps, source, bgen, grid, constants)
