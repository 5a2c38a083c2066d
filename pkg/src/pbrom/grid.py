"""Cartesian grid, physical constants and coefficient maps.

Lengths are in Angstrom, ionic strength in mol/L and potentials in units of
k_B T / e. The mobile-ion coefficient is stored as a pure accessibility map
in [0, 1]; the full coefficient at ionic strength ``mu`` is
``kappa2_per_ionic_strength * mu * ion_access``, which keeps the operator
exactly affine in ``mu``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants as sc

from .errors import GridError

__all__ = [
    "PhysicalConstants",
    "build_constants",
    "GridSpec",
    "CoefficientMaps",
    "spline_surface_value",
    "characteristic",
    "build_dielectric_maps",
    "build_ion_access_map",
    "build_maps",
    "blend_permittivity",
    "EPS_IN",
    "EPS_OUT",
    "SPLINE_WINDOW",
    "STERN_RADIUS",
    "TEMPERATURE",
]

EPS_IN = 2.0
EPS_OUT = 78.54
SPLINE_WINDOW = 0.3
STERN_RADIUS = 2.0
TEMPERATURE = 298.15
BLEND = "harmonic"

_ANGSTROM = 1e-10
_LITRE_IN_A3 = 1e27


@dataclass(frozen=True)
class PhysicalConstants:
    temperature: float
    bjerrum_scale: float  # e^2 / (k_B T) in Gaussian units, Angstrom
    kappa2_per_ionic_strength: float  # A^-2 M^-1
    kT_to_kJ_per_mol: float

    @property
    def charge_scale(self):
        """The source prefactor 4 pi e^2 / (k_B T) in Angstrom."""
        return 4.0 * np.pi * self.bjerrum_scale


def build_constants(temperature=TEMPERATURE):
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    kT = sc.k * temperature
    bjerrum = sc.e**2 / (4.0 * np.pi * sc.epsilon_0 * kT) / _ANGSTROM
    kappa2 = 8.0 * np.pi * bjerrum * sc.N_A / _LITRE_IN_A3
    return PhysicalConstants(
        temperature=float(temperature),
        bjerrum_scale=bjerrum,
        kappa2_per_ionic_strength=kappa2,
        kT_to_kJ_per_mol=kT * sc.N_A / 1000.0,
    )


@dataclass(frozen=True)
class GridSpec:
    """Uniform cubic grid with ``n`` points per axis spanning ``box_length``."""

    n: int
    box_length: float
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs an integer n >= 3, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def spacing(self):
        h = self.box_length / (self.n - 1)
        return (h, h, h)

    @property
    def h(self):
        return self.box_length / (self.n - 1)

    @property
    def cell_volume(self):
        dx, dy, dz = self.spacing
        return dx * dy * dz

    @property
    def origin(self):
        return np.asarray(self.center) - 0.5 * self.box_length

    @property
    def shape(self):
        return (self.n,) * 3

    @property
    def n_interior(self):
        return (self.n - 2) ** 3

    def axis(self, k=0):
        return self.origin[k] + self.h * np.arange(self.n)

    def coordinates(self):
        return tuple(self.axis(k) for k in range(3))

    def boundary_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        mask[1:-1, 1:-1, 1:-1] = False
        return mask

    def interior_slice(self):
        return (slice(1, -1),) * 3

    def fractional(self, points):
        """Grid-index coordinates of ``points`` (array ``(m, 3)``)."""
        return (np.asarray(points, dtype=float) - self.origin) / self.h

    @classmethod
    def around(cls, molecule, n, box_length=None, padding=None):
        """Grid centred on the molecule; box defaults to three times its extent."""
        from .molecule import center_of_geometry

        center = center_of_geometry(molecule)
        if box_length is None:
            lo, hi = molecule.bounding_box
            extent = max(np.subtract(hi, lo))
            box_length = 3.0 * extent if padding is None else extent + 2.0 * padding
        return cls(n, box_length, tuple(center))


@dataclass(frozen=True)
class CoefficientMaps:
    """Staggered permittivity arrays and nodal ion accessibility.

    ``eps_x[i, j, k]`` lives at ``(x_i + h/2, y_j, z_k)`` and has shape
    ``(n-1, n, n)``; ``eps_y`` and ``eps_z`` are shifted likewise.
    """

    eps_x: np.ndarray
    eps_y: np.ndarray
    eps_z: np.ndarray
    ion_access: np.ndarray
    eps_in: float
    eps_out: float

    def __post_init__(self):
        n = self.ion_access.shape[0]
        expected = [(n - 1, n, n), (n, n - 1, n), (n, n, n - 1)]
        for arr, shp in zip((self.eps_x, self.eps_y, self.eps_z), expected):
            if arr.shape != shp:
                raise GridError(f"staggered array has shape {arr.shape}, expected {shp}")


def spline_surface_value(distance, radius, window):
    """C1 cubic blend from 0 (inside) to 1 (outside) across ``radius +- window``."""
    if not window > 0:
        raise ValueError("window must be positive")
    t = (np.asarray(distance, dtype=float) - (radius - window)) / (2.0 * window)
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def characteristic(molecule, origin, h, shape, inflate=0.0, window=SPLINE_WINDOW):
    """Min-over-atoms spline characteristic on the lattice ``origin + h*index``.

    Only nodes within ``radius + inflate + window`` of an atom are touched;
    everything else stays at 1.
    """
    chi = np.ones(shape)
    if len(molecule) == 0:
        return chi
    origin = np.asarray(origin, dtype=float)
    shape = np.asarray(shape)
    for pos, a in zip(molecule.positions, molecule.radii):
        reff = a + inflate
        cut = reff + window
        lo = np.maximum(np.ceil((pos - cut - origin) / h).astype(int), 0)
        hi = np.minimum(np.floor((pos + cut - origin) / h).astype(int) + 1, shape)
        if np.any(hi <= lo):
            continue
        gx, gy, gz = (origin[k] + h * np.arange(lo[k], hi[k]) - pos[k] for k in range(3))
        d = np.sqrt(gx[:, None, None] ** 2 + gy[None, :, None] ** 2 + gz[None, None, :] ** 2)
        block = (slice(lo[0], hi[0]), slice(lo[1], hi[1]), slice(lo[2], hi[2]))
        np.minimum(chi[block], spline_surface_value(d, reff, window), out=chi[block])
    return chi


def blend_permittivity(chi, eps_in, eps_out, blend=BLEND):
    """Permittivity from the solvent characteristic ``chi`` in [0, 1].

    ``"harmonic"`` interpolates ``1/eps`` linearly in ``chi`` (flux-consistent
    across the smoothed interface); ``"arithmetic"`` interpolates ``eps``.
    """
    if blend == "harmonic":
        eps = 1.0 / (1.0 / eps_in + (1.0 / eps_out - 1.0 / eps_in) * chi)
        # pin the pure phases; the reciprocal round trip is not exact
        eps = np.where(chi >= 1.0, eps_out, eps)
        return np.where(chi <= 0.0, eps_in, eps)
    if blend == "arithmetic":
        return eps_in + (eps_out - eps_in) * chi
    raise ValueError(f"unknown blend {blend!r}")


def build_dielectric_maps(
    molecule, grid, eps_in=EPS_IN, eps_out=EPS_OUT, window=SPLINE_WINDOW, blend=BLEND
):
    """Three half-shifted permittivity arrays ``(eps_x, eps_y, eps_z)``."""
    if not (eps_out >= eps_in > 0):
        raise ValueError("need eps_out >= eps_in > 0")
    n, h = grid.n, grid.h
    out = []
    for k in range(3):
        shape = [n, n, n]
        shape[k] = n - 1
        origin = grid.origin.copy()
        origin[k] += 0.5 * h
        chi = characteristic(molecule, origin, h, tuple(shape), 0.0, window)
        out.append(blend_permittivity(chi, eps_in, eps_out, blend))
    return tuple(out)


def build_ion_access_map(molecule, grid, stern_radius=STERN_RADIUS, window=SPLINE_WINDOW):
    if stern_radius < 0:
        raise ValueError("stern_radius must be non-negative")
    return characteristic(molecule, grid.origin, grid.h, grid.shape, stern_radius, window)


def build_maps(
    molecule,
    grid,
    eps_in=EPS_IN,
    eps_out=EPS_OUT,
    stern_radius=STERN_RADIUS,
    window=SPLINE_WINDOW,
    blend=BLEND,
):
    ex, ey, ez = build_dielectric_maps(molecule, grid, eps_in, eps_out, window, blend)
    access = build_ion_access_map(molecule, grid, stern_radius, window)
    return CoefficientMaps(ex, ey, ez, access, float(eps_in), float(eps_out))
