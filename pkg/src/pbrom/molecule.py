"""PQR structure parsing and the in-memory molecule model."""

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyStructureError, PQRParseError

__all__ = ["Atom", "Molecule", "parse_pqr", "read_pqr", "write_pqr", "center_of_geometry"]

_RECORDS = ("ATOM", "HETATM")


@dataclass(frozen=True)
class Atom:
    position: tuple
    charge: float
    radius: float


@dataclass(frozen=True, eq=False)
class Molecule:
    """Point charges with radii, stored column-wise.

    ``positions`` is ``(n, 3)`` in Angstrom, ``charges`` in units of the
    elementary charge, ``radii`` in Angstrom. The arrays are made read-only
    on construction so a molecule can be shared freely.
    """

    positions: np.ndarray
    charges: np.ndarray
    radii: np.ndarray
    total_charge: float = field(init=False)
    bounding_box: tuple = field(init=False)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 3)
        q = np.array(self.charges, dtype=float).reshape(-1)
        a = np.array(self.radii, dtype=float).reshape(-1)
        if not (len(pos) == len(q) == len(a)):
            raise ValueError("positions, charges and radii differ in length")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(q)) or not np.all(np.isfinite(a)):
            raise ValueError("non-finite atom data")
        if np.any(a < 0):
            raise ValueError("negative atom radius")
        for arr in (pos, q, a):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", q)
        object.__setattr__(self, "radii", a)
        object.__setattr__(self, "total_charge", math.fsum(q))
        if len(a):
            lo = tuple((pos - a[:, None]).min(axis=0))
            hi = tuple((pos + a[:, None]).max(axis=0))
        else:
            lo = hi = (0.0, 0.0, 0.0)
        object.__setattr__(self, "bounding_box", (lo, hi))

    @classmethod
    def from_atoms(cls, atoms):
        atoms = list(atoms)
        if not atoms:
            return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0))
        return cls(
            [a.position for a in atoms],
            [a.charge for a in atoms],
            [a.radius for a in atoms],
        )

    def __len__(self):
        return len(self.charges)

    @property
    def atoms(self):
        return [
            Atom(tuple(p), float(q), float(a))
            for p, q, a in zip(self.positions, self.charges, self.radii)
        ]

    def __eq__(self, other):
        if not isinstance(other, Molecule):
            return NotImplemented
        return (
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.charges, other.charges)
            and np.array_equal(self.radii, other.radii)
        )

    def translated(self, shift):
        return Molecule(self.positions + np.asarray(shift, dtype=float), self.charges, self.radii)


def _lines(source):
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def _numeric_tail(tokens, lineno):
    # trailing element symbols (e.g. "N", "FE") are allowed after the radius
    end = len(tokens)
    while end > 0 and tokens[end - 1].isalpha():
        end -= 1
    if end < 6:
        raise PQRParseError("record has fewer than five numeric fields", lineno)
    values = []
    for tok in tokens[end - 5:end]:
        try:
            v = float(tok)
        except ValueError:
            raise PQRParseError(f"malformed numeric token {tok!r}", lineno) from None
        if not math.isfinite(v):
            raise PQRParseError(f"non-finite numeric token {tok!r}", lineno)
        values.append(v)
    return values


def parse_pqr(source):
    """Parse PQR text into a :class:`Molecule`.

    Parameters
    ----------
    source : str or iterable of str
        Whole file contents or any line iterator (an open file works).

    Only ``ATOM``/``HETATM`` records are read. Coordinates, charge and radius
    are taken from the last five numeric tokens, so files with and without a
    chain identifier column are both accepted.
    """
    positions, charges, radii = [], [], []
    for lineno, line in enumerate(_lines(source), start=1):
        tokens = line.split()
        if not tokens or tokens[0] not in _RECORDS:
            continue
        x, y, z, q, r = _numeric_tail(tokens, lineno)
        if r < 0:
            raise PQRParseError(f"negative radius {r}", lineno)
        positions.append((x, y, z))
        charges.append(q)
        radii.append(r)
    if not positions:
        raise EmptyStructureError("no ATOM or HETATM records found")
    return Molecule(positions, charges, radii)


def read_pqr(path):
    if not os.path.isfile(path):
        raise PQRParseError(f"cannot open PQR file {path!r}")
    with open(path) as fh:
        return parse_pqr(fh)


def write_pqr(molecule, fh=None):
    """Serialize with full float precision; ``parse_pqr`` recovers the model exactly."""
    out = []
    rows = np.column_stack([molecule.positions, molecule.charges, molecule.radii]).tolist()
    for i, row in enumerate(rows, 1):
        fields = " ".join(repr(v) for v in row)
        out.append(f"ATOM {i:6d}  X   UNK A {i:4d} {fields}\n")
    out.append("END\n")
    text = "".join(out)
    if fh is not None:
        fh.write(text)
    return text


def center_of_geometry(molecule):
    if len(molecule) == 0:
        raise EmptyStructureError("center of geometry of an empty molecule")
    return molecule.positions.mean(axis=0)
