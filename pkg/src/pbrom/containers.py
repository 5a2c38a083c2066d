"""Binary containers for reduced models (``PBRM``) and grid fields (``PBGR``).

Everything is little-endian. A reduced-model file is the magic, a ``u32``
format version, the dimensions ``(N_full, N, r, r*)`` as ``u64``, then a
sequence of named sections::

    name    16 bytes, ASCII, NUL padded
    kind    u8   (0 = float64, 1 = int64)
    ndim    u32
    shape   ndim * u64
    data    row-major payload

Unknown sections are skipped on load, so readers of the same version stay
compatible with extra payload.
"""

import struct

import numpy as np
import scipy.sparse as sp

from .discretization import BoundarySampler
from .errors import ContainerError
from .greedy import ReducedModel
from .grid import GridSpec, PhysicalConstants
from .molecule import Molecule

__all__ = [
    "ROM_MAGIC",
    "GRID_MAGIC",
    "ROM_VERSION",
    "GRID_VERSION",
    "RomBundle",
    "save_rom",
    "load_rom",
    "save_grid",
    "load_grid",
]

ROM_MAGIC = b"PBRM"
GRID_MAGIC = b"PBGR"
ROM_VERSION = 1
GRID_VERSION = 1

_KINDS = {0: np.dtype("<f8"), 1: np.dtype("<i8")}


def _pack_section(name, arr):
    arr = np.asarray(arr)
    if arr.dtype.kind in "iub":
        kind, arr = 1, arr.astype("<i8")
    else:
        kind, arr = 0, arr.astype("<f8")
    key = name.encode("ascii")
    if len(key) > 16:
        raise ValueError(f"section name {name!r} longer than 16 bytes")
    head = key.ljust(16, b"\0") + struct.pack("<BI", kind, arr.ndim)
    head += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + np.ascontiguousarray(arr).tobytes()


def _read_sections(buf, pos):
    out = {}
    while pos < len(buf):
        try:
            name = buf[pos:pos + 16].rstrip(b"\0").decode("ascii")
            kind, ndim = struct.unpack_from("<BI", buf, pos + 16)
            pos += 21
            shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
            pos += 8 * ndim
        except (struct.error, UnicodeDecodeError) as exc:
            raise ContainerError(f"corrupt section header at byte {pos}") from exc
        if kind not in _KINDS:
            raise ContainerError(f"section {name!r} has unknown element kind {kind}")
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * 8
        if pos + nbytes > len(buf):
            raise ContainerError(f"section {name!r} is truncated")
        out[name] = np.frombuffer(buf, dtype=_KINDS[kind], count=count, offset=pos).reshape(shape).copy()
        pos += nbytes
    return out


def _read_file(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise ContainerError(f"cannot read {path}: {exc}") from exc


def _write_file(path, data):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise ContainerError(f"cannot write {path}: {exc}") from exc


def _check_header(buf, magic, supported, path):
    if len(buf) < 8 or buf[:4] != magic:
        raise ContainerError(f"{path}: not a {magic.decode()} container")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version > supported:
        raise ContainerError(
            f"{path}: format version {version} is newer than supported version {supported}"
        )
    return version


class RomBundle:
    """A loaded reduced model plus what is needed to lift it to the grid."""

    def __init__(self, rom, grid, molecule, eps_w, constants, n_full, r, r_star):
        self.rom = rom
        self.grid = grid
        self.molecule = molecule
        self.eps_w = eps_w
        self.constants = constants
        self.n_full = n_full
        self.r = r
        self.r_star = r_star

    def lift_full(self, u_N, mu):
        """Lifted reduced solution on the full grid with Debye-Hueckel boundary values."""
        from .discretization import boundary_generator

        if self.rom.V is None:
            raise ContainerError("container was saved without the reduced basis")
        n = self.grid.n
        u = np.empty(self.grid.shape)
        u[1:-1, 1:-1, 1:-1] = (self.rom.V @ u_N).reshape((n - 2,) * 3)
        bgen = boundary_generator(self.molecule, self.grid, self.eps_w, self.constants)
        u.reshape(-1)[bgen.node_index] = bgen.values(mu)
        return u


def _sampler_sections(prefix, s):
    w = sp.csr_matrix(s.weights)
    return [
        (prefix + "_data", w.data),
        (prefix + "_indices", w.indices),
        (prefix + "_indptr", w.indptr),
        (prefix + "_shape", np.array(w.shape)),
        (prefix + "_nodes", s.node_positions),
    ]


def _sampler_from(sec, prefix, molecule, eps_w, constants):
    shape = tuple(int(x) for x in sec[prefix + "_shape"])
    w = sp.csr_matrix(
        (sec[prefix + "_data"], sec[prefix + "_indices"], sec[prefix + "_indptr"]), shape=shape
    )
    return BoundarySampler(w, sec[prefix + "_nodes"], molecule, eps_w, constants)


def save_rom(path, rom, grid, n_full, r_star=None, include_basis=True):
    """Write a :class:`ReducedModel` to ``path``.

    ``grid`` and ``n_full`` describe the full-order problem; the basis ``V``
    is stored when present and ``include_basis`` is set.
    """
    s = rom.sampler
    c = s.constants
    m = s.molecule
    r = len(rom.deim_indices)
    ext = np.asarray(rom.ext_indices if rom.ext_indices is not None else [], dtype=np.int64)
    r_star = r + ext.size if r_star is None else r_star
    sections = [
        ("A1_hat", rom.A1_hat),
        ("A2_hat", rom.A2_hat),
        ("rho_hat", rom.rho_hat),
        ("deim_block", rom.deim_block),
        ("deim_indices", np.asarray(rom.deim_indices, dtype=np.int64)),
        ("ext_indices", ext),
        ("selected_mus", np.asarray(rom.selected_mus, dtype=float)),
        ("domain", np.asarray(rom.domain, dtype=float)),
        ("grid", np.array([grid.n, grid.box_length, *grid.center], dtype=float)),
        ("constants", np.array([c.temperature, c.bjerrum_scale, c.kappa2_per_ionic_strength, c.kT_to_kJ_per_mol])),
        ("eps_w", np.array([s.eps_w])),
        ("atom_pos", m.positions),
        ("atom_q", m.charges),
        ("atom_r", m.radii),
    ]
    sections += _sampler_sections("bs", s)
    if rom.ext_sampler is not None:
        sections += _sampler_sections("bsx", rom.ext_sampler)
    if include_basis and rom.V is not None:
        sections.append(("V", rom.V))
    head = ROM_MAGIC + struct.pack("<I4Q", ROM_VERSION, n_full, rom.N, r, r_star)
    _write_file(path, head + b"".join(_pack_section(k, v) for k, v in sections))


def load_rom(path):
    buf = _read_file(path)
    _check_header(buf, ROM_MAGIC, ROM_VERSION, path)
    try:
        n_full, N, r, r_star = struct.unpack_from("<4Q", buf, 8)
    except struct.error as exc:
        raise ContainerError(f"{path}: truncated header") from exc
    sec = _read_sections(buf, 40)
    required = ["A1_hat", "A2_hat", "rho_hat", "deim_block", "deim_indices", "grid", "constants",
                "eps_w", "atom_pos", "atom_q", "atom_r", "bs_data"]
    missing = [k for k in required if k not in sec]
    if missing:
        raise ContainerError(f"{path}: missing sections {missing}")
    if sec["A1_hat"].shape != (N, N) or len(sec["deim_indices"]) != r:
        raise ContainerError(f"{path}: section shapes disagree with the header")
    constants = PhysicalConstants(*(float(x) for x in sec["constants"]))
    molecule = Molecule(sec["atom_pos"], sec["atom_q"], sec["atom_r"])
    eps_w = float(sec["eps_w"][0])
    g = sec["grid"]
    grid = GridSpec(int(g[0]), float(g[1]), tuple(g[2:5]))
    sampler = _sampler_from(sec, "bs", molecule, eps_w, constants)
    ext_sampler = _sampler_from(sec, "bsx", molecule, eps_w, constants) if "bsx_data" in sec else None
    rom = ReducedModel(
        A1_hat=sec["A1_hat"],
        A2_hat=sec["A2_hat"],
        rho_hat=sec["rho_hat"],
        deim_block=sec["deim_block"],
        deim_indices=sec["deim_indices"],
        sampler=sampler,
        ext_indices=sec.get("ext_indices"),
        ext_sampler=ext_sampler,
        selected_mus=[float(x) for x in sec.get("selected_mus", [])],
        domain=tuple(float(x) for x in sec.get("domain", (0.05, 0.15))),
        V=sec.get("V"),
    )
    return RomBundle(rom, grid, molecule, eps_w, constants, int(n_full), int(r), int(r_star))


def save_grid(path, u, grid):
    """``PBGR`` file: magic, u32 version, u32 n, f64 box, 3 f64 center, f64 data."""
    u = np.asarray(u, dtype="<f8")
    if u.shape != grid.shape:
        raise ContainerError(f"field shape {u.shape} does not match grid {grid.shape}")
    head = GRID_MAGIC + struct.pack("<II4d", GRID_VERSION, grid.n, grid.box_length, *grid.center)
    _write_file(path, head + np.ascontiguousarray(u).tobytes())


def load_grid(path):
    """Returns ``(u, grid)``."""
    buf = _read_file(path)
    _check_header(buf, GRID_MAGIC, GRID_VERSION, path)
    try:
        n, box, cx, cy, cz = struct.unpack_from("<I4d", buf, 8)
    except struct.error as exc:
        raise ContainerError(f"{path}: truncated header") from exc
    offset = 8 + struct.calcsize("<I4d")
    if len(buf) != offset + 8 * n**3:
        raise ContainerError(f"{path}: payload size does not match n={n}")
    u = np.frombuffer(buf, dtype="<f8", offset=offset).reshape(n, n, n).copy()
    return u, GridSpec(n, box, (cx, cy, cz))
