import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pbrom.containers import load_grid, load_rom, save_grid, save_rom
from pbrom.deim import build_deim, build_snapshots_b
from pbrom.discretization import build_operator
from pbrom.errors import ContainerError
from pbrom.greedy import TrainingSet, greedy_build, rom_solve
from pbrom.grid import GridSpec


@pytest.fixture(scope="module")
def built(globule):
    g = GridSpec.around(globule, 17, box_length=60.0)
    op = build_operator(globule, g)
    train = TrainingSet.uniform()
    deim = build_deim(build_snapshots_b(op, train.samples), 1e-10)
    basis, rm, _ = greedy_build(op, train, 1e-3, 20, deim)
    return g, op, deim, rm


def test_rom_round_trip_bit_exact(built, tmp_path):
    g, op, deim, rm = built
    path = tmp_path / "m.pbrm"
    save_rom(path, rm, g, op.size, deim.r_star)
    b = load_rom(path)
    for name in ("A1_hat", "A2_hat", "rho_hat", "deim_block", "deim_indices", "ext_indices", "V"):
        assert np.array_equal(getattr(b.rom, name), getattr(rm, name)), name
    assert b.rom.selected_mus == rm.selected_mus
    assert (b.n_full, b.r, b.r_star) == (op.size, deim.r, deim.r_star)
    assert b.grid == g
    assert b.molecule == op.bgen.molecule
    for mu in np.linspace(0.05, 0.15, 9):
        assert np.array_equal(rom_solve(b.rom, mu), rom_solve(rm, mu))
    # saving what was loaded gives the same bytes
    again = tmp_path / "again.pbrm"
    save_rom(again, b.rom, b.grid, b.n_full, b.r_star)
    assert again.read_bytes() == path.read_bytes()


def test_lift_full_matches_operator_lift(built, tmp_path):
    g, op, deim, rm = built
    path = tmp_path / "m.pbrm"
    save_rom(path, rm, g, op.size)
    b = load_rom(path)
    u_N = rom_solve(b.rom, 0.1)
    np.testing.assert_array_equal(b.lift_full(u_N, 0.1), op.lift(rm.V @ u_N, 0.1))


def test_rom_without_basis(built, tmp_path):
    g, op, _, rm = built
    path = tmp_path / "m.pbrm"
    save_rom(path, rm, g, op.size, include_basis=False)
    b = load_rom(path)
    assert b.rom.V is None
    with pytest.raises(ContainerError):
        b.lift_full(np.zeros(rm.N), 0.1)


def test_newer_version_rejected(built, tmp_path):
    g, op, _, rm = built
    path = tmp_path / "m.pbrm"
    save_rom(path, rm, g, op.size)
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(data))
    with pytest.raises(ContainerError, match="version 99"):
        load_rom(path)


def test_corrupt_rom_files(built, tmp_path):
    g, op, _, rm = built
    path = tmp_path / "m.pbrm"
    save_rom(path, rm, g, op.size)
    data = path.read_bytes()
    bad = tmp_path / "bad"
    bad.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ContainerError):
        load_rom(bad)
    bad.write_bytes(data[: len(data) // 2])
    with pytest.raises(ContainerError):
        load_rom(bad)
    with pytest.raises(ContainerError):
        load_rom(tmp_path / "missing")


def test_grid_round_trip(tmp_path):
    g = GridSpec(9, 12.5, (1.0, -2.0, 3.0))
    u = np.random.default_rng(0).standard_normal(g.shape)
    path = tmp_path / "u.pbgr"
    save_grid(path, u, g)
    v, g2 = load_grid(path)
    assert g2 == g and np.array_equal(u, v)
    raw = path.read_bytes()
    assert raw[:4] == b"PBGR"
    n, box = struct.unpack_from("<Id", raw, 8)
    assert (n, box) == (9, 12.5)
    # payload is plain float64, row-major
    assert np.array_equal(np.frombuffer(raw[-8 * 729:], "<f8").reshape(9, 9, 9), u)


def test_grid_errors(tmp_path):
    g = GridSpec(5, 4.0)
    with pytest.raises(ContainerError):
        save_grid(tmp_path / "x", np.zeros((4, 4, 4)), g)
    path = tmp_path / "u.pbgr"
    save_grid(path, np.zeros(g.shape), g)
    data = bytearray(path.read_bytes())
    path.write_bytes(bytes(data[:-8]))
    with pytest.raises(ContainerError):
        load_grid(path)
    data[4:8] = struct.pack("<I", 2)
    path.write_bytes(bytes(data))
    with pytest.raises(ContainerError):
        load_grid(path)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (3, 3, 3), elements=st.floats(allow_nan=False)))
def test_grid_round_trip_any_values(tmp_path_factory, u):
    path = tmp_path_factory.mktemp("g") / "u.pbgr"
    save_grid(path, u, GridSpec(3, 1.0))
    v, _ = load_grid(path)
    assert np.array_equal(u, v)
