"""Command-line front end: ``pbrom <command> [options]``.

Commands: ``solve``, ``rom build``, ``rom solve``, ``bench``,
``validate born`` and ``energy``. Options can also come from a JSON file
given by ``--config``; flags given on the command line win.

Exit codes: 1 input parsing, 2 setup/assembly, 3 linear solver, 4 file I/O.
"""

import argparse
import csv
import dataclasses
import json
import logging
import statistics
import sys
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import grid as grid_mod
from .containers import load_grid, load_rom, save_grid, save_rom
from .deim import build_deim, build_snapshots_b
from .discretization import build_operator
from .errors import ContainerError, PBError, PQRParseError
from .greedy import ResidualEstimator, TrainingSet, greedy_build, rom_solve
from .grid import GridSpec, build_constants
from .molecule import Molecule, read_pqr
from .postprocess import (
    born_analytic,
    electrostatic_energy,
    extract_slice,
    solvation_energy,
    write_slice_csv,
)
from .solver import solve_spd

__all__ = ["RunConfig", "ConfigError", "load_config", "main"]

log = logging.getLogger("pbrom")


class ConfigError(PBError):
    exit_code = 2


@dataclass
class RunConfig:
    pqr_path: str = None
    n: int = 33
    box_length: float = None  # None: three times the molecular extent
    center_mode: str = "auto"
    center: tuple = None
    eps_in: float = grid_mod.EPS_IN
    eps_out: float = grid_mod.EPS_OUT
    temperature: float = grid_mod.TEMPERATURE
    stern_radius: float = grid_mod.STERN_RADIUS
    spline_window: float = grid_mod.SPLINE_WINDOW
    blend: str = grid_mod.BLEND
    tol: float = 1e-10
    max_iter: int = None
    preconditioner: str = "jacobi"
    mu: float = 0.1
    mu_min: float = 0.05
    mu_max: float = 0.15
    train_count: int = 11
    eps_tol: float = 1e-3
    max_n: int = 20
    eps_svd: float = 1e-10
    output: str = None
    history: str = None
    singular_values: str = None
    report: str = None
    slice_csv: str = None
    slice_axis: int = 2
    slice_index: int = None
    verify: bool = False
    repeats: int = 5

    def validate(self, molecule=None):
        if int(self.n) != self.n or self.n < 9 or self.n % 2 == 0:
            raise ConfigError(f"n must be an odd integer >= 9, got {self.n}")
        if not self.mu_min < self.mu_max or self.mu_min < 0:
            raise ConfigError(f"parameter domain [{self.mu_min}, {self.mu_max}] is not ordered")
        if self.center_mode not in ("auto", "explicit"):
            raise ConfigError(f"center_mode must be auto or explicit, got {self.center_mode!r}")
        if self.center_mode == "explicit" and (self.center is None or len(self.center) != 3):
            raise ConfigError("explicit centering needs a 3-vector center")
        if not self.eps_out >= self.eps_in > 0:
            raise ConfigError("need eps_out >= eps_in > 0")
        if self.train_count < 1:
            raise ConfigError("train_count must be positive")
        if molecule is not None and self.box_length is not None:
            lo, hi = molecule.bounding_box
            extent = float(np.max(np.subtract(hi, lo)))
            if not self.box_length > extent:
                raise ConfigError(
                    f"box_length {self.box_length} does not exceed the molecular extent {extent:.3f}"
                )
        return self


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ContainerError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PQRParseError(f"config {path}: {exc}", exc.lineno) from exc
    out = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = value
    return out


def _merge(args):
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            values[name] = v
    if values.get("center") is not None and "center_mode" not in values:
        values["center_mode"] = "explicit"
    return RunConfig(**values)


def _setup(cfg, molecule=None):
    if molecule is None:
        if not cfg.pqr_path:
            raise ConfigError("no structure given (use --pqr)")
        molecule = read_pqr(cfg.pqr_path)
    cfg.validate(molecule)
    constants = build_constants(cfg.temperature)
    if cfg.center_mode == "explicit":
        if cfg.box_length is None:
            raise ConfigError("explicit centering needs box_length")
        grid = GridSpec(cfg.n, cfg.box_length, tuple(cfg.center))
    else:
        grid = GridSpec.around(molecule, cfg.n, box_length=cfg.box_length)
    op = build_operator(
        molecule,
        grid,
        cfg.eps_in,
        cfg.eps_out,
        cfg.stern_radius,
        cfg.spline_window,
        constants,
        cfg.blend,
    )
    return molecule, grid, constants, op


def _solver_kwargs(cfg):
    kw = {"preconditioner": cfg.preconditioner}
    if cfg.max_iter is not None:
        kw["max_iter"] = cfg.max_iter
    return kw


def _write_json(obj, path):
    text = json.dumps(obj, indent=2)
    if path:
        try:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise ContainerError(f"cannot write {path}: {exc}") from exc
    else:
        print(text)


def _open_out(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise ContainerError(f"cannot write {path}: {exc}") from exc


def cmd_solve(cfg):
    molecule, grid, constants, op = _setup(cfg)
    t0 = time.perf_counter()
    u, report = solve_spd(op.matrix(cfg.mu), op.rhs(cfg.mu), tol=cfg.tol, **_solver_kwargs(cfg))
    t_solve = time.perf_counter() - t0
    u_full = op.lift(u, cfg.mu)
    if cfg.output:
        save_grid(cfg.output, u_full, grid)
    energy = electrostatic_energy(u_full, molecule, grid, constants, mu=cfg.mu)
    out = {
        "mu": cfg.mu,
        "n": grid.n,
        "box_length": grid.box_length,
        "unknowns": op.size,
        "solver": report.as_dict(),
        "solve_time": t_solve,
        "energy_kJ_per_mol": energy.total_energy_kJ_per_mol,
    }
    if cfg.slice_csv:
        plane, a, b = extract_slice(u_full, cfg.slice_axis, cfg.slice_index, grid)
        with _open_out(cfg.slice_csv) as fh:
            write_slice_csv(plane, a, b, fh)
    _write_json(out, cfg.report)
    return 0


def build_rom(cfg, molecule=None):
    """DEIM then greedy for a configuration. Returns a dict of results."""
    t0 = time.perf_counter()
    molecule, grid, constants, op = _setup(cfg, molecule)
    train = TrainingSet.uniform(cfg.mu_min, cfg.mu_max, cfg.train_count)
    F = build_snapshots_b(op, train.samples)
    deim = build_deim(F, cfg.eps_svd)
    basis, rom, history = greedy_build(
        op,
        train,
        eps_tol=cfg.eps_tol,
        max_N=cfg.max_n,
        deim=deim,
        solver_tol=cfg.tol,
        solver_kwargs=_solver_kwargs(cfg),
        verify=cfg.verify,
    )
    return {
        "molecule": molecule,
        "grid": grid,
        "op": op,
        "train": train,
        "deim": deim,
        "basis": basis,
        "rom": rom,
        "history": history,
        "offline_time": time.perf_counter() - t0,
    }


def cmd_rom_build(cfg):
    res = build_rom(cfg)
    rom, deim, op = res["rom"], res["deim"], res["op"]
    if cfg.output:
        save_rom(cfg.output, rom, res["grid"], op.size, deim.r_star)
    if cfg.history:
        with _open_out(cfg.history) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "mu_star", "delta_max", "true_err_max"])
            for step in res["history"]:
                err = "" if step.true_error_max is None else repr(step.true_error_max)
                w.writerow([step.N, repr(step.mu_star), repr(step.delta_max), err])
    if cfg.singular_values:
        with _open_out(cfg.singular_values) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "sigma", "sigma_relative"])
            s = deim.singular_values
            for i, v in enumerate(s, 1):
                w.writerow([i, repr(float(v)), repr(float(v / s[0]))])
    last = res["history"][-1]
    _write_json(
        {
            "N": rom.N,
            "r": deim.r,
            "r_star": deim.r_star,
            "selected_mus": rom.selected_mus,
            "final_delta_max": last.delta_max,
            "iterations": len(res["history"]),
            "offline_time": res["offline_time"],
        },
        cfg.report,
    )
    return 0


def cmd_rom_solve(container, mus, report=None, energy=False):
    bundle = load_rom(container)
    rom = bundle.rom
    rows = []
    for mu in mus:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            t0 = time.perf_counter()
            u_N = rom_solve(rom, mu)
            elapsed = time.perf_counter() - t0
        row = {"mu": mu, "solve_time": elapsed, "coefficients": u_N.tolist()}
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
            row["warning"] = str(w.message)
        if energy:
            u_full = bundle.lift_full(u_N, mu)
            row["energy_kJ_per_mol"] = electrostatic_energy(
                u_full, bundle.molecule, bundle.grid, bundle.constants
            ).total_energy_kJ_per_mol
        rows.append(row)
    _write_json(
        {"N": rom.N, "total_solve_time": sum(r["solve_time"] for r in rows), "results": rows},
        report,
    )
    return 0


def _median_time(fn, repeats):
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_bench(cfg, molecule=None):
    """Timing table: FOM vs ROM solves and the estimator sweep with/without DEIM."""
    res = build_rom(cfg, molecule)
    op, rom, deim, basis, train = res["op"], res["rom"], res["deim"], res["basis"], res["train"]
    mu = 0.5 * (cfg.mu_min + cfg.mu_max)
    kw = _solver_kwargs(cfg)
    reps = cfg.repeats
    fom = _median_time(lambda: solve_spd(op.matrix(mu), op.rhs(mu), tol=cfg.tol, **kw), reps)
    rom_t = _median_time(lambda: rom_solve(rom, mu), reps)
    est = ResidualEstimator(op, basis, deim)
    on = _median_time(lambda: [est(rom_solve(rom, m), m) for m in train.samples], reps)
    off = _median_time(lambda: [est.exact(rom, m) for m in train.samples], reps)
    return {
        "n": op.grid.n,
        "unknowns": op.size,
        "N": rom.N,
        "r": deim.r,
        "offline_total": res["offline_time"],
        "fom_assemble_solve": fom,
        "rom_assemble_solve": rom_t,
        "estimator_sweep_deim": on,
        "estimator_sweep_full_b": off,
        "speedup_fom_rom": fom / rom_t,
        "speedup_estimator_deim": off / on,
    }


def cmd_bench(cfg):
    table = run_bench(cfg)
    if cfg.output:
        with _open_out(cfg.output) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "value"])
            for k, v in table.items():
                w.writerow([k, v])
    _write_json(table, cfg.report)
    return 0


def cmd_validate_born(cfg, q, radius, fdm):
    analytic = born_analytic(q, radius, cfg.eps_in, cfg.eps_out)
    out = {
        "q": q,
        "radius": radius,
        "eps_in": cfg.eps_in,
        "eps_out": cfg.eps_out,
        "analytic_kJ_per_mol": analytic,
        "analytic_codata_kJ_per_mol": born_analytic(q, radius, cfg.eps_in, cfg.eps_out, "codata"),
    }
    if fdm:
        ion = Molecule([[0.0, 0.0, 0.0]], [q], [radius])
        cfg.validate(ion)
        grid = GridSpec(cfg.n, cfg.box_length or 32.0, (0.0, 0.0, 0.0))
        rep = solvation_energy(
            ion,
            grid,
            cfg.eps_in,
            cfg.eps_out,
            mu=0.0,
            constants=build_constants(cfg.temperature),
            tol=cfg.tol,
            stern_radius=cfg.stern_radius,
            window=cfg.spline_window,
            blend=cfg.blend,
            solver=_solver_kwargs(cfg),
        )
        e = rep.total_energy_kJ_per_mol
        out.update(
            n=grid.n,
            spacing=grid.h,
            fdm_kJ_per_mol=e,
            relative_error=abs(e - analytic) / abs(analytic),
        )
    _write_json(out, cfg.report)
    return 0


def cmd_energy(cfg, potential=None):
    if potential:
        molecule = read_pqr(cfg.pqr_path) if cfg.pqr_path else None
        if molecule is None:
            raise ConfigError("energy from a stored potential needs --pqr")
        u, grid = load_grid(potential)
        rep = electrostatic_energy(u, molecule, grid, build_constants(cfg.temperature))
    else:
        molecule = read_pqr(cfg.pqr_path) if cfg.pqr_path else None
        if molecule is None:
            raise ConfigError("no structure given (use --pqr)")
        cfg.validate(molecule)
        grid = GridSpec.around(molecule, cfg.n, box_length=cfg.box_length)
        rep = solvation_energy(
            molecule,
            grid,
            cfg.eps_in,
            cfg.eps_out,
            mu=cfg.mu,
            constants=build_constants(cfg.temperature),
            tol=cfg.tol,
            stern_radius=cfg.stern_radius,
            window=cfg.spline_window,
            blend=cfg.blend,
            solver=_solver_kwargs(cfg),
        )
    _write_json(dataclasses.asdict(rep), cfg.report)
    return 0


def _config_flags(p):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="JSON file with configuration keys")
    g.add_argument("--pqr", dest="pqr_path")
    g.add_argument("--n", type=int)
    g.add_argument("--box-length", type=float)
    g.add_argument("--center", type=float, nargs=3)
    g.add_argument("--center-mode", choices=["auto", "explicit"])
    g.add_argument("--eps-in", type=float)
    g.add_argument("--eps-out", type=float)
    g.add_argument("--temperature", type=float)
    g.add_argument("--stern-radius", type=float)
    g.add_argument("--spline-window", type=float)
    g.add_argument("--blend", choices=["harmonic", "arithmetic"])
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--preconditioner", choices=["jacobi", "sgs", "none"])
    g.add_argument("--mu", type=float)
    g.add_argument("--mu-min", type=float)
    g.add_argument("--mu-max", type=float)
    g.add_argument("--train-count", type=int)
    g.add_argument("--eps-tol", type=float)
    g.add_argument("--max-n", type=int)
    g.add_argument("--eps-svd", type=float)
    g.add_argument("--repeats", type=int)
    g.add_argument("--report", help="write the JSON summary here instead of stdout")
    return g


def build_parser():
    parser = argparse.ArgumentParser(prog="pbrom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="full-order solve at one ionic strength")
    _config_flags(p)
    p.add_argument("--output", help="potential file (PBGR)")
    p.add_argument("--slice-csv")
    p.add_argument("--slice-axis", type=int)
    p.add_argument("--slice-index", type=int)

    rom = sub.add_parser("rom", help="reduced-order model").add_subparsers(dest="rom_command", required=True)
    p = rom.add_parser("build", help="DEIM plus greedy basis construction")
    _config_flags(p)
    p.add_argument("--output", help="reduced model file (PBRM)")
    p.add_argument("--history", help="greedy history CSV")
    p.add_argument("--singular-values", help="boundary snapshot singular values CSV")
    p.add_argument("--verify", action="store_true", help="record true errors (full solves)")
    p = rom.add_parser("solve", help="evaluate a stored reduced model")
    p.add_argument("container")
    p.add_argument("--mu", type=float, nargs="+", required=True)
    p.add_argument("--energy", action="store_true", help="also lift and report the energy")
    p.add_argument("--report")

    p = sub.add_parser("bench", help="timing table")
    _config_flags(p)
    p.add_argument("--output", help="CSV file")

    val = sub.add_parser("validate", help="analytic checks").add_subparsers(dest="validate_command", required=True)
    p = val.add_parser("born", help="Born ion solvation energy")
    _config_flags(p)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--fdm", action="store_true", help="also run the finite-difference pipeline")

    p = sub.add_parser("energy", help="solvation energy, or energy of a stored potential")
    _config_flags(p)
    p.add_argument("--potential", help="PBGR file to evaluate instead of solving")
    return parser


def _dispatch(args):
    if args.command == "rom" and args.rom_command == "solve":
        return cmd_rom_solve(args.container, args.mu, args.report, args.energy)
    cfg = _merge(args)
    if args.command == "solve":
        return cmd_solve(cfg)
    if args.command == "rom":
        return cmd_rom_build(cfg)
    if args.command == "bench":
        return cmd_bench(cfg)
    if args.command == "validate":
        from_file = load_config(args.config) if args.config else {}
        if args.eps_in is None and "eps_in" not in from_file:
            cfg.eps_in = 1.0  # the Born ion sits in vacuum by convention
        return cmd_validate_born(cfg, args.q, args.radius, args.fdm)
    if args.command == "energy":
        return cmd_energy(cfg, args.potential)
    raise AssertionError(args.command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except PBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
