"""
Command-line front end.

    mfwh <config> [--mode M] [--out DIR]

The config is an INI file::

    [run]
    mode = gmres            ; fpi | gmres | direct | analyze | verify
    out = results
    tol = 1e-10

    [grid]
    bounds = 0, 1, 0, 1
    cells = 64, 64
    order = 4
    bc = dirichlet

    [scheme]
    time_stepping = trapezoidal
    num_periods = 2

    [freq.1]
    omega = 5.1
    amplitude = 25
    width = 15
    center = 0.6, 0.45

Exit status is 0 on success, 2 when the fixed-point iteration diverges (the
outputs are still written) and 1 on any error.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import csv
import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .direct import HelmholtzSystem, SingularSystemError, solve_all
from .driver import MFWHSolver, SolverConfig, SolverReport, running_rates, to_grid_function
from .filters import build_filter_bank
from .grid import DIRICHLET, NEUMANN, BoundaryCondition, gather, make_grid, read_field, write_field
from .krylov import SolverError
from .problem import GaussianSource, MultiHelmholtzProblem
from .wave import SCHEMES, build_time_plan

log = logging.getLogger("mfwh")

MODES = ("fpi", "gmres", "direct", "analyze", "verify")
EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key}: {message}")
        self.key = key


@dataclass
class FrequencySpec:
    omega: float
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, ...] = ()
    forcing_file: str | None = None
    boundary_file: str | None = None


@dataclass
class RunConfig:
    mode: str
    out: Path
    bounds: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    order: int
    bc: BoundaryCondition
    scheme: str
    num_periods: int
    steps_per_period: float
    cfl: float
    tol: float
    max_iter: int
    restart: int
    helmholtz_tol: float
    verify_tol: float
    verify_solver: str
    backend: str
    wave_speed: float
    frequencies: list[FrequencySpec]
    threads: int | None = None
    dump_fields: bool = True
    dump_residuals: bool = True
    dump_mu_curve: bool = True
    dump_spectrum: bool = False
    mu_range: tuple[float, float] | None = None
    mu_count: int = 2001
    initial_guess: list[str] = field(default_factory=list)
    base_dir: Path = Path(".")


class _Section:
    """Typed access to one config section; every error names ``[section] key``."""

    def __init__(self, cp: configparser.ConfigParser, name: str, required: bool = True):
        if not cp.has_section(name):
            if required:
                raise ConfigError(f"[{name}]", "missing section")
            self._s = {}
        else:
            self._s = cp[name]
        self.name = name

    def key(self, k: str) -> str:
        return f"[{self.name}] {k}"

    def has(self, k: str) -> bool:
        return k in self._s

    def raw(self, k: str, default=None) -> str:
        if k in self._s:
            return self._s[k].strip()
        if default is None:
            raise ConfigError(self.key(k), "missing")
        return default

    def string(self, k, default=None, choices=None) -> str:
        v = self.raw(k, default)
        if choices is not None and v not in choices:
            raise ConfigError(self.key(k), f"must be one of {', '.join(choices)}; got {v!r}")
        return v

    def floats(self, k, default=None, count=None) -> tuple[float, ...]:
        v = self.raw(k, default)
        try:
            out = tuple(float(x) for x in re.split(r"[,\s]+", v) if x)
        except ValueError:
            raise ConfigError(self.key(k), f"expected numbers, got {v!r}") from None
        if not all(math.isfinite(x) for x in out):
            raise ConfigError(self.key(k), f"values must be finite, got {v!r}")
        if count is not None and len(out) not in ((count,) if isinstance(count, int) else count):
            raise ConfigError(self.key(k), f"expected {count} values, got {len(out)}")
        return out

    def real(self, k, default=None, positive=False, minimum=None) -> float:
        (x,) = self.floats(k, None if default is None else repr(default), count=1)
        if positive and not x > 0:
            raise ConfigError(self.key(k), f"must be positive, got {x}")
        if minimum is not None and x < minimum:
            raise ConfigError(self.key(k), f"must be >= {minimum}, got {x}")
        return x

    def integer(self, k, default=None, minimum=None) -> int:
        v = self.raw(k, None if default is None else str(default))
        try:
            x = int(v)
        except ValueError:
            raise ConfigError(self.key(k), f"expected an integer, got {v!r}") from None
        if minimum is not None and x < minimum:
            raise ConfigError(self.key(k), f"must be >= {minimum}, got {x}")
        return x

    def boolean(self, k, default: bool) -> bool:
        v = self.raw(k, "true" if default else "false").lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(self.key(k), f"expected true/false, got {v!r}")


def _parse_bc(sec: _Section, dim: int) -> BoundaryCondition:
    kinds = [x for x in re.split(r"[,\s]+", sec.raw("bc", DIRICHLET)) if x]
    if len(kinds) == 1:
        kinds = kinds * (2 * dim)
    if len(kinds) != 2 * dim or any(k not in (DIRICHLET, NEUMANN) for k in kinds):
        raise ConfigError(sec.key("bc"), f"expected one kind or {2 * dim} kinds (lower/upper per axis) "
                          f"from {DIRICHLET}, {NEUMANN}; got {sec.raw('bc')!r}")
    return BoundaryCondition(tuple((kinds[2 * a], kinds[2 * a + 1]) for a in range(dim)))


def load_config(path, mode: str | None = None, out: str | None = None) -> RunConfig:
    """Parse and validate a config file; ``mode`` and ``out`` override the file."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from None

    run = _Section(cp, "run", required=False)
    grid = _Section(cp, "grid")
    scheme = _Section(cp, "scheme", required=False)

    mode = mode or run.string("mode", "gmres")
    if mode not in MODES:
        raise ConfigError("[run] mode", f"must be one of {', '.join(MODES)}; got {mode!r}")

    b = grid.floats("bounds", count=(2, 4))
    dim = len(b) // 2
    bounds = tuple((b[2 * a], b[2 * a + 1]) for a in range(dim))
    for a, (lo, hi) in enumerate(bounds):
        if not hi > lo:
            raise ConfigError(grid.key("bounds"), f"axis {a}: upper bound must exceed lower bound")
    cells_f = grid.floats("cells", count=(1, dim))
    if any(c != int(c) for c in cells_f):
        raise ConfigError(grid.key("cells"), "cell counts must be integers")
    cells = tuple(int(c) for c in cells_f) * (dim if len(cells_f) == 1 else 1)
    order = grid.integer("order", 2)
    if order not in (2, 4):
        raise ConfigError(grid.key("order"), f"must be 2 or 4, got {order}")
    if min(cells) < 4 * (order // 2):
        raise ConfigError(grid.key("cells"), f"need at least {4 * (order // 2)} cells per axis for order {order}")
    bc = _parse_bc(grid, dim)

    ts = scheme.string("time_stepping", "trapezoidal", choices=tuple(SCHEMES))
    backend = scheme.string("backend", "direct", choices=("direct", "cg"))

    freqs = []
    for name in _freq_sections(cp):
        sec = _Section(cp, name)
        spec = FrequencySpec(omega=sec.real("omega", positive=True))
        if sec.has("forcing_file"):
            spec.forcing_file = sec.raw("forcing_file")
        else:
            spec.amplitude = sec.real("amplitude")
            spec.width = sec.real("width", positive=True)
            spec.center = sec.floats("center", count=dim)
        if sec.has("boundary_file"):
            spec.boundary_file = sec.raw("boundary_file")
        freqs.append(spec)
    if not freqs:
        raise ConfigError("[freq.1]", "at least one frequency section is required")
    w = [f.omega for f in freqs]
    if any(b <= a for a, b in zip(w, w[1:])):
        raise ConfigError("[freq.*] omega", f"frequencies must be strictly increasing in section order, got {w}")

    threads = run.integer("threads", minimum=1) if run.has("threads") else None
    mu_range = run.floats("mu_curve_range", count=2) if run.has("mu_curve_range") else None
    if mu_range is not None and not mu_range[1] > mu_range[0]:
        raise ConfigError(run.key("mu_curve_range"), "upper end must exceed lower end")

    return RunConfig(
        mode=mode,
        out=Path(out or run.string("out", "mfwh_out")),
        bounds=bounds,
        cells=cells,
        order=order,
        bc=bc,
        scheme=ts,
        num_periods=scheme.integer("num_periods", 1, minimum=1),
        steps_per_period=scheme.real("steps_per_period", 10.0, minimum=5.0),
        cfl=scheme.real("cfl", 0.9, positive=True),
        tol=run.real("tol", 1e-10, positive=True),
        max_iter=run.integer("max_iter", 200, minimum=1),
        restart=run.integer("restart", 200, minimum=1),
        helmholtz_tol=run.real("helmholtz_tol", 1e-6, positive=True),
        verify_tol=run.real("verify_tol", 1e-8, positive=True),
        verify_solver=run.string("verify_solver", "gmres", choices=("fpi", "gmres")),
        backend=backend,
        wave_speed=scheme.real("wave_speed", 1.0, positive=True),
        frequencies=freqs,
        threads=threads,
        dump_fields=run.boolean("dump_fields", True),
        dump_residuals=run.boolean("dump_residuals", True),
        dump_mu_curve=run.boolean("dump_mu_curve", True),
        dump_spectrum=run.boolean("dump_spectrum", mode == "analyze"),
        mu_range=mu_range,
        mu_count=run.integer("mu_curve_count", 2001, minimum=2),
        initial_guess=[x for x in re.split(r"[,\s]+", run.raw("initial_guess", "")) if x],
        base_dir=path.resolve().parent,
    )


def _freq_sections(cp: configparser.ConfigParser) -> list[str]:
    out = []
    for s in cp.sections():
        if s.startswith("freq."):
            tail = s.split(".", 1)[1]
            if not tail.isdigit():
                raise ConfigError(f"[{s}]", "frequency sections are named [freq.N] with N = 1, 2, ...")
            out.append((int(tail), s))
    out.sort()
    if [n for n, _ in out] != list(range(1, len(out) + 1)):
        raise ConfigError("[freq.N]", f"sections must be numbered 1..{len(out)} without gaps")
    return [s for _, s in out]


def build_problem(cfg: RunConfig):
    grid = make_grid(cfg.bounds, cfg.cells, cfg.order)
    forcings, bdata = [], []
    for m, f in enumerate(cfg.frequencies, start=1):
        if f.forcing_file:
            forcings.append(_read_on(grid, cfg, f.forcing_file, f"[freq.{m}] forcing_file"))
        else:
            forcings.append(GaussianSource(f.amplitude, f.width, tuple(f.center)))
        bdata.append(_read_on(grid, cfg, f.boundary_file, f"[freq.{m}] boundary_file") if f.boundary_file else None)
    problem = MultiHelmholtzProblem(tuple(f.omega for f in cfg.frequencies), tuple(forcings), cfg.bc,
                                    tuple(bdata), cfg.wave_speed)
    return problem, grid


def _read_on(grid, cfg, name, key):
    p = Path(name)
    if not p.is_absolute():
        p = cfg.base_dir / p
    try:
        u = read_field(p, cfg.order)
    except (OSError, ValueError) as exc:
        raise ConfigError(key, f"cannot read field {p}: {exc}") from None
    if u.grid.cells != grid.cells or not np.allclose(np.ravel(u.grid.lower), np.ravel(grid.lower)) \
            or not np.allclose(np.ravel(u.grid.upper), np.ravel(grid.upper)):
        raise ConfigError(key, f"field {p} is not on the configured grid")
    return u


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_report(path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {_fmt(v)}\n")


def write_residuals(path, report: SolverReport) -> None:
    hist = report.residuals
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "r", "cr_running"])
        if report.mode == "gmres":
            # GMRES history starts with the initial relative residual at k = 0
            for k, r in enumerate(hist):
                w.writerow([k, _fmt(r), _fmt((r / hist[0]) ** (1.0 / k)) if k else "nan"])
        else:
            for k, (r, c) in enumerate(zip(hist, running_rates(hist)), start=1):
                w.writerow([k, _fmt(r), _fmt(c)])


def _write_fields(cfg, problem, grid, V):
    for m, v in enumerate(V):
        write_field(cfg.out / f"u_m{m + 1}.field", to_grid_function(v, problem, m, grid, cfg.order))


def _analysis_outputs(cfg, problem, grid, plan, bank, items):
    spectrum = analysis.discrete_spectrum(grid, cfg.order, problem.bc, problem.c)
    pred = analysis.predict_acr(plan, bank, spectrum)
    items["acr"] = pred.acr
    items["acr_lambda_h"] = pred.argmax
    for i, msg in enumerate(pred.warnings, start=1):
        items[f"warning_{i}"] = msg
        log.warning(msg)
    if cfg.dump_spectrum:
        analysis.write_spectrum_csv(cfg.out / "spectrum.csv", plan, bank, spectrum)
    if cfg.dump_mu_curve:
        lo, hi = cfg.mu_range or (0.0, 2.0 * max(problem.frequencies))
        lam, mu = analysis.sample_mu_curve((lo, hi), cfg.mu_count, plan, bank)
        analysis.write_mu_curve_csv(cfg.out / "mu_curve.csv", lam, mu)
    return pred


def _plan_items(plan, bank) -> dict:
    return {
        "scheme": plan.scheme,
        "dt": plan.dt,
        "num_steps": plan.num_steps,
        "num_periods": plan.num_periods,
        "periods_per_freq": " ".join(str(n) for n in plan.periods_per_freq),
        "omega_tilde": " ".join(_fmt(w) for w in plan.omega_tilde),
        "filter_cond": bank.cond,
    }


def _initial_guess(cfg, problem, grid):
    if not cfg.initial_guess:
        return None
    if len(cfg.initial_guess) != problem.num_freq:
        raise ConfigError("[run] initial_guess", f"need {problem.num_freq} field files, got {len(cfg.initial_guess)}")
    return np.array([gather(_read_on(grid, cfg, f, "[run] initial_guess"), problem.bc) for f in cfg.initial_guess])


def _solve(cfg, problem, grid, plan, bank, mode) -> SolverReport:
    solver = MFWHSolver(problem, grid, cfg.order, plan, bank, backend=cfg.backend)
    sc = SolverConfig(tol=cfg.tol, max_iter=cfg.max_iter, restart=cfg.restart, helmholtz_tol=cfg.helmholtz_tol,
                      initial_guess=_initial_guess(cfg, problem, grid))
    return solver.run_fpi(sc) if mode == "fpi" else solver.run_gmres(sc)


def execute(cfg: RunConfig) -> int:
    """Run one configured job and write its outputs to ``cfg.out``."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    problem, grid = build_problem(cfg)
    items: dict = {"mode": cfg.mode, "grid_cells": " ".join(map(str, cfg.cells)), "order": cfg.order,
                   "num_freq": problem.num_freq}

    if cfg.mode == "direct":
        U = solve_all(problem, grid, cfg.order)
        for m in range(problem.num_freq):
            items[f"relative_residual_{m + 1}"] = HelmholtzSystem.build(problem, grid, cfg.order, m).relative_residual(U[m])
        if cfg.dump_fields:
            _write_fields(cfg, problem, grid, U)
        write_report(cfg.out / "report.txt", items)
        return EXIT_OK

    plan = build_time_plan(problem, cfg.scheme, cfg.num_periods, grid=grid, order=cfg.order,
                           cfl=cfg.cfl, steps_per_period=cfg.steps_per_period)
    bank = build_filter_bank(plan)
    items.update(_plan_items(plan, bank))
    _analysis_outputs(cfg, problem, grid, plan, bank, items)
    if cfg.mode == "analyze":
        write_report(cfg.out / "report.txt", items)
        return EXIT_OK

    report = _solve(cfg, problem, grid, plan, bank, cfg.verify_solver if cfg.mode == "verify" else cfg.mode)
    items.update(report.summary())
    items["mode"] = cfg.mode
    if cfg.dump_residuals:
        write_residuals(cfg.out / "residuals.csv", report)
    if cfg.dump_fields:
        _write_fields(cfg, problem, grid, report.solution)

    status = EXIT_OK if report.converged else (EXIT_DIVERGED if report.diverged else EXIT_ERROR)
    if cfg.mode == "verify":
        U = solve_all(problem, grid, cfg.order)
        errs = [np.linalg.norm(report.solution[m] - U[m]) / np.linalg.norm(U[m]) for m in range(problem.num_freq)]
        for m, e in enumerate(errs, start=1):
            items[f"relative_error_{m}"] = e
            print(f"m={m} omega={problem.frequencies[m - 1]:g} relative error vs direct = {e:.3e}")
        ok = max(errs) <= cfg.verify_tol
        items["verify_passed"] = ok
        if status == EXIT_OK and not ok:
            status = EXIT_ERROR
    write_report(cfg.out / "report.txt", items)
    print(f"{report.mode}: iterations={report.iterations} wave_solves={report.wave_solves} "
          f"converged={report.converged} cr={report.cr:.6g} ecr={report.ecr:.6g}")
    if report.message:
        print(report.message, file=sys.stderr)
    return status


def _thread_limit(cfg: RunConfig):
    n = cfg.threads
    if n is None and os.environ.get("MFWH_THREADS"):
        try:
            n = int(os.environ["MFWH_THREADS"])
        except ValueError:
            raise ConfigError("MFWH_THREADS", f"expected an integer, got {os.environ['MFWH_THREADS']!r}") from None
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(config_path, mode: str | None = None, out: str | None = None) -> int:
    """Entry point used by the console script; returns the exit status."""
    try:
        cfg = load_config(config_path, mode, out)
        with _thread_limit(cfg):
            return execute(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (SingularSystemError, SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mfwh", description="Multi-frequency WaveHoltz Helmholtz solver")
    ap.add_argument("config", help="INI config file")
    ap.add_argument("--mode", choices=MODES, help="override [run] mode")
    ap.add_argument("--out", help="override [run] out (output directory)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run(args.config, args.mode, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
