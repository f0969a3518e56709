"""
Multi-frequency WaveHoltz iteration.

One application of the MFWH map evolves the wave equation from the sum of
the current iterates, streams the filter sums, and solves the small filter
system at every grid point. The map is affine, ``W V = S V + b``; the
fixed-point iteration applies it repeatedly and the accelerated solver runs
GMRES on ``(I - S) V = b`` with ``b = W 0``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .filters import FilterAccumulator, FilterBank, build_filter_bank, filter_solve
from .grid import Grid, GridFunction, apply_laplacian, boundary_lift, fill_ghosts, gather, scatter
from .krylov import gmres
from .problem import MultiHelmholtzProblem
from .wave import TimePlan, WaveSolver

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    tol: float = 1e-10
    """FPI: stop when ``r_k < tol * r_1``. GMRES: relative residual of the linear system."""
    max_iter: int = 200
    restart: int = 200
    helmholtz_tol: float = 1e-6
    """Bound on the normalized a-posteriori Helmholtz residual for a converged run."""
    divergence_factor: float = 1e3
    divergence_patience: int = 5
    initial_guess: np.ndarray | None = None
    """Iterates over the unknowns, shape ``(N_f, n)``; zero when ``None``."""


@dataclass
class SolverReport:
    mode: str
    iterations: int
    residuals: list[float]
    cr: float
    ecr: float
    helmholtz_residuals: np.ndarray
    wall_time: float
    wave_solves: int
    converged: bool
    diverged: bool = False
    message: str = ""
    solution: np.ndarray | None = field(default=None, repr=False)
    """Converged iterates over the unknowns, shape ``(N_f, n)``."""

    def summary(self) -> dict:
        out = {
            "mode": self.mode,
            "iterations": self.iterations,
            "wave_solves": self.wave_solves,
            "converged": self.converged,
            "diverged": self.diverged,
            "cr": self.cr,
            "ecr": self.ecr,
            "final_residual": self.residuals[-1] if self.residuals else float("nan"),
            "wall_time": self.wall_time,
        }
        for m, r in enumerate(self.helmholtz_residuals):
            out[f"helmholtz_residual_{m + 1}"] = float(r)
        if self.message:
            out["message"] = self.message
        return out


def residual(v_new: np.ndarray, v_old: np.ndarray) -> float:
    """RMS change of the iterates over all frequencies and unknowns."""
    d = np.asarray(v_new) - np.asarray(v_old)
    return float(np.sqrt(np.mean(d * d)))


def convergence_rates(history, num_periods: int) -> tuple[float, float]:
    """Average rate ``(r_N / r_1)^(1/N)`` and its per-period version ``CR^(1/N_p)``.

    ``history[0]`` is ``r_1`` and ``N = len(history)``.
    """
    r = list(history)
    if len(r) < 2:
        raise ValueError("need at least two residuals")
    if r[0] <= 0:
        raise ValueError("first residual must be positive")
    cr = (r[-1] / r[0]) ** (1.0 / len(r))
    return cr, cr ** (1.0 / num_periods)


def running_rates(history) -> list[float]:
    """``(r_k / r_1)^(1/k)`` for each stored residual."""
    r0 = history[0]
    return [(r / r0) ** (1.0 / k) if r0 > 0 else float("nan") for k, r in enumerate(history, start=1)]


class MFWHSolver:
    """Owns the wave stepper, filter bank and work counters for one problem set."""

    def __init__(self, problem: MultiHelmholtzProblem, grid: Grid, order: int, plan: TimePlan,
                 bank: FilterBank | None = None, backend: str = "direct", inner_tol: float = 1e-12):
        self.problem = problem
        self.grid = grid
        self.order = order
        self.plan = plan
        self.bank = bank or build_filter_bank(plan)
        self.wave = WaveSolver(problem, plan, grid, order, backend, inner_tol)
        self.num_unknowns = self.wave.num_unknowns
        self.wave_solves = 0
        self._rhs = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.problem.num_freq, self.num_unknowns

    def apply(self, V: np.ndarray) -> np.ndarray:
        """One MFWH sweep: wave solve from ``sum_m V_m`` then the implicit filter."""
        V = np.asarray(V, dtype=float).reshape(self.shape)
        acc = FilterAccumulator(self.bank, self.num_unknowns)
        self.wave.run(V.sum(axis=0), acc)
        self.wave_solves += 1
        if not acc.complete:  # pragma: no cover
            raise RuntimeError("filter accumulation incomplete")
        return filter_solve(self.bank, acc.p)

    def rhs(self) -> np.ndarray:
        """``b = W 0``, cached."""
        if self._rhs is None:
            self._rhs = self.apply(np.zeros(self.shape))
        return self._rhs

    def helmholtz_residuals(self, V: np.ndarray) -> np.ndarray:
        return helmholtz_residual_check(V, self.problem, self.grid, self.order)

    def fields(self, V: np.ndarray) -> list[GridFunction]:
        """Iterates as grid functions with boundary values and ghosts filled."""
        return [to_grid_function(v, self.problem, m, self.grid, self.order) for m, v in enumerate(V)]

    def run_fpi(self, config: SolverConfig | None = None) -> SolverReport:
        return run_fpi(self, config)

    def run_gmres(self, config: SolverConfig | None = None) -> SolverReport:
        return run_gmres(self, config)


def apply_W(solver: MFWHSolver, V: np.ndarray) -> np.ndarray:
    return solver.apply(V)


def to_grid_function(v: np.ndarray, problem: MultiHelmholtzProblem, m: int, grid: Grid, order: int) -> GridFunction:
    u = scatter(np.asarray(v), grid.zeros(), problem.bc)
    return fill_ghosts(u, problem.bc, problem.boundary(m), order)


def helmholtz_residual_check(V, problem: MultiHelmholtzProblem, grid: Grid, order: int) -> np.ndarray:
    """Normalized RMS residual of ``L_h V_m + w_m^2 V_m = f_m`` per frequency.

    ``V`` is an ``(N_f, n)`` array over the unknowns or a list of grid
    functions. Pristine frequencies are used. Normalized by the RMS of the
    right-hand side ``f_m`` minus the boundary-data lifting (``f_m`` itself
    for homogeneous data).
    """
    bc = problem.bc
    out = np.empty(problem.num_freq)
    for m in range(problem.num_freq):
        v = V[m]
        if isinstance(v, GridFunction):
            v = gather(v, bc)
        u = to_grid_function(v, problem, m, grid, order)
        Lu = gather(apply_laplacian(u, order, problem.c), bc)
        f = gather(problem.forcing(m, grid), bc)
        res = Lu + problem.frequencies[m] ** 2 * v - f
        rhs = f - boundary_lift(grid, order, bc, problem.boundary(m), problem.c)
        scale = np.sqrt(np.mean(rhs * rhs))
        out[m] = np.sqrt(np.mean(res * res)) / (scale if scale > 0 else 1.0)
    return out


def _finish(solver, mode, V, history, its, t0, converged_linear, diverged, config, message=""):
    hres = solver.helmholtz_residuals(V)
    ok = bool(converged_linear and np.all(hres <= config.helmholtz_tol))
    if converged_linear and not ok and not message:
        message = ("linear iteration converged but the Helmholtz residual is large "
                   f"(max {hres.max():.3e}): possible spurious resonance; try another number of periods")
    if len(history) >= 2 and history[0] > 0:
        cr, ecr = convergence_rates(history, solver.plan.num_periods)
    else:
        cr = ecr = float("nan")
    return SolverReport(mode, its, list(history), cr, ecr, hres, time.perf_counter() - t0,
                        solver.wave_solves, ok, diverged, message, V)


def run_fpi(solver: MFWHSolver, config: SolverConfig | None = None) -> SolverReport:
    """Fixed-point iteration ``V_{k+1} = W V_k``.

    Stops when ``r_k < tol * r_1``, at ``max_iter``, or on divergence
    (residual above ``divergence_factor * r_1`` and growing for
    ``divergence_patience`` consecutive iterations), which is reported.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    solver.wave_solves = 0
    V = np.zeros(solver.shape) if config.initial_guess is None else np.array(config.initial_guess, dtype=float)
    history: list[float] = []
    growing = 0
    converged = diverged = False
    k = 0
    for k in range(1, config.max_iter + 1):
        V_new = solver.apply(V)
        r = residual(V_new, V)
        V = V_new
        if history and r > history[-1]:
            growing += 1
        else:
            growing = 0
        history.append(r)
        log.debug("fpi k=%d r=%.3e", k, r)
        if r == 0.0 or r < config.tol * history[0]:
            converged = True
            break
        if r > config.divergence_factor * history[0] and growing >= config.divergence_patience:
            diverged = True
            break
    msg = "fixed-point iteration diverged" if diverged else ""
    return _finish(solver, "fpi", V, history, k, t0, converged, diverged, config, msg)


def run_gmres(solver: MFWHSolver, config: SolverConfig | None = None) -> SolverReport:
    """Matrix-free GMRES on ``(I - S) V = b``; every operator application is one wave solve."""
    config = config or SolverConfig()
    t0 = time.perf_counter()
    solver.wave_solves = 0
    solver._rhs = None
    b = solver.rhs().ravel()

    def matvec(v):
        return v - (solver.apply(v).ravel() - b)

    if config.initial_guess is not None:
        x0 = np.asarray(config.initial_guess, dtype=float).ravel()
        res = gmres(matvec, b - matvec(x0), tol=config.tol, restart=config.restart, maxiter=config.max_iter)
        x = x0 + res.x
    else:
        res = gmres(matvec, b, tol=config.tol, restart=config.restart, maxiter=config.max_iter)
        x = res.x
    V = x.reshape(solver.shape)
    msg = "" if res.converged else "GMRES did not reach the tolerance"
    return _finish(solver, "gmres", V, res.residuals, res.iterations, t0, res.converged, False, config, msg)
