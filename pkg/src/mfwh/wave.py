"""
Second-order time stepping of the forced wave equation.

The scheme is

    (W^{n+1} - 2W^n + W^{n-1}) / dt^2
        = L_h (a W^{n+1} + b W^n + a W^{n-1}) - F^n,   b = 1 - 2a,

with ``a = 0`` (explicit leapfrog), ``1/2`` (trapezoidal) or ``1/4`` (full
weighting). Forcings oscillate at modified frequencies chosen so that a
time-harmonic discrete solution at the modified frequency solves the
discrete Helmholtz problem at the pristine frequency exactly.

States are vectors over the unknowns of the boundary condition; boundary
values and ghosts follow from the boundary data at each time level, which
enters through a lifting vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import BoundaryCondition, Grid, assemble_operator, boundary_lift, gather
from .krylov import SolverError, cg
from .problem import MultiHelmholtzProblem, forcing_time_factors

SCHEMES = {"explicit": 0.0, "trapezoidal": 0.5, "full_weighting": 0.25}


def scheme_weights(scheme: str) -> tuple[float, float]:
    """``(alpha_I, beta_I)`` for a named scheme."""
    try:
        a = SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}") from None
    return a, 1.0 - 2.0 * a


def modified_frequency(omega, dt: float, alpha_i: float, beta_i: float):
    """Frequency whose discrete oscillation matches ``omega`` under the scheme.

    ``(1/dt) arccos((1 - (b/2)(w dt)^2) / (1 + a (w dt)^2))``, evaluated as
    ``(2/dt) arcsin(sqrt((1 - cos)/2))`` so small ``w dt`` keeps full precision.
    Also maps spectrum values (the adjusted eigenvalues).
    """
    x2 = (np.asarray(omega, dtype=float) * dt) ** 2
    one_minus_cos = (alpha_i + 0.5 * beta_i) * x2 / (1.0 + alpha_i * x2)
    s = 0.5 * one_minus_cos
    if np.any(s > 1.0 + 1e-14):
        raise ValueError("arccos argument below -1: w dt exceeds the explicit stability limit")
    out = 2.0 / dt * np.arcsin(np.sqrt(np.minimum(s, 1.0)))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TimePlan:
    """Time step, step count, modified frequencies and filter horizons."""

    scheme: str
    alpha_i: float
    beta_i: float
    dt: float
    num_steps: int
    num_periods: int
    omega: tuple[float, ...]
    omega_tilde: tuple[float, ...]
    periods_per_freq: tuple[int, ...]
    cfl: float | None = None
    steps_per_period: float | None = None

    @property
    def num_freq(self) -> int:
        return len(self.omega)

    @property
    def period_tilde(self) -> tuple[float, ...]:
        return tuple(2.0 * math.pi / w for w in self.omega_tilde)

    @property
    def horizons(self) -> tuple[float, ...]:
        """Filter horizons ``N_{p,m} * 2 pi / wt_m``; the first equals ``num_steps * dt``."""
        return tuple(n * t for n, t in zip(self.periods_per_freq, self.period_tilde))

    @property
    def final_time(self) -> float:
        return self.num_steps * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.num_steps + 1)


def gershgorin_bound(A: sp.spmatrix) -> float:
    """Upper bound on the spectral radius of ``A`` from absolute row sums."""
    return float(abs(A).sum(axis=1).max())


def build_time_plan(
    omega,
    scheme: str,
    num_periods: int,
    *,
    grid: Grid | None = None,
    order: int | None = None,
    bc: BoundaryCondition | None = None,
    c: float = 1.0,
    cfl: float = 0.9,
    steps_per_period: float = 10.0,
) -> TimePlan:
    """Choose ``dt`` and ``N_t`` so the longest filter horizon is whole steps.

    Explicit plans start from ``cfl * 2 / sqrt(lambda_max)`` (Gershgorin bound
    on the assembled operator; needs ``grid``, ``order`` and ``bc``); implicit
    plans from the shortest pristine period over ``steps_per_period``. The
    coupling between ``dt``, the modified frequencies and ``N_t`` is resolved
    exactly: ``N_t`` is the fewest steps whose ``dt`` does not exceed the
    initial estimate.

    ``omega`` may also be a ``MultiHelmholtzProblem``.
    """
    if isinstance(omega, MultiHelmholtzProblem):
        bc = bc or omega.bc
        c = omega.c
        omega = omega.frequencies
    omega = tuple(float(w) for w in omega)
    if num_periods < 1:
        raise ValueError(f"num_periods must be >= 1, got {num_periods}")
    a, b = scheme_weights(scheme)
    if a == 0.0:
        if grid is None or order is None or bc is None:
            raise ValueError("explicit plans need grid, order and bc for the CFL bound")
        lam_max = gershgorin_bound(assemble_operator(grid, order, bc, c))
        dt = cfl * 2.0 / math.sqrt(lam_max)
        if omega[-1] * dt > 2.0:
            raise ValueError(f"explicit time step {dt:.3e} too large for w = {omega[-1]} (w dt > 2)")
    else:
        dt = 2.0 * math.pi / omega[-1] / steps_per_period

    # wt_1 dt = 2 pi N_p / N_t fixes dt in closed form: with x = wt_1 dt the
    # modified-frequency relation gives (w_1 dt)^2 = 2 sin^2(x/2) / (a cos x + b/2).
    # x grows with dt, so the smallest N_t with dt(N_t) <= dt_0 is the ceiling below.
    x0 = float(modified_frequency(omega[0], dt, a, b)) * dt
    nt = math.ceil(2.0 * math.pi * num_periods / x0 - 1e-9)
    x = 2.0 * math.pi * num_periods / nt
    dt = math.sqrt(2.0 * math.sin(0.5 * x) ** 2 / (a * math.cos(x) + 0.5 * b)) / omega[0]
    wt = modified_frequency(np.array(omega), dt, a, b)
    ratio = num_periods * wt / wt[0]
    nper = np.floor(ratio + 1e-10).astype(int)
    nper[0] = num_periods
    if a > 0.0 and 2.0 * math.pi / wt[-1] / dt < 5.0:
        raise ValueError("implicit plan has fewer than five time steps per period of the highest frequency")
    return TimePlan(
        scheme=scheme,
        alpha_i=a,
        beta_i=b,
        dt=dt,
        num_steps=nt,
        num_periods=int(num_periods),
        omega=omega,
        omega_tilde=tuple(float(x) for x in wt),
        periods_per_freq=tuple(int(n) for n in nper),
        cfl=cfl if a == 0.0 else None,
        steps_per_period=None if a == 0.0 else steps_per_period,
    )


class ImplicitSolver:
    """Solves ``(I - shift L_h) u = rhs`` on the unknowns.

    ``backend`` is ``"direct"`` (sparse LU, factored once) or ``"cg"``
    (requires a symmetric operator, e.g. second order or Dirichlet).
    """

    def __init__(self, L: sp.spmatrix, shift: float, backend: str = "direct", tol: float = 1e-12,
                 maxiter: int = 10000):
        if shift < 0:
            raise ValueError("shift must be non-negative")
        self.shift = shift
        self.backend = backend
        self.tol = tol
        self.maxiter = maxiter
        n = L.shape[0]
        self.matrix = (sp.identity(n, format="csc") - shift * L).tocsc()
        self.cg_iterations = 0
        if shift == 0.0:
            self._solve = lambda rhs: rhs.copy()
        elif backend == "direct":
            self._lu = spla.splu(self.matrix)
            self._solve = self._lu.solve
        elif backend == "cg":
            asym = abs(self.matrix - self.matrix.T).max()
            if asym > 1e-12 * abs(self.matrix).max():
                raise ValueError("CG backend needs a symmetric implicit operator; use backend='direct'")
            M = self.matrix.tocsr()
            self._solve = lambda rhs: self._cg(M, rhs)
        else:
            raise ValueError(f"unknown implicit backend {backend!r}")

    def _cg(self, M, rhs):
        x, its = cg(M.__matmul__, rhs, tol=self.tol, maxiter=self.maxiter)
        self.cg_iterations += its
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._solve(rhs)


def implicit_solve(rhs: np.ndarray, shift: float, grid: Grid, order: int, bc: BoundaryCondition,
                   boundary_data=None, c: float = 1.0, backend: str = "direct", tol: float = 1e-12) -> np.ndarray:
    """One-off solve of ``(I - shift L_h) u = rhs`` with ``u`` carrying ``boundary_data``.

    ``rhs`` is a vector over the unknowns; returns the unknown values of ``u``.
    """
    L = assemble_operator(grid, order, bc, c)
    lift = boundary_lift(grid, order, bc, boundary_data, c)
    return ImplicitSolver(L, shift, backend, tol).solve(rhs + shift * lift)


@dataclass
class WaveState:
    """Two consecutive time levels over the unknowns."""

    current: np.ndarray
    previous: np.ndarray
    n: int
    dt: float

    @property
    def t(self) -> float:
        return self.n * self.dt


class WaveSolver:
    """Time stepper for the composite forced wave equation of a problem set.

    The spatial factors of the forcings and the boundary lifting vectors are
    sampled once; the time factors are evaluated analytically every step.
    """

    def __init__(self, problem: MultiHelmholtzProblem, plan: TimePlan, grid: Grid, order: int,
                 backend: str = "direct", tol: float = 1e-12):
        self.problem = problem
        self.plan = plan
        self.grid = grid
        self.order = order
        self.bc = problem.bc
        self.L = assemble_operator(grid, order, self.bc, problem.c)
        self.forcings = np.array([gather(problem.forcing(m, grid), self.bc) for m in range(problem.num_freq)])
        self.lifts = None
        if problem.has_boundary_data:
            self.lifts = np.array([boundary_lift(grid, order, self.bc, problem.boundary(m), problem.c)
                                   for m in range(problem.num_freq)])
        dt = plan.dt
        self.solver = ImplicitSolver(self.L, plan.alpha_i * dt * dt, backend, tol)
        self.num_unknowns = self.L.shape[0]

    def forcing(self, n: int) -> np.ndarray:
        """Composite interior forcing ``F^n`` at the unknowns."""
        return forcing_time_factors(n * self.plan.dt, self.plan) @ self.forcings

    def lift(self, n: int) -> np.ndarray | float:
        """Boundary-data contribution to ``L_h W^n`` at the unknowns."""
        if self.lifts is None:
            return 0.0
        wt = np.asarray(self.plan.omega_tilde)
        return np.cos(wt * n * self.plan.dt) @ self.lifts

    def first_step(self, w0: np.ndarray) -> np.ndarray:
        """``W^1`` from ``W^0`` with zero initial velocity."""
        p = self.plan
        dt2 = p.dt * p.dt
        rhs = w0 + 0.5 * p.beta_i * dt2 * (self.L @ w0 + self.lift(0)) - 0.5 * dt2 * self.forcing(0)
        if p.alpha_i:
            rhs = rhs + p.alpha_i * dt2 * self.lift(1)
        return self.solver.solve(rhs)

    def step(self, state: WaveState) -> WaveState:
        """Advance ``state`` by one step; returns the new state."""
        p = self.plan
        dt2 = p.dt * p.dt
        n = state.n
        w, wm = state.current, state.previous
        if p.alpha_i:
            Lw = self.L @ (p.beta_i * w + p.alpha_i * wm)
            lift = p.beta_i * self.lift(n) + p.alpha_i * (self.lift(n - 1) + self.lift(n + 1))
        else:
            Lw = self.L @ w
            lift = self.lift(n)
        rhs = 2.0 * w - wm + dt2 * (Lw + lift) - dt2 * self.forcing(n)
        return WaveState(self.solver.solve(rhs), w, n + 1, p.dt)

    def run(self, w0: np.ndarray, callback: Callable[[int, np.ndarray], None] | None = None) -> WaveState:
        """Evolve from ``W^0`` for ``plan.num_steps`` steps.

        ``callback(n, W^n)`` is invoked for ``n = 0 .. N_t`` in order; no
        history is retained.
        """
        w0 = np.asarray(w0, dtype=float)
        if callback:
            callback(0, w0)
        state = WaveState(self.first_step(w0), w0, 1, self.plan.dt)
        if callback:
            callback(1, state.current)
        while state.n < self.plan.num_steps:
            state = self.step(state)
            if callback:
                callback(state.n, state.current)
        return state


__all__ = [
    "SCHEMES",
    "ImplicitSolver",
    "SolverError",
    "TimePlan",
    "WaveSolver",
    "WaveState",
    "build_time_plan",
    "gershgorin_bound",
    "implicit_solve",
    "modified_frequency",
    "scheme_weights",
]
