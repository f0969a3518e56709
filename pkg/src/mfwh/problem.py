"""Multi-frequency Helmholtz problem sets and their composite wave forcings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .grid import BoundaryCondition, Grid, GridFunction


@dataclass(frozen=True)
class GaussianSource:
    """Spatial factor ``a exp(-b^2 |x - x0|^2)``."""

    amplitude: float
    width: float
    center: tuple[float, ...]

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"Gaussian width coefficient must be positive, got {self.width}")

    def __call__(self, *coords):
        r2 = sum((np.asarray(x) - x0) ** 2 for x, x0 in zip(coords, self.center))
        return self.amplitude * np.exp(-(self.width**2) * r2)


Forcing = Union[GaussianSource, GridFunction]


@dataclass(frozen=True)
class MultiHelmholtzProblem:
    """``N_f`` Helmholtz problems ``c^2 Lap u_m + w_m^2 u_m = f_m`` sharing one operator.

    Frequencies must be positive and strictly increasing. ``boundary_data``
    entries are ``None`` (homogeneous) or grid functions holding Dirichlet
    values / outward normal derivatives at the boundary points.
    """

    frequencies: tuple[float, ...]
    forcings: tuple[Forcing, ...]
    bc: BoundaryCondition
    boundary_data: tuple[GridFunction | None, ...] = ()
    c: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("need at least one frequency")
        if not np.all(w > 0):
            raise ValueError(f"frequencies must be positive, got {list(w)}")
        if np.any(np.diff(w) <= 0):
            raise ValueError(f"frequencies must be strictly increasing, got {list(w)}")
        if len(self.forcings) != w.size:
            raise ValueError(f"{w.size} frequencies but {len(self.forcings)} forcings")
        if not self.boundary_data:
            object.__setattr__(self, "boundary_data", (None,) * w.size)
        elif len(self.boundary_data) != w.size:
            raise ValueError(f"{w.size} frequencies but {len(self.boundary_data)} boundary data entries")
        if not self.c > 0:
            raise ValueError("wave speed must be positive")
        object.__setattr__(self, "frequencies", tuple(float(x) for x in w))

    @property
    def num_freq(self) -> int:
        return len(self.frequencies)

    @property
    def has_boundary_data(self) -> bool:
        return any(g is not None for g in self.boundary_data)

    def _index(self, m: int) -> int:
        if not 0 <= m < self.num_freq:
            raise IndexError(f"frequency index {m} out of range for {self.num_freq} frequencies")
        return m

    def gaussian_source(self, m: int, x: Sequence[float]) -> float:
        """Spatial forcing of problem ``m`` (0-based) at point ``x``."""
        src = self.forcings[self._index(m)]
        if not isinstance(src, GaussianSource):
            raise TypeError(f"forcing {m} is tabulated, not a Gaussian")
        return float(src(*x))

    def forcing(self, m: int, grid: Grid) -> GridFunction:
        """Forcing ``f_m`` sampled at every point of ``grid``."""
        src = self.forcings[self._index(m)]
        if isinstance(src, GridFunction):
            if src.grid != grid:
                raise ValueError(f"tabulated forcing {m} lives on a different grid")
            return src.copy()
        return GridFunction.from_function(grid, src)

    def boundary(self, m: int) -> GridFunction | None:
        return self.boundary_data[self._index(m)]


def forcing_time_factors(t: float, plan) -> np.ndarray:
    """Per-frequency factors ``cos(wt_m t) (beta_I + 2 alpha_I cos(wt_m dt))``."""
    wt = np.asarray(plan.omega_tilde)
    return np.cos(wt * t) * (plan.beta_i + 2.0 * plan.alpha_i * np.cos(wt * plan.dt))


def composite_wave_forcing(problem: MultiHelmholtzProblem, x: Sequence[float], t: float, plan) -> float:
    """Composite interior forcing of the discrete wave scheme at point ``x`` and time ``t``."""
    fac = forcing_time_factors(t, plan)
    return float(sum(problem.gaussian_source(m, x) * fac[m] for m in range(problem.num_freq)))


def composite_boundary_forcing(values: Sequence[float], t: float, plan) -> float:
    """Composite boundary data ``sum_m g_m cos(wt_m t)`` given the per-m values ``g_m(x)``."""
    wt = np.asarray(plan.omega_tilde)
    return float(np.dot(np.asarray(values, dtype=float), np.cos(wt * t)))


def paper_three_frequency(bc: BoundaryCondition | None = None) -> MultiHelmholtzProblem:
    """Three Gaussian-forced problems on the unit square (w = 5.1, 10.1, 15.1)."""
    bc = bc or BoundaryCondition.uniform("dirichlet", 2)
    centers = [(0.6, 0.45), (0.4, 0.5), (0.55, 0.5)]
    amps = [25.0, 100.0, 225.0]
    srcs = tuple(GaussianSource(a, 15.0, x0) for a, x0 in zip(amps, centers))
    return MultiHelmholtzProblem((5.1, 10.1, 15.1), srcs, bc)


def paper_seven_frequency(bc: BoundaryCondition | None = None) -> MultiHelmholtzProblem:
    """Seven Gaussian-forced problems on the unit square (w = 15 ... 58)."""
    bc = bc or BoundaryCondition.uniform("dirichlet", 2)
    freqs = (15.0, 21.0, 26.0, 32.0, 41.0, 49.0, 58.0)
    widths = (18.0, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0)
    centers = [(0.6, 0.45), (0.4, 0.55), (0.55, 0.5), (0.5, 0.5), (0.44, 0.54), (0.53, 0.45), (0.44, 0.47)]
    srcs = tuple(GaussianSource(400.0, b, x0) for b, x0 in zip(widths, centers))
    return MultiHelmholtzProblem(freqs, srcs, bc)


def paper_single_frequency(bc: BoundaryCondition | None = None) -> MultiHelmholtzProblem:
    """One Gaussian-forced problem on the unit square at w = 5.1."""
    bc = bc or BoundaryCondition.uniform("dirichlet", 2)
    return MultiHelmholtzProblem((5.1,), (GaussianSource(25.0, 15.0, (0.6, 0.45)),), bc)
