"""Multi-frequency WaveHoltz: several Helmholtz solutions from one wave solve per iteration."""

from .analysis import MuFunction, SpectrumInfo, discrete_spectrum, predict_acr, sample_mu_curve
from .direct import solve_all, solve_direct
from .driver import MFWHSolver, SolverConfig, SolverReport
from .filters import FilterBank, build_filter_bank
from .grid import BoundaryCondition, Grid, GridFunction, make_grid
from .problem import (
    GaussianSource,
    MultiHelmholtzProblem,
    paper_seven_frequency,
    paper_single_frequency,
    paper_three_frequency,
)
from .wave import TimePlan, WaveSolver, build_time_plan

__version__ = "0.1.0"

__all__ = [
    "BoundaryCondition",
    "FilterBank",
    "GaussianSource",
    "Grid",
    "GridFunction",
    "MFWHSolver",
    "MuFunction",
    "MultiHelmholtzProblem",
    "SolverConfig",
    "SolverReport",
    "SpectrumInfo",
    "TimePlan",
    "WaveSolver",
    "build_filter_bank",
    "build_time_plan",
    "discrete_spectrum",
    "make_grid",
    "paper_seven_frequency",
    "paper_single_frequency",
    "paper_three_frequency",
    "predict_acr",
    "sample_mu_curve",
    "solve_all",
    "solve_direct",
]
