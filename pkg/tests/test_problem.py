import math
from decimal import Decimal, getcontext

import numpy as np
import pytest

from mfwh.grid import DIRICHLET, BoundaryCondition, GridFunction, make_grid
from mfwh.problem import (
    GaussianSource,
    MultiHelmholtzProblem,
    composite_boundary_forcing,
    composite_wave_forcing,
    paper_seven_frequency,
    paper_single_frequency,
    paper_three_frequency,
)
from mfwh.wave import build_time_plan


@pytest.fixture
def three():
    return paper_three_frequency()


def test_source_peak(three):
    assert three.gaussian_source(0, (0.6, 0.45)) == 25.0


def test_source_decay(three):
    for m in range(3):
        assert three.gaussian_source(m, (50.0, -40.0)) == 0.0


def test_source_offset_high_precision(three):
    getcontext().prec = 40
    exact = Decimal(25) * (Decimal("-2.25")).exp()
    assert three.gaussian_source(0, (0.7, 0.45)) == pytest.approx(float(exact), rel=1e-14)


def test_source_index_range(three):
    with pytest.raises(IndexError):
        three.gaussian_source(3, (0.5, 0.5))


def test_gaussian_width_positive():
    with pytest.raises(ValueError):
        GaussianSource(1.0, 0.0, (0.5,))


@pytest.mark.parametrize("freqs", [(10.1, 5.1), (5.1, 5.1), (-1.0, 2.0), ()])
def test_frequency_validation(freqs):
    bc = BoundaryCondition.uniform(DIRICHLET, 1)
    src = tuple(GaussianSource(1.0, 1.0, (0.5,)) for _ in freqs)
    with pytest.raises(ValueError):
        MultiHelmholtzProblem(freqs, src, bc)


def test_count_mismatch():
    bc = BoundaryCondition.uniform(DIRICHLET, 1)
    with pytest.raises(ValueError):
        MultiHelmholtzProblem((1.0, 2.0), (GaussianSource(1.0, 1.0, (0.5,)),), bc)


def test_presets():
    assert paper_three_frequency().frequencies == (5.1, 10.1, 15.1)
    assert paper_seven_frequency().frequencies == (15, 21, 26, 32, 41, 49, 58)
    assert paper_single_frequency().num_freq == 1


def test_forcing_sampled_and_tabulated(three):
    g = make_grid([(0, 1), (0, 1)], 8, 2)
    f = three.forcing(1, g)
    x, y = g.mesh()
    assert np.allclose(f.values, 100 * np.exp(-225 * ((x - 0.4) ** 2 + (y - 0.5) ** 2)))
    tab = MultiHelmholtzProblem((1.0,), (f,), three.bc)
    assert np.array_equal(tab.forcing(0, g).values, f.values)
    with pytest.raises(ValueError):
        tab.forcing(0, make_grid([(0, 1), (0, 1)], 16, 2))


def _explicit_plan(problem):
    g = make_grid([(0, 1), (0, 1)], 16, 2)
    return build_time_plan(problem, "explicit", 1, grid=g, order=2)


def test_explicit_forcing_at_zero():
    p = paper_single_frequency()
    plan = _explicit_plan(p)
    x = (0.3, 0.7)
    assert composite_wave_forcing(p, x, 0.0, plan) == p.gaussian_source(0, x)


def test_explicit_single_reduces_to_cosine():
    p = paper_single_frequency()
    plan = _explicit_plan(p)
    x = (0.55, 0.4)
    for t in (0.1, 0.77, 3.0):
        assert composite_wave_forcing(p, x, t, plan) == p.gaussian_source(0, x) * math.cos(plan.omega_tilde[0] * t)


def test_trapezoidal_factor():
    p = paper_single_frequency()
    plan = build_time_plan(p, "trapezoidal", 1)
    x = (0.6, 0.45)
    expected = 25.0 * math.cos(plan.omega_tilde[0] * plan.dt)
    assert composite_wave_forcing(p, x, 0.0, plan) == pytest.approx(expected, rel=1e-15)


def test_three_frequency_brute_force(three):
    plan = build_time_plan(three, "full_weighting", 2)
    t = 0.5 * 2 * math.pi / plan.omega_tilde[0]
    x = (0.5, 0.52)
    a, b = plan.alpha_i, plan.beta_i
    total = 0.0
    for m, (amp, x0) in enumerate([(25, (0.6, 0.45)), (100, (0.4, 0.5)), (225, (0.55, 0.5))]):
        f = amp * math.exp(-225 * ((x[0] - x0[0]) ** 2 + (x[1] - x0[1]) ** 2))
        w = plan.omega_tilde[m]
        total += f * math.cos(w * t) * (b + 2 * a * math.cos(w * plan.dt))
    assert composite_wave_forcing(three, x, t, plan) == pytest.approx(total, rel=1e-13)


def test_boundary_forcing(three):
    plan = build_time_plan(three, "trapezoidal", 1)
    for t in (0.0, 0.4, 2.0):
        assert composite_boundary_forcing([0.0, 0.0, 0.0], t, plan) == 0.0
    single = build_time_plan(paper_single_frequency(), "trapezoidal", 1)
    assert composite_boundary_forcing([1.5], 0.0, single) == 1.5
    # cos(w1 t) = -cos(w2 t) when (w1 + w2) t = pi
    t = math.pi / (plan.omega_tilde[0] + plan.omega_tilde[1])
    assert abs(composite_boundary_forcing([2.0, 2.0, 0.0], t, plan)) < 1e-14


def test_boundary_data_count():
    g = make_grid([(0, 1)], [8], 2)
    bc = BoundaryCondition.uniform(DIRICHLET, 1)
    src = GaussianSource(1.0, 1.0, (0.5,))
    with pytest.raises(ValueError):
        MultiHelmholtzProblem((1.0, 2.0), (src, src), bc, (GridFunction(g),))
