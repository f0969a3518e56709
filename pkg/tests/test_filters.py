import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mfwh.filters import (
    FilterAccumulator,
    accumulate_filters,
    alpha_shift,
    beta_continuous,
    beta_discrete,
    beta_discrete_raw,
    build_filter_bank,
    filter_solve,
    quadrature_weights,
    sinc,
)
from mfwh.problem import paper_three_frequency
from mfwh.wave import build_time_plan


def loop_beta(lam, wt, T, alpha, dt, nt):
    """Plain-loop discrete filter with its own partial-cell weights."""
    x = T / dt
    q = min(int(math.floor(x + 1e-9)), nt)
    th = max(x - q, 0.0) if abs(x - round(x)) > 1e-9 else 0.0
    total = 0.0
    for n in range(nt + 1):
        if n == 0 or n == q:
            s = dt / 2
        elif n < q:
            s = dt
        else:
            s = 0.0
        if n == q:
            s += dt * th * (1 - th / 2)
        if n == q + 1:
            s += dt * th * th / 2
        t = n * dt
        total += s * (math.cos(wt * t) - alpha / 2) * math.cos(lam * t)
    return 2 / T * total


# ---------------------------------------------------------------- continuous


def test_sinc_branches_agree():
    x = np.array([0.0, 5e-5, 9.99e-5, 1.001e-4, 0.3])
    ref = np.array([1.0] + [float(mpmath.sin(v) / v) for v in x[1:]])
    assert np.allclose(sinc(x), ref, rtol=1e-15, atol=0)


@pytest.mark.parametrize("n", [1, 3])
def test_beta_continuous_peak_and_mean(n):
    w = 5.0
    T = n * 2 * math.pi / w
    assert beta_continuous(w, w, T, 0.5) == pytest.approx(1.0, abs=1e-14)
    assert beta_continuous(0.0, w, T, 0.5) == pytest.approx(-0.5, abs=1e-14)


def test_beta_continuous_quadrature():
    w, T, a, lam = 5.0, 2 * math.pi / 5, 0.5, 7.0
    val, _ = quad(lambda t: (math.cos(w * t) - a / 2) * math.cos(lam * t), 0, T, epsabs=1e-14, epsrel=1e-14)
    assert beta_continuous(lam, w, T, a) == pytest.approx(2 / T * val, abs=1e-10)


def test_beta_continuous_rejects_horizon():
    with pytest.raises(ValueError):
        beta_continuous(1.0, 1.0, 0.0, 0.5)


# ---------------------------------------------------------------- alpha shift


def test_alpha_small_angle():
    assert abs(alpha_shift(1e-4, 1.0) - 0.5) <= 1e-8


def test_alpha_tenth_period():
    mpmath.mp.dps = 30
    exact = mpmath.tan(mpmath.pi / 10) / mpmath.tan(mpmath.pi / 5)
    assert alpha_shift(2 * math.pi / 10, 1.0) == pytest.approx(float(exact), rel=1e-14)


def test_alpha_quarter_period():
    assert abs(alpha_shift(math.pi / 2, 1.0)) < 1e-15


@pytest.mark.parametrize("th", [0.0, math.pi, 4.0])
def test_alpha_domain(th):
    with pytest.raises(ValueError):
        alpha_shift(th, 1.0)


# ---------------------------------------------------------------- quadrature


def test_whole_steps_is_trapezoid():
    s = quadrature_weights(2.0, 0.25, 8)
    expected = np.full(9, 0.25)
    expected[[0, -1]] = 0.125
    assert np.allclose(s, expected, rtol=0, atol=1e-16)


def test_partial_cell_formula():
    dt, th = 0.1, 0.3
    s = quadrature_weights((5 + th) * dt, dt, 10)
    assert s[5] == pytest.approx(dt / 2 + dt * th * (1 - th / 2), rel=1e-12)
    assert s[6] == pytest.approx(dt * th**2 / 2, rel=1e-12)
    assert np.all(s[7:] == 0.0)


def test_horizon_inside_first_cell():
    s = quadrature_weights(0.04, 0.1, 3)
    t = 0.1 * np.arange(4)
    assert s.sum() == pytest.approx(0.04, rel=1e-14)
    assert s @ t == pytest.approx(0.04**2 / 2, rel=1e-12)


def test_horizon_beyond_interval():
    with pytest.raises(ValueError):
        quadrature_weights(1.01, 0.1, 10)


@settings(max_examples=60, deadline=None)
@given(dt=st.floats(1e-3, 0.5), q=st.integers(1, 200), th=st.floats(0.0, 0.999999))
def test_affine_exactness(dt, q, th):
    T = (q + th) * dt
    nt = q + 2
    s = quadrature_weights(T, dt, nt)
    t = dt * np.arange(nt + 1)
    assert abs(s.sum() - T) <= 1e-12 * T
    assert abs(s @ t - T * T / 2) <= 1e-12 * T * T / 2


# ---------------------------------------------------------------- discrete filters and the bank


PLANS = [
    (paper_three_frequency().frequencies, "trapezoidal", 2),
    (paper_three_frequency().frequencies, "trapezoidal", 1),
    (paper_three_frequency().frequencies, "full_weighting", 1),
    (paper_three_frequency().frequencies, "full_weighting", 2),
    ((5.0, 9.0), "trapezoidal", 1),
    ((5.0, 11.0), "full_weighting", 3),
    ((15, 21, 26, 32, 41, 49, 58), "trapezoidal", 6),
]


@pytest.mark.parametrize("freqs,scheme,np_", PLANS)
def test_bank_normalization_and_peak(freqs, scheme, np_):
    bank = build_filter_bank(build_time_plan(freqs, scheme, np_))
    wt = np.array(bank.plan.omega_tilde)
    assert np.max(np.abs(np.diag(bank.A) - 1)) <= 1e-12
    for m, w in enumerate(wt):
        assert abs(beta_discrete(w, m, bank) - 1) <= 1e-12
        side = beta_discrete(np.array([w * (1 - 1e-3), w * (1 + 1e-3)]), m, bank)
        assert np.all(side < 1.0)


def test_first_filter_is_trapezoid():
    bank = build_filter_bank(build_time_plan(paper_three_frequency(), "trapezoidal", 2))
    assert bank.theta[0] == 0.0 and bank.cutoff[0] == bank.plan.num_steps
    dt = bank.plan.dt
    assert bank.weights[0, 0] == pytest.approx(dt / 2) and bank.weights[0, -1] == pytest.approx(dt / 2)
    # whole-step horizon: the scaling is 2/T up to rounding
    assert bank.scale[0] * bank.plan.final_time / 2 == pytest.approx(1.0, abs=1e-12)


def test_weights_integrate_constants():
    bank = build_filter_bank(build_time_plan(paper_three_frequency(), "full_weighting", 2))
    T = np.array(bank.plan.horizons)
    T[0] = bank.plan.final_time
    assert np.allclose(bank.weights.sum(axis=1), T, rtol=1e-12, atol=0)


def test_single_frequency_matrix():
    bank = build_filter_bank(build_time_plan([5.1], "trapezoidal", 1))
    assert bank.A.shape == (1, 1) and bank.A[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_off_diagonal_independent_sum():
    plan = build_time_plan([5.0, 9.0], "trapezoidal", 1)
    bank = build_filter_bank(plan)
    wt, dt, nt = plan.omega_tilde, plan.dt, plan.num_steps
    T1, T2 = plan.final_time, plan.horizons[1]
    a12 = loop_beta(wt[1], wt[0], T1, bank.alpha[0], dt, nt)
    assert bank.A[0, 1] == pytest.approx(a12, abs=1e-13)
    a21 = loop_beta(wt[0], wt[1], T2, bank.alpha[1], dt, nt) / loop_beta(wt[1], wt[1], T2, bank.alpha[1], dt, nt)
    assert bank.A[1, 0] == pytest.approx(a21, abs=1e-13)


def test_raw_beta_matches_loop():
    plan = build_time_plan([5.0, 9.0], "trapezoidal", 1)
    bank = build_filter_bank(plan)
    T2 = plan.horizons[1]
    for lam in (0.0, 3.3, 12.0):
        raw = beta_discrete_raw(lam, plan.omega_tilde[1], T2, bank.alpha[1], bank.weights[1], plan.dt)
        assert raw == pytest.approx(loop_beta(lam, plan.omega_tilde[1], T2, bank.alpha[1], plan.dt, plan.num_steps),
                                    abs=1e-13)


@pytest.mark.parametrize("lam", [2.0, 6.3])
def test_discrete_converges_to_continuous(lam):
    errs, steps = [], []
    for spp in (20, 40, 80, 160, 320):
        plan = build_time_plan([5.1], "trapezoidal", 2, steps_per_period=spp)
        bank = build_filter_bank(plan)
        wt = plan.omega_tilde[0]
        errs.append(abs(bank.beta(lam, 0) - beta_continuous(lam, wt, plan.final_time, 0.5)))
        steps.append(plan.dt)
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert abs(slope - 2) < 0.25


def test_close_frequencies_rejected():
    with pytest.raises(ValueError, match="singular"):
        build_filter_bank(build_time_plan([5.0, 5.0 + 1e-9], "trapezoidal", 1))


@settings(max_examples=25, deadline=None)
@given(
    w=st.lists(st.floats(1.0, 40.0), min_size=1, max_size=5, unique=True),
    np_=st.integers(1, 4),
    scheme=st.sampled_from(["trapezoidal", "full_weighting"]),
)
def test_normalization_property(w, np_, scheme):
    w = sorted(w)
    if len(w) > 1 and min(np.diff(w)) < 0.5:
        return
    bank = build_filter_bank(build_time_plan(w, scheme, np_))
    assert np.max(np.abs(np.diag(bank.A) - 1)) <= 1e-12


# ---------------------------------------------------------------- accumulation


@pytest.fixture(scope="module")
def bank3():
    return build_filter_bank(build_time_plan(paper_three_frequency(), "trapezoidal", 2))


def _stream(bank, signal):
    acc = FilterAccumulator(bank, signal.shape[1])
    for n, w in enumerate(signal):
        acc(n, w)
    assert acc.complete
    return acc.p


def test_zero_signal(bank3):
    assert np.all(_stream(bank3, np.zeros((bank3.plan.num_steps + 1, 4))) == 0)


def test_cosine_signal(bank3):
    t = bank3.plan.times()
    v = np.array([1.0, -2.0, 0.5])
    for m, w in enumerate(bank3.plan.omega_tilde):
        p = _stream(bank3, np.cos(w * t)[:, None] * v)
        assert np.allclose(p[m], v, atol=1e-12)
        assert np.allclose(p, bank3.A[:, m][:, None] * v, atol=1e-12)


def test_constant_signal(bank3):
    v = np.array([2.0, 3.0])
    p = _stream(bank3, np.ones((bank3.plan.num_steps + 1, 1)) * v)
    for m in range(3):
        assert np.allclose(p[m], beta_discrete(0.0, m, bank3) * v, atol=1e-12)


def test_streaming_equals_post_hoc_sum(bank3):
    rng = np.random.default_rng(5)
    hist = rng.standard_normal((bank3.plan.num_steps + 1, 6))
    p = _stream(bank3, hist)
    q = np.zeros_like(p)
    for n in range(hist.shape[0]):
        accumulate_filters(q, hist[n], n, bank3)
    assert np.array_equal(p, q)


def test_out_of_order(bank3):
    acc = FilterAccumulator(bank3, 2)
    acc(0, np.zeros(2))
    with pytest.raises(ValueError):
        acc(2, np.zeros(2))


def test_filter_solve(bank3):
    rng = np.random.default_rng(2)
    p = rng.standard_normal((3, 10))
    V = filter_solve(bank3, p)
    assert np.allclose(bank3.A @ V, p, atol=1e-12)


def test_filter_solve_single_and_two_frequency():
    b1 = build_filter_bank(build_time_plan([5.1], "trapezoidal", 1))
    p = np.array([[1.0, 2.0, 3.0]])
    assert np.allclose(filter_solve(b1, p), p, atol=1e-14)
    b2 = build_filter_bank(build_time_plan([5.0, 9.0], "trapezoidal", 1))
    (a, b), (c, d) = b2.A
    det = a * d - b * c
    p = np.random.default_rng(0).standard_normal((2, 7))
    expected = np.array([d * p[0] - b * p[1], -c * p[0] + a * p[1]]) / det
    assert np.allclose(filter_solve(b2, p), expected, atol=1e-13)
