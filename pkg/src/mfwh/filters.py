"""
WaveHoltz time filters.

Filter ``m`` maps a time signal to

    p_m = s_m * sum_n sigma_{n,m} (cos(wt_m t^n) - alpha_m / 2) W^n

where ``sigma`` are trapezoid-type weights over ``[0, T_m]`` (a partial last
cell when the horizon is not a whole number of steps) and ``s_m`` scales the
filter so that it returns exactly one at its own modified frequency. For
whole-step horizons ``s_m = 2 / T_m`` up to rounding; otherwise it differs
from ``2 / T_m`` by O(dt^2). Scaling a filter multiplies one row of the
filter matrix and one component of ``p`` by the same factor, so the
iterates and the convergence function are unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .wave import TimePlan


def sinc(x):
    """``sin(x) / x`` with a series branch for ``|x| < 1e-4``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    x2 = x * x
    out = np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(xs) / xs)
    return float(out) if out.ndim == 0 else out


def beta_continuous(lam, omega: float, T: float, alpha: float):
    """``(2/T) int_0^T (cos(omega t) - alpha/2) cos(lam t) dt`` in closed form."""
    if not T > 0:
        raise ValueError("filter horizon must be positive")
    lam = np.asarray(lam, dtype=float)
    out = sinc((omega - lam) * T) + sinc((omega + lam) * T) - alpha * sinc(lam * T)
    return float(out) if np.ndim(out) == 0 else out


def alpha_shift(omega_tilde: float, dt: float) -> float:
    """Filter shift ``tan(wt dt / 2) / tan(wt dt)`` that centers the discrete peak."""
    th = omega_tilde * dt
    if not 0.0 < th < math.pi:
        raise ValueError(f"wt*dt = {th} outside (0, pi)")
    return math.tan(0.5 * th) / math.tan(th)


def quadrature_weights(T: float, dt: float, num_steps: int) -> np.ndarray:
    """Weights ``sigma_n``, ``n = 0..num_steps``, integrating over ``[0, T]``.

    Composite trapezoid up to ``t^q <= T < t^{q+1}``; the partial cell
    integrates the linear interpolant of ``t^q, t^{q+1}``. Exact for affine
    integrands.
    """
    if T > num_steps * dt * (1.0 + 1e-12) + 1e-300:
        raise ValueError(f"horizon {T} exceeds the time interval {num_steps * dt}")
    x = T / dt
    q = int(round(x)) if abs(x - round(x)) < 1e-9 else int(math.floor(x))
    q = min(q, num_steps)
    th = x - q
    sig = np.zeros(num_steps + 1)
    if q == 0:
        # horizon inside the first cell
        sig[0] = dt * th * (1.0 - th / 2.0)
        sig[1] = dt * th * th / 2.0
        return sig
    sig[0] = 0.5 * dt
    sig[1:q] = dt
    sig[q] = 0.5 * dt
    if q < num_steps:
        sig[q] += dt * th * (1.0 - th / 2.0)
        sig[q + 1] = dt * th * th / 2.0
    else:
        sig[q] += dt * th  # th is rounding-level here
    return sig


def beta_discrete_raw(lam, omega_tilde: float, T: float, alpha: float, sigma: np.ndarray, dt: float):
    """``(2/T) sum_n sigma_n (cos(wt t^n) - alpha/2) cos(lam t^n)``, unscaled."""
    t = dt * np.arange(sigma.size)
    c = (2.0 / T) * sigma * (np.cos(omega_tilde * t) - 0.5 * alpha)
    out = np.cos(np.multiply.outer(np.asarray(lam, dtype=float), t)) @ c
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FilterBank:
    """Per-frequency filter data and the filter matrix ``A[i, j] = beta_i(wt_j)``."""

    plan: TimePlan
    alpha: np.ndarray
    """Filter shifts ``alpha_m``."""
    weights: np.ndarray
    """Quadrature weights, shape ``(N_f, N_t + 1)``."""
    scale: np.ndarray
    """Filter scalings ``s_m``."""
    coef: np.ndarray
    """Per-step filter coefficients ``s_m sigma_{n,m} (cos(wt_m t^n) - alpha_m/2)``, shape ``(N_f, N_t + 1)``."""
    A: np.ndarray
    A_inv: np.ndarray
    cond: float
    cutoff: np.ndarray
    """Index ``q_m`` of the last full cell."""
    theta: np.ndarray
    """Fraction of the partial cell."""

    @property
    def num_freq(self) -> int:
        return self.alpha.size

    def beta(self, lam, m: int):
        """Scaled discrete filter function of filter ``m`` at ``lam``."""
        t = self.plan.times()
        out = np.cos(np.multiply.outer(np.asarray(lam, dtype=float), t)) @ self.coef[m]
        return float(out) if np.ndim(out) == 0 else out

    def betas(self, lam) -> np.ndarray:
        """All filter functions at ``lam``: shape ``(N_f,) + shape(lam)``."""
        t = self.plan.times()
        lam = np.asarray(lam, dtype=float)
        C = np.cos(np.multiply.outer(lam, t))
        return np.moveaxis(C @ self.coef.T, -1, 0)


def beta_discrete(lam, m: int, bank: FilterBank):
    """Discrete filter function ``m`` (0-based) of ``bank`` at ``lam``."""
    return bank.beta(lam, m)


def build_filter_bank(plan: TimePlan, max_cond: float = 1e12) -> FilterBank:
    """Weights, shifts, scalings and the filter matrix for ``plan``.

    Raises
    ------
    ValueError
        If the filter matrix condition number exceeds ``max_cond``
        (frequencies too close for the horizon).
    """
    nf, nt, dt = plan.num_freq, plan.num_steps, plan.dt
    t = plan.times()
    horizons = list(plan.horizons)
    horizons[0] = plan.final_time
    alpha = np.array([alpha_shift(w, dt) for w in plan.omega_tilde])
    W = np.array([quadrature_weights(T, dt, nt) for T in horizons])
    cut = np.empty(nf, dtype=int)
    th = np.empty(nf)
    for m, T in enumerate(horizons):
        x = T / dt
        q = int(round(x)) if abs(x - round(x)) < 1e-9 else int(math.floor(x))
        cut[m] = min(q, nt)
        th[m] = max(x - cut[m], 0.0)
    wt = np.asarray(plan.omega_tilde)
    base = W * (np.cos(np.outer(wt, t)) - 0.5 * alpha[:, None])
    diag = np.einsum("mn,mn->m", base, np.cos(np.outer(wt, t)))
    scale = 1.0 / diag
    coef = base * scale[:, None]
    A = coef @ np.cos(np.outer(t, wt))
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > max_cond:
        raise ValueError(f"filter matrix is numerically singular (cond = {cond:.3e}); "
                         "frequencies too close for the chosen number of periods")
    A_inv = np.linalg.inv(A)
    return FilterBank(plan, alpha, W, scale, coef, A, A_inv, cond, cut, th)


def accumulate_filters(p: np.ndarray, w: np.ndarray, n: int, bank: FilterBank) -> np.ndarray:
    """In place ``p_m += coef[m, n] * W^n`` for all ``m``; ``p`` has shape ``(N_f, size)``."""
    c = bank.coef[:, n]
    for m in range(p.shape[0]):
        if c[m] != 0.0:
            p[m] += c[m] * w
    return p


class FilterAccumulator:
    """Streams filter sums during time stepping, rejecting out-of-order steps."""

    def __init__(self, bank: FilterBank, size: int):
        self.bank = bank
        self.p = np.zeros((bank.num_freq, size))
        self.next_step = 0

    def __call__(self, n: int, w: np.ndarray) -> None:
        if n != self.next_step:
            raise ValueError(f"filter accumulation expected step {self.next_step}, got {n}")
        accumulate_filters(self.p, w, n, self.bank)
        self.next_step += 1

    @property
    def complete(self) -> bool:
        return self.next_step == self.bank.plan.num_steps + 1


def filter_solve(bank: FilterBank, p: np.ndarray) -> np.ndarray:
    """Solve ``A v = p`` pointwise; ``p`` has shape ``(N_f, ...)``."""
    return np.tensordot(bank.A_inv, p, axes=1)
