"""
Convergence theory of the multi-frequency iteration.

For an eigenvalue ``lam`` of the spatial operator the error of the
fixed-point iteration is multiplied by ``A^{-1} B(lam)``, where every column
of ``B`` holds the filter values ``beta_i(lam)``. That matrix has rank one and
its single nonzero eigenvalue is

    mu(lam) = sum_m w_m beta_m(lam),   w_m = sum_i (A^{-1})_{im}.

The discrete counterpart ``mu_d`` uses the discrete filters and is evaluated
at the adjusted eigenvalues ``lambda_tilde(lam_h)``; its maximum modulus over
the discrete spectrum is the asymptotic convergence rate (ACR).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .filters import FilterBank, beta_continuous, build_filter_bank
from .grid import BoundaryCondition, Grid, assemble_1d, check_order
from .wave import TimePlan, modified_frequency

SPURIOUS_TOL = 1e-3
"""Heuristic: ``|1 - mu_d|`` below this at an eigenvalue away from every ``wt_m`` is flagged."""


def filter_weights(A) -> np.ndarray:
    """Column sums of ``A^{-1}``, computed by solving ``A^T w = 1``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``A`` is singular.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("filter matrix must be square")
    return np.linalg.solve(A.T, np.ones(A.shape[0]))


def lambda_tilde(lam, dt: float, alpha_i: float, beta_i: float):
    """Adjusted eigenvalue; the same map as :func:`mfwh.wave.modified_frequency`."""
    return modified_frequency(lam, dt, alpha_i, beta_i)


def continuous_horizons(omega: Sequence[float], num_periods: int) -> np.ndarray:
    """``T_{f,m} = N_{p,m} 2 pi / w_m`` with ``N_{p,m} = floor(N_p w_m / w_1)``."""
    omega = np.asarray(omega, dtype=float)
    nper = np.floor(num_periods * omega / omega[0] + 1e-10)
    nper[0] = num_periods
    return nper * 2.0 * np.pi / omega


@dataclass(frozen=True)
class MuFunction:
    """``mu(lam) = sum_m w_m beta_m(lam)`` in continuous or discrete form.

    Build with :meth:`continuous` or :meth:`discrete`. In discrete mode the
    argument is on the adjusted axis (compare with ``wt_m``); use
    :meth:`of_physical` to evaluate ``mu_d(lambda_tilde(lam))``.
    """

    mode: str
    frequencies: np.ndarray
    """``w_m`` (continuous) or ``wt_m`` (discrete)."""
    weights: np.ndarray
    A: np.ndarray
    horizons: np.ndarray
    alpha: np.ndarray
    bank: FilterBank | None = None

    @classmethod
    def continuous(cls, omega: Sequence[float], num_periods: int = 1, alpha=0.5,
                   horizons: Sequence[float] | None = None) -> "MuFunction":
        omega = np.asarray(omega, dtype=float)
        T = continuous_horizons(omega, num_periods) if horizons is None else np.asarray(horizons, dtype=float)
        al = np.broadcast_to(np.asarray(alpha, dtype=float), omega.shape).copy()
        A = np.array([[beta_continuous(wj, wi, Ti, ai) for wj in omega] for wi, Ti, ai in zip(omega, T, al)])
        return cls("continuous", omega, filter_weights(A), A, T, al)

    @classmethod
    def discrete(cls, bank: FilterBank) -> "MuFunction":
        plan = bank.plan
        T = np.array(plan.horizons)
        T[0] = plan.final_time
        return cls("discrete", np.array(plan.omega_tilde), filter_weights(bank.A), bank.A, T, bank.alpha, bank)

    @property
    def num_freq(self) -> int:
        return self.frequencies.size

    def betas(self, lam) -> np.ndarray:
        """Filter values, shape ``(N_f,) + shape(lam)``."""
        if self.bank is not None:
            return self.bank.betas(lam)
        return np.array([beta_continuous(lam, w, T, a) for w, T, a in zip(self.frequencies, self.horizons, self.alpha)])

    def __call__(self, lam):
        out = np.tensordot(self.weights, self.betas(lam), axes=1)
        return float(out) if np.ndim(out) == 0 else out

    def of_physical(self, lam):
        """``mu_d(lambda_tilde(lam))`` in discrete mode, ``mu(lam)`` otherwise."""
        if self.bank is None:
            return self(lam)
        p = self.bank.plan
        return self(lambda_tilde(lam, p.dt, p.alpha_i, p.beta_i))


def mu(lam, fn: MuFunction):
    return fn(lam)


def _as_mu(source) -> MuFunction:
    if isinstance(source, MuFunction):
        return source
    if isinstance(source, FilterBank):
        return MuFunction.discrete(source)
    if isinstance(source, TimePlan):
        return MuFunction.discrete(build_filter_bank(source))
    raise TypeError(f"expected MuFunction, FilterBank or TimePlan, got {type(source).__name__}")


def iteration_matrix(source, lam: float) -> np.ndarray:
    """``A^{-1} B(lam)`` with ``B[i, j] = beta_i(lam)`` for every column ``j``."""
    fn = _as_mu(source)
    b = fn.betas(float(lam))
    B = np.repeat(b[:, None], fn.num_freq, axis=1)
    return np.linalg.solve(fn.A, B)


def eigenvalue_equivalence_check(source, lam: float, tol: float = 1e-10) -> tuple[float, float]:
    """Nonzero eigenvalue of ``A^{-1} B(lam)`` by a dense eigensolve, and ``mu(lam)``.

    ``source`` is a ``MuFunction``, ``FilterBank`` or ``TimePlan``. Raises
    ``AssertionError`` unless ``N_f - 1`` eigenvalues vanish and the remaining
    one equals ``mu(lam)``, both to ``tol``.
    """
    fn = _as_mu(source)
    ev = np.linalg.eigvals(iteration_matrix(fn, lam))
    order = np.argsort(np.abs(ev))
    small, big = ev[order[:-1]], ev[order[-1]]
    val = fn(float(lam))
    # the rank-one eigenvalue can be tiny itself; then pick the closest to mu
    if abs(val) <= tol:
        j = int(np.argmin(np.abs(ev - val)))
        big, small = ev[j], np.delete(ev, j)
    if small.size and np.max(np.abs(small)) > tol:
        raise AssertionError(f"iteration matrix at lam={lam} has {np.sum(np.abs(small) > tol) + 1} nonzero eigenvalues")
    if abs(big.imag) > tol or abs(big.real - val) > tol:
        raise AssertionError(f"nonzero eigenvalue {big} differs from mu = {val} at lam={lam}")
    return float(big.real), float(val)


@dataclass(frozen=True)
class SpectrumInfo:
    """Sorted discrete eigenvalues ``lam_h`` of ``L_h phi = -lam^2 phi``.

    The 1D factors are kept, so eigenvectors of tensor grids are formed on
    demand by :meth:`eigenvector`.
    """

    lambdas: np.ndarray
    lambdas_sq: np.ndarray
    index: np.ndarray
    """Per eigenvalue, the indices into the 1D factor spectra; shape ``(n, dim)``."""
    axis_values: tuple[np.ndarray, ...]
    """1D eigenvalues ``lam^2`` per axis, ascending."""
    axis_vectors: tuple[np.ndarray, ...]
    lambda_tilde: np.ndarray | None = None

    def __len__(self) -> int:
        return self.lambdas.size

    def eigenvector(self, k: int) -> np.ndarray:
        """Unit-norm eigenvector ``k`` over the unknowns (``gather`` ordering)."""
        v = np.ones(1)
        for axis, i in enumerate(self.index[k]):
            v = np.kron(v, self.axis_vectors[axis][:, i])
        return v / np.linalg.norm(v)

    def adjusted(self, plan: TimePlan) -> "SpectrumInfo":
        lt = lambda_tilde(self.lambdas, plan.dt, plan.alpha_i, plan.beta_i)
        return SpectrumInfo(self.lambdas, self.lambdas_sq, self.index, self.axis_values, self.axis_vectors, lt)


def _axis_spectrum(n: int, h: float, kinds, order: int, c: float):
    A = -(c * c) * assemble_1d(n, h, tuple(kinds), order).toarray()
    vals, vecs = np.linalg.eig(A)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(vals.imag)) > 1e-8 * scale or np.max(np.abs(vecs.imag)) > 1e-6:
        raise ValueError(f"1D operator ({kinds}, order {order}, n={n}) has nonreal eigenvalues: "
                         f"max imaginary part {np.max(np.abs(vals.imag)):.3e}")
    vals, vecs = vals.real, vecs.real
    p = np.argsort(vals)
    return vals[p], vecs[:, p]


def discrete_spectrum(grid: Grid, order: int, bc: BoundaryCondition, c: float = 1.0) -> SpectrumInfo:
    """All eigenvalues of ``c^2 L_h`` with homogeneous boundary conditions.

    Each 1D operator is eigendecomposed densely and the tensor-grid values
    follow as sums ``lam^2 = lam_x^2 + lam_y^2``.

    Raises
    ------
    ValueError
        If an axis has more than 4096 cells, or a 1D operator has eigenvalues
        with imaginary parts above ``1e-8`` (relative to the largest).
    """
    check_order(order)
    bc._check_grid(grid)
    if max(grid.cells) > 4096:
        raise ValueError("discrete_spectrum uses dense 1D eigensolves; at most 4096 cells per axis")
    vals, vecs = [], []
    for axis in range(grid.dim):
        v, V = _axis_spectrum(grid.cells[axis], grid.spacing[axis], bc.kinds[axis], order, c)
        vals.append(v)
        vecs.append(V)
    grids = np.meshgrid(*[np.arange(v.size) for v in vals], indexing="ij")
    index = np.stack([g.ravel() for g in grids], axis=1)
    lam2 = sum(vals[a][index[:, a]] for a in range(grid.dim))
    p = np.argsort(lam2, kind="stable")
    lam2, index = lam2[p], index[p]
    if lam2[0] < -1e-8 * max(1.0, abs(lam2[-1])):
        raise ValueError(f"operator has a positive eigenvalue {-lam2[0]:.3e}")
    lams = np.sqrt(np.maximum(lam2, 0.0))
    return SpectrumInfo(lams, lam2, index, tuple(vals), tuple(vecs))


class AcrPrediction(NamedTuple):
    acr: float
    argmax: float
    """Discrete eigenvalue ``lam_h`` at which ``|mu_d(lambda_tilde)|`` is largest."""
    warnings: list[str]


def mu_on_spectrum(plan: TimePlan, bank: FilterBank, spectrum: SpectrumInfo) -> tuple[np.ndarray, np.ndarray]:
    """``(lambda_tilde(lam_h), mu_d(lambda_tilde(lam_h)))`` for every eigenvalue."""
    lt = lambda_tilde(spectrum.lambdas, plan.dt, plan.alpha_i, plan.beta_i)
    fn = MuFunction.discrete(bank)
    vals = np.empty_like(lt)
    for s in range(0, lt.size, 4096):
        vals[s:s + 4096] = fn(lt[s:s + 4096])
    return lt, vals


def predict_acr(plan: TimePlan, bank: FilterBank, spectrum: SpectrumInfo) -> AcrPrediction:
    """``ACR = max |mu_d(lambda_tilde(lam_h))|`` over the discrete spectrum.

    Warnings flag eigenvalues whose ``|1 - mu_d|`` is below ``SPURIOUS_TOL``
    while lying more than half a filter main lobe (``pi / (2 T_{f,m})``)
    from every ``wt_m``: likely spurious resonances. The threshold is a
    heuristic.
    """
    lt, vals = mu_on_spectrum(plan, bank, spectrum)
    k = int(np.argmax(np.abs(vals)))
    horizons = np.array(plan.horizons)
    horizons[0] = plan.final_time
    wt = np.array(plan.omega_tilde)
    away = np.all(np.abs(lt[:, None] - wt[None, :]) > np.pi / (2.0 * horizons[None, :]), axis=1)
    warnings = []
    for j in np.flatnonzero(away & (np.abs(1.0 - vals) < SPURIOUS_TOL)):
        warnings.append(f"possible spurious resonance (heuristic |1 - mu_d| < {SPURIOUS_TOL:g}): "
                        f"lambda_h = {spectrum.lambdas[j]:.10g}, mu_d = {vals[j]:.10g}")
    if abs(vals[k]) >= 1.0:
        warnings.append(f"ACR = {abs(vals[k]):.6g} >= 1: the fixed-point iteration will not converge; use GMRES")
    return AcrPrediction(float(abs(vals[k])), float(spectrum.lambdas[k]), warnings)


def sample_curve(fn: MuFunction, lam_range: tuple[float, float], count: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples of ``fn.of_physical`` on ``[lo, hi]``."""
    if count < 2:
        raise ValueError("count must be at least 2")
    lo, hi = map(float, lam_range)
    if not hi > lo:
        raise ValueError("empty lambda range")
    lam = np.linspace(lo, hi, int(count))
    vals = np.concatenate([np.atleast_1d(fn.of_physical(lam[s:s + 4096])) for s in range(0, lam.size, 4096)])
    return lam, vals


def sample_mu_curve(lam_range: tuple[float, float], count: int, plan: TimePlan,
                    bank: FilterBank | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(lam, mu_d(lambda_tilde(lam)))`` at ``count`` uniform samples of ``lam_range``."""
    return sample_curve(MuFunction.discrete(bank or build_filter_bank(plan)), lam_range, count)


def exceedance_measure(lam: np.ndarray, values: np.ndarray, level: float = 1.0) -> float:
    """Approximate measure of ``{lam : |mu(lam)| > level}`` from uniform samples."""
    lam = np.asarray(lam)
    step = (lam[-1] - lam[0]) / (lam.size - 1)
    return float(np.count_nonzero(np.abs(values) > level) * step)


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_mu_curve_csv(path, lam: np.ndarray, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "mu", "abs_mu"])
        for x, m in zip(lam, values):
            w.writerow([_fmt(x), _fmt(m), _fmt(abs(m))])


def write_spectrum_csv(path, plan: TimePlan, bank: FilterBank, spectrum: SpectrumInfo) -> None:
    lt, vals = mu_on_spectrum(plan, bank, spectrum)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nu", "lambda_h", "lambda_tilde", "mu_d"])
        for nu, (lh, t, m) in enumerate(zip(spectrum.lambdas, lt, vals), start=1):
            w.writerow([nu, _fmt(lh), _fmt(t), _fmt(m)])


def format_acr(pred: AcrPrediction) -> str:
    """Plain-text summary block of an ACR prediction."""
    lines = [f"acr = {pred.acr:.17g}", f"acr_lambda_h = {pred.argmax:.17g}"]
    lines += [f"warning = {w}" for w in pred.warnings]
    return "\n".join(lines)
