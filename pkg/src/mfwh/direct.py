"""
Direct solution of the discrete Helmholtz problems.

The reference solver assembles ``L_h + w^2 I`` on the unknowns and factors
it with a banded LU (partial pivoting) written here, so the oracle shares no
machinery with the iterative solvers beyond the spatial operator itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.lib.stride_tricks import as_strided

from .grid import Grid, GridFunction, assemble_operator, boundary_lift, fill_ghosts, gather, scatter
from .problem import MultiHelmholtzProblem


class SingularSystemError(ValueError):
    pass


def bandwidths(A: sp.spmatrix) -> tuple[int, int]:
    """Lower and upper bandwidths of a sparse matrix."""
    A = A.tocoo()
    d = A.col - A.row
    return int(max(0, -d.min(initial=0))), int(max(0, d.max(initial=0)))


class BandedLU:
    """LU factorization with partial pivoting of a banded matrix.

    Rows are stored in a flat buffer at a stride of ``2 kl + ku`` so that the
    band reads as an ordinary 2D strided view indexed by ``(row, column)``
    (the row-wise analogue of LAPACK band storage). Each elimination step
    then updates a plain ``(kl + 1) x (kl + ku + 1)`` slice in place.
    Multipliers are kept below the diagonal and row swaps are applied to
    the right-hand side in elimination order, as in LAPACK ``gbtrf``.
    """

    def __init__(self, A: sp.spmatrix, kl: int | None = None, ku: int | None = None, pivot_tol: float = 1e-14):
        A = sp.coo_matrix(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("matrix must be square")
        if kl is None or ku is None:
            kl, ku = bandwidths(A)
        self.n, self.kl, self.ku = n, kl, ku
        s = 2 * kl + ku
        rows = n + kl + 1
        buf = np.zeros(rows * (s + 1) + 2 * s + 2)
        G = as_strided(buf[kl:], shape=(rows, rows + kl + ku + 1), strides=(s * buf.itemsize, buf.itemsize),
                       writeable=True)
        buf[kl + A.row * s + A.col] = A.data
        scale = np.abs(A.data).max() if A.nnz else 1.0
        piv = np.empty(n, dtype=np.intp)
        w = kl + ku + 1
        for k in range(n):
            B = G[k:k + kl + 1, k:k + w]
            p = int(np.argmax(np.abs(B[:, 0])))
            piv[k] = k + p
            if abs(B[p, 0]) <= pivot_tol * scale:
                raise SingularSystemError(f"zero pivot at row {k}: matrix is numerically singular")
            if p:
                B[[0, p]] = B[[p, 0]]
            B[1:, 0] /= B[0, 0]
            B[1:, 1:] -= B[1:, :1] * B[0, 1:]
        self._buf, self._G, self.piv = buf, G, piv

    def solve(self, b: np.ndarray) -> np.ndarray:
        n, kl, G, piv = self.n, self.kl, self._G, self.piv
        w = kl + self.ku + 1
        x = np.array(b, dtype=float, copy=True)
        for k in range(n):
            p = piv[k]
            if p != k:
                x[k], x[p] = x[p], x[k]
            m = min(kl, n - k - 1)
            if m:
                x[k + 1:k + 1 + m] -= G[k + 1:k + 1 + m, k] * x[k]
        for k in range(n - 1, -1, -1):
            m = min(w, n - k)
            x[k] = (x[k] - G[k, k + 1:k + m] @ x[k + 1:k + m]) / G[k, k]
        return x


@dataclass
class HelmholtzSystem:
    """``(L_h + w^2 I) U = f - lift`` on the unknowns of one problem."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    omega: float

    @classmethod
    def build(cls, problem: MultiHelmholtzProblem, grid: Grid, order: int, m: int) -> "HelmholtzSystem":
        bc = problem.bc
        L = assemble_operator(grid, order, bc, problem.c)
        w = problem.frequencies[m]
        A = (L + w * w * sp.identity(L.shape[0])).tocsr()
        f = gather(problem.forcing(m, grid), bc)
        rhs = f - boundary_lift(grid, order, bc, problem.boundary(m), problem.c)
        return cls(A, rhs, w)

    def relative_residual(self, x: np.ndarray) -> float:
        r = self.rhs - self.matrix @ x
        return float(np.linalg.norm(r) / np.linalg.norm(self.rhs))


def solve_direct_vector(problem: MultiHelmholtzProblem, grid: Grid, order: int, m: int,
                        refine: int = 2) -> np.ndarray:
    """Unknown values of the discrete Helmholtz solution for problem ``m``.

    A couple of steps of iterative refinement with the same factorization
    polish the residual.
    """
    sys_ = HelmholtzSystem.build(problem, grid, order, m)
    try:
        lu = BandedLU(sys_.matrix)
    except SingularSystemError as exc:
        from .analysis import discrete_spectrum

        spec = discrete_spectrum(grid, order, problem.bc, problem.c)
        j = int(np.argmin(np.abs(spec.lambdas - sys_.omega)))
        raise SingularSystemError(
            f"Helmholtz system for w = {sys_.omega} is singular; nearest discrete eigenvalue "
            f"lambda_h = {spec.lambdas[j]:.15g}") from exc
    x = lu.solve(sys_.rhs)
    for _ in range(refine):
        x += lu.solve(sys_.rhs - sys_.matrix @ x)
    return x


def solve_direct(problem: MultiHelmholtzProblem, grid: Grid, order: int, m: int) -> GridFunction:
    """Discrete Helmholtz solution ``U_m`` with boundary values and ghosts filled."""
    x = solve_direct_vector(problem, grid, order, m)
    u = scatter(x, grid.zeros(), problem.bc)
    return fill_ghosts(u, problem.bc, problem.boundary(m), order)


def solve_all(problem: MultiHelmholtzProblem, grid: Grid, order: int) -> np.ndarray:
    """All solutions over the unknowns, shape ``(N_f, n)``."""
    return np.array([solve_direct_vector(problem, grid, order, m) for m in range(problem.num_freq)])
