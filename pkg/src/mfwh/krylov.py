"""Conjugate gradient and restarted GMRES for matrix-free operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class SolverError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, relative residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


def cg(matvec: Callable[[np.ndarray], np.ndarray], b: np.ndarray, x0: np.ndarray | None = None,
       tol: float = 1e-12, maxiter: int = 1000) -> tuple[np.ndarray, int]:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops when ``|b - A x| <= tol |b|``. Returns the solution and the number
    of iterations; raises ``SolverError`` if ``maxiter`` is reached.
    """
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = r @ r
    target = (tol * bnorm) ** 2
    for k in range(1, maxiter + 1):
        if rr <= target:
            return x, k - 1
        Ap = matvec(p)
        a = rr / (p @ Ap)
        x += a * p
        r -= a * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    if rr <= target:
        return x, maxiter
    raise SolverError("CG did not converge", maxiter, float(np.sqrt(rr) / bnorm))


@dataclass
class GMRESResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residuals: list[float] = field(default_factory=list)
    """Relative residual norms, starting with the initial one."""


def gmres(matvec: Callable[[np.ndarray], np.ndarray], b: np.ndarray, tol: float = 1e-10,
          restart: int = 200, maxiter: int = 1000,
          callback: Callable[[int, float], None] | None = None) -> GMRESResult:
    """Restarted GMRES from a zero initial guess.

    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass.
    ``maxiter`` counts operator applications (Arnoldi vectors). Convergence is
    ``|b - A x| <= tol |b|``, measured by the least-squares residual and
    re-checked with a true residual at each restart.
    """
    n = b.size
    bnorm = np.linalg.norm(b)
    x = np.zeros(n)
    if bnorm == 0.0:
        return GMRESResult(x, True, 0, [0.0])
    history = [1.0]
    r = b.copy()
    beta = bnorm
    its = 0
    while True:
        m = min(restart, maxiter - its)
        if m <= 0:
            return GMRESResult(x, False, its, history)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            w = matvec(V[k])
            its += 1
            for _ in range(2):
                for i in range(k + 1):
                    hij = V[i] @ w
                    H[i, k] += hij
                    w -= hij * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 0.0:
                V[k + 1] = w / H[k + 1, k]
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = (1.0, 0.0) if denom == 0.0 else (H[k, k] / denom, H[k + 1, k] / denom)
            H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_used = k + 1
            rel = abs(g[k + 1]) / bnorm
            history.append(rel)
            if callback is not None:
                callback(its, rel)
            if rel <= tol or H[k, k] == 0.0:
                break
        y = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used]) if k_used else np.zeros(0)
        x += V[:k_used].T @ y
        if history[-1] <= tol:
            return GMRESResult(x, True, its, history)
        if its >= maxiter:
            return GMRESResult(x, False, its, history)
        # restart from the true residual
        r = b - matvec(x)
        its += 1
        beta = np.linalg.norm(r)
        history.append(beta / bnorm)
        if beta / bnorm <= tol:
            return GMRESResult(x, True, its, history)
