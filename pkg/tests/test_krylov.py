import numpy as np
import pytest

from mfwh.krylov import SolverError, cg, gmres


def spd(n, seed=0):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    return Q @ Q.T + n * np.eye(n)


def test_cg_matches_dense():
    A = spd(40)
    b = np.arange(40.0)
    x, its = cg(lambda v: A @ v, b, tol=1e-13)
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-11, atol=0)
    assert 0 < its <= 40


def test_cg_zero_rhs():
    x, its = cg(lambda v: v, np.zeros(5))
    assert its == 0 and not x.any()


def test_cg_raises():
    A = spd(30, 1)
    with pytest.raises(SolverError) as err:
        cg(lambda v: A @ v, np.ones(30), tol=1e-14, maxiter=2)
    assert err.value.iterations == 2


def test_gmres_nonsymmetric():
    rng = np.random.default_rng(3)
    A = np.eye(50) + 0.3 * rng.standard_normal((50, 50)) / np.sqrt(50)
    b = rng.standard_normal(50)
    res = gmres(lambda v: A @ v, b, tol=1e-12)
    assert res.converged
    assert np.allclose(res.x, np.linalg.solve(A, b), atol=1e-10)
    assert res.residuals[0] == 1.0 and res.residuals[-1] <= 1e-12
    assert len(res.residuals) == res.iterations + 1


def test_gmres_exact_in_n_steps():
    A = np.diag([1.0, 2.0, 3.0, 4.0])
    res = gmres(lambda v: A @ v, np.ones(4), tol=1e-14)
    assert res.converged and res.iterations <= 4
    assert np.allclose(res.x, 1 / np.diag(A), atol=1e-13)


def test_gmres_restart_still_converges():
    rng = np.random.default_rng(7)
    A = np.diag(np.linspace(1, 10, 60)) + 0.05 * rng.standard_normal((60, 60))
    b = rng.standard_normal(60)
    seen = []
    res = gmres(lambda v: A @ v, b, tol=1e-10, restart=5, maxiter=500, callback=lambda k, r: seen.append(r))
    assert res.converged
    assert np.linalg.norm(A @ res.x - b) <= 1.1e-10 * np.linalg.norm(b)
    assert len(seen) > 5


def test_gmres_maxiter():
    A = np.diag(np.linspace(1, 100, 80))
    res = gmres(lambda v: A @ v, np.ones(80), tol=1e-14, maxiter=3)
    assert not res.converged and res.iterations == 3


def test_gmres_zero_rhs():
    res = gmres(lambda v: v, np.zeros(3))
    assert res.converged and res.iterations == 0
