"""Eigen-solvers and saddle-point solves against dense oracles."""

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stabmix import (MixedSpace, NonSymmetricMatrixError,
                     NotPositiveDefiniteError, ProblemConfig, SaddleSystem,
                     SingularSaddleError, assemble_divdiv, assemble_elastic,
                     build_structured_mesh, generalized_smallest_eigenvalue,
                     smallest_eigenvalue, solve_saddle)


def random_spd(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    return scale * (Q @ Q.T + n * np.eye(n))


def test_trivial_eigenvalues():
    assert smallest_eigenvalue(np.eye(4)) == pytest.approx(1.0, abs=1e-12)
    assert smallest_eigenvalue(np.diag([3.0, -2.0, 5.0])) == pytest.approx(-2.0, abs=1e-12)


def test_rejects_nonsymmetric():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NonSymmetricMatrixError):
        smallest_eigenvalue(A)
    with pytest.raises(NonSymmetricMatrixError):
        smallest_eigenvalue(np.ones((2, 3)))
    # tiny asymmetry within tolerance is symmetrized away
    B = np.eye(3)
    B[0, 1] = 1e-14
    assert smallest_eigenvalue(B) == pytest.approx(1.0, abs=1e-10)


def test_elastic_block_positive_and_matches_dense_oracle():
    space = MixedSpace(build_structured_mesh(3), problem=1)
    A = assemble_elastic(space, mu=40.0, gamma=0.0)
    lam = smallest_eigenvalue(A)
    assert lam > 0.0
    dense = sla.eigvalsh(A.toarray())
    assert lam == pytest.approx(dense[0], rel=1e-8)


@pytest.mark.parametrize("shift,expect_sign", [(0.0, 1), (None, -1)])
def test_iterative_path_matches_dense(shift, expect_sign):
    # low cutoff forces the large-matrix path; dense LAPACK is the oracle
    space = MixedSpace(build_structured_mesh(5), problem=1)
    A = assemble_elastic(space, mu=40.0, gamma=0.0).toarray()
    if shift is None:
        w = sla.eigvalsh(A)
        A = A - (w[0] + 0.25 * (w[1] - w[0])) * np.eye(A.shape[0])
    lam_dense = sla.eigvalsh(A)[0]
    lam = smallest_eigenvalue(A, dense_cutoff=10)
    assert np.sign(lam) == expect_sign
    assert lam == pytest.approx(lam_dense, rel=1e-8)


def test_iterative_path_deep_indefinite():
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.standard_normal((80, 80)))
    w = np.linspace(1.0, 50.0, 80)
    w[0] = -37.5
    w[1] = -2.0
    A = (Q * w) @ Q.T
    lam = smallest_eigenvalue(A, dense_cutoff=10)
    assert lam == pytest.approx(-37.5, rel=1e-8)


@settings(deadline=None, max_examples=15)
@given(st.integers(min_value=0, max_value=10_000))
def test_congruence_preserves_sign(seed):
    rng = np.random.default_rng(seed)
    n = 12
    S = random_spd(n, seed) - (seed % 3) * n * 1.5 * np.eye(n)
    C = rng.standard_normal((n, n)) + n * np.eye(n)
    lam = smallest_eigenvalue(S)
    lam_c = smallest_eigenvalue(C.T @ S @ C)
    assert np.sign(lam) == np.sign(lam_c)


def test_generalized_trivial():
    G = random_spd(9, 1)
    assert generalized_smallest_eigenvalue(G, G) == pytest.approx(1.0, rel=1e-10)
    assert generalized_smallest_eigenvalue(2.0 * G, G) == pytest.approx(2.0, rel=1e-10)


def test_generalized_matches_cholesky_reduction():
    S = random_spd(15, 4) - 5.0 * np.eye(15)
    G = random_spd(15, 5)
    lam = generalized_smallest_eigenvalue(S, G)
    L = np.linalg.cholesky(G)
    Linv = np.linalg.inv(L)
    reduced = Linv @ S @ Linv.T
    oracle = sla.eigvalsh(0.5 * (reduced + reduced.T))[0]
    assert lam == pytest.approx(oracle, rel=1e-10)


def test_generalized_requires_spd_metric():
    S = np.eye(4)
    G = np.diag([1.0, 1.0, -1.0, 1.0])
    with pytest.raises(NotPositiveDefiniteError):
        generalized_smallest_eigenvalue(S, G)


def test_solve_saddle_zero_rhs():
    A = sp.identity(6, format="csr")
    B = sp.csr_matrix(np.array([[1.0, 0, 0, 0, 0, 0], [0, 1.0, 0, 0, 0, 0]]))
    u, p = solve_saddle(SaddleSystem(A, B, np.zeros(6), np.zeros(2)))
    assert np.allclose(u, 0.0) and np.allclose(p, 0.0)


def test_solve_saddle_residual_random_system():
    rng = np.random.default_rng(12)
    A = sp.csr_matrix(random_spd(30, 21))
    B = sp.csr_matrix(rng.standard_normal((8, 30)))
    rhs_u = rng.standard_normal(30)
    rhs_p = rng.standard_normal(8)
    u, p = solve_saddle(SaddleSystem(A, B, rhs_u, rhs_p))
    resid_u = A @ u + B.T @ p - rhs_u
    resid_p = B @ u - rhs_p
    resid = np.sqrt(np.linalg.norm(resid_u) ** 2 + np.linalg.norm(resid_p) ** 2)
    scale = np.sqrt(np.linalg.norm(rhs_u) ** 2 + np.linalg.norm(rhs_p) ** 2)
    assert resid <= 1e-10 * scale


def test_solve_saddle_singular_named():
    A = sp.csr_matrix((4, 4))  # zero block: singular with zero B
    B = sp.csr_matrix((2, 4))
    with pytest.raises(SingularSaddleError, match="saddle system"):
        solve_saddle(SaddleSystem(A, B, np.ones(4), np.zeros(2)))


def test_lambda_min_nondecreasing_in_stabilization():
    space = MixedSpace(build_structured_mesh(5), problem=1)
    cfg = ProblemConfig(problem=1, n=5)
    A = assemble_elastic(space, mu=cfg.mu, gamma=cfg.gamma(2.0))
    S = assemble_divdiv(space)
    lams = [smallest_eigenvalue((A + M * S).tocsr()) for M in (0.0, 160.0, 640.0)]
    assert lams[0] <= lams[1] + 1e-10 <= lams[2] + 2e-10
