"""Symmetric eigen-analysis and saddle-point solves at desk scale.

The stability verdicts only ever use the sign of the smallest eigenvalue
of the (constrained) displacement block, which by Sylvester's law of
inertia is invariant under congruence transforms such as dof rescaling.
Below ``DENSE_CUTOFF`` rows everything goes through LAPACK directly; above
it a Cholesky attempt decides definiteness and the eigenvalue itself comes
from Lanczos iterations on the factored inverse (positive definite case)
or from shift-invert / smallest-algebraic ARPACK runs with a dense
fallback (indefinite case).  All iterative paths use fixed start vectors,
so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_CUTOFF = 3200


class NonSymmetricMatrixError(ValueError):
    """Input matrix violates the symmetry contract."""


class NotPositiveDefiniteError(ValueError):
    """Metric matrix of a generalized problem is not SPD."""


class SingularSaddleError(RuntimeError):
    """Saddle factorization failed or the solve left a large residual."""


def _as_symmetric(S, what: str, rtol: float = 1e-10):
    """Return (dense, sparse) symmetrized copies after checking asymmetry."""
    if not sp.issparse(S):
        S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NonSymmetricMatrixError(f"{what} must be square, got {S.shape}")
    if sp.issparse(S):
        Ss = S.tocsr()
        asym = abs(Ss - Ss.T)
        asym_max = asym.max() if asym.nnz else 0.0
        scale = abs(Ss).max() if Ss.nnz else 0.0
    else:
        asym_max = np.abs(S - S.T).max() if S.size else 0.0
        scale = np.abs(S).max() if S.size else 0.0
        Ss = sp.csr_matrix(S)
    if asym_max > rtol * max(scale, 1e-300):
        raise NonSymmetricMatrixError(
            f"{what} is not symmetric: max asymmetry {asym_max:.3e} "
            f"exceeds {rtol:.0e} * max entry {scale:.3e}")
    Ss = (Ss + Ss.T) * 0.5
    return Ss.toarray(), Ss.tocsc()


def smallest_eigenvalue(S, dense_cutoff: int = DENSE_CUTOFF) -> float:
    """Smallest algebraic eigenvalue of a symmetric matrix.

    Raises NonSymmetricMatrixError when the input violates the symmetry
    tolerance (1e-10 relative); otherwise the symmetrized matrix is used.
    """
    Sd, Ss = _as_symmetric(S, "eigenvalue input")
    n = Sd.shape[0]
    if n <= dense_cutoff:
        return float(sla.eigvalsh(Sd, subset_by_index=[0, 0],
                                  check_finite=False)[0])
    try:
        factor = sla.cho_factor(Sd, lower=True, check_finite=False)
    except sla.LinAlgError:
        return _lambda_min_indefinite(Sd, Ss)
    opinv = spla.LinearOperator(
        Sd.shape, matvec=lambda v: sla.cho_solve(factor, v, check_finite=False))
    v0 = np.ones(n)
    vals = spla.eigsh(Ss, k=1, sigma=0.0, which="LM", OPinv=opinv, v0=v0,
                      return_eigenvectors=False)
    return float(vals[0])


def _lambda_min_indefinite(Sd, Ss) -> float:
    """Best-effort smallest eigenvalue when Cholesky already failed."""
    n = Sd.shape[0]
    v0 = np.ones(n)
    cands = []
    try:
        vals = spla.eigsh(Ss, k=min(6, n - 1), sigma=0.0, which="LM", v0=v0,
                          return_eigenvectors=False)
        cands.extend(float(v) for v in vals)
    except Exception:
        pass
    try:
        vals = spla.eigsh(Ss, k=1, which="SA", v0=v0, maxiter=8000, tol=1e-10,
                          return_eigenvectors=False)
        cands.extend(float(v) for v in vals)
    except spla.ArpackNoConvergence as err:
        if err.eigenvalues is not None and len(err.eigenvalues):
            cands.extend(float(v) for v in err.eigenvalues)
    except Exception:
        pass
    lam = min(cands) if cands else None
    if lam is None or lam >= 0.0:
        # iterative paths contradict the failed factorization; settle densely
        lam = float(sla.eigvalsh(Sd, subset_by_index=[0, 0],
                                 check_finite=False)[0])
    return lam


def generalized_smallest_eigenvalue(S, G) -> float:
    """Smallest lambda with S x = lambda G x for symmetric S and SPD G."""
    Sd, _ = _as_symmetric(S, "pencil matrix S")
    Gd, _ = _as_symmetric(G, "metric matrix G")
    if Sd.shape != Gd.shape:
        raise ValueError(f"shape mismatch: S {Sd.shape} vs G {Gd.shape}")
    try:
        sla.cho_factor(Gd, check_finite=False)
    except sla.LinAlgError as err:
        raise NotPositiveDefiniteError(
            f"metric matrix is not positive definite: {err}") from err
    return float(sla.eigh(Sd, Gd, eigvals_only=True,
                          subset_by_index=[0, 0], check_finite=False)[0])


@dataclass(frozen=True)
class SaddleSystem:
    """Block system [[A, B^T], [B, 0]] with right-hand sides for both rows."""

    A_total: sp.spmatrix
    B: sp.spmatrix
    rhs_u: np.ndarray
    rhs_p: np.ndarray

    @property
    def size(self) -> int:
        return self.A_total.shape[0] + self.B.shape[0]


def solve_saddle(system: SaddleSystem, residual_rtol: float = 1e-10):
    """Direct sparse LU solve of the full block system.

    Returns (w, p).  Raises SingularSaddleError when the factorization
    fails, produces non-finite values, or leaves a block residual larger
    than residual_rtol relative to the right-hand side norm.
    """
    _, A = _as_symmetric(system.A_total, "saddle displacement block")
    B = sp.csr_matrix(system.B)
    n_u, n_p = A.shape[0], B.shape[0]
    if B.shape[1] != n_u:
        raise ValueError(f"coupling block shape {B.shape} does not match "
                         f"{n_u} displacement dofs")
    K = sp.bmat([[A, B.T], [B, None]], format="csc")
    rhs = np.concatenate([np.asarray(system.rhs_u, dtype=float),
                          np.asarray(system.rhs_p, dtype=float)])
    if rhs.shape[0] != n_u + n_p:
        raise ValueError("right-hand side length does not match block sizes")

    name = f"saddle system ({n_u} displacement + {n_p} pressure dofs)"
    try:
        lu = spla.splu(K)
        x = lu.solve(rhs)
    except RuntimeError as err:
        raise SingularSaddleError(f"{name}: factorization failed: {err}") from err
    if not np.all(np.isfinite(x)):
        raise SingularSaddleError(f"{name}: solve produced non-finite values")

    resid = np.linalg.norm(K @ x - rhs)
    scale = max(np.linalg.norm(rhs), 1e-300)
    if resid > residual_rtol * scale:
        raise SingularSaddleError(
            f"{name}: block residual {resid:.3e} exceeds "
            f"{residual_rtol:.0e} * ||rhs|| = {residual_rtol * scale:.3e}")
    return x[:n_u], x[n_u:]
