"""Assembly of the bilinear forms and load vectors of the model problems.

The displacement block of the linearized problem is

    a(w, v) = 2*mu*int eps(w):eps(v) - gamma*int r (grad w)^T : grad v

with the affine weight r(x, y) = 1 - y (the pressure profile of the
trivial solution).  The div-div stabilization matrix int div w div v is
assembled separately, without its load-dependent factor, so callers can
scale it.  The coupling block is b(v, q) = int q div v, and the pressure
mass and displacement H1 Gram matrices back the inf-sup estimator and
error norms.

All matrices are assembled element by element in a fixed element order
and scattered with plain addition, so repeated runs are bit-identical.
By default the returned operators are restricted to the free
displacement dofs (homogeneous constraints eliminated); pass
``reduced=False`` for the full, unconstrained operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .spaces import MixedSpace, make_quadrature, tabulate_scalar_basis


def pressure_profile_slope(x, y):
    """Weight r(x, y) = 1 - y of the transposed-gradient term."""
    return 1.0 - np.asarray(y, dtype=float) + 0.0 * np.asarray(x, dtype=float)


def _element_geometry(space: MixedSpace):
    """Per-element jacobians: columns of J span the triangle edges."""
    p = space.mesh.nodes[space.mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    invJT = np.empty_like(J)
    invJT[:, 0, 0] = J[:, 1, 1]
    invJT[:, 0, 1] = -J[:, 1, 0]
    invJT[:, 1, 0] = -J[:, 0, 1]
    invJT[:, 1, 1] = J[:, 0, 0]
    invJT /= det[:, None, None]
    return p, J, det, invJT


def _basis_data(space: MixedSpace, degree: int | None = None):
    """Physical-space basis values/gradients and quadrature geometry."""
    rule = space.quadrature if degree is None else make_quadrature(degree)
    vals, ref_grads = tabulate_scalar_basis(rule, space.include_bubbles)
    p, J, det, invJT = _element_geometry(space)
    grads = np.einsum("eij,aqj->eaqi", invJT, ref_grads)
    xy = p[:, None, 0, :] + np.einsum("eij,qj->eqi", J, rule.points[:, 1:])
    return rule, vals, grads, det, xy


def _scatter_square(local, dofs, n):
    e, k, _ = local.shape
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    return sp.coo_matrix((local.reshape(e, -1).ravel(), (rows, cols)),
                         shape=(n, n)).tocsr()


def _reduce(A, space: MixedSpace, reduced: bool):
    if not reduced:
        return A
    free = space.free_dofs
    return A[free, :][:, free]


def _vector_block(parts, space: MixedSpace):
    """Pack component blocks parts[c][d] of shape (e, k, k) into local
    (e, 2k, 2k) matrices with dof order 2a+c."""
    e, k, _ = parts[0][0].shape
    out = np.zeros((e, 2 * k, 2 * k))
    for c in (0, 1):
        for d in (0, 1):
            out[:, c::2, d::2] = parts[c][d]
    return out


def assemble_elastic(space: MixedSpace, mu: float, gamma: float,
                     reduced: bool = True) -> sp.csr_matrix:
    """Displacement block 2*mu*eps:eps - gamma*r-weighted transposed-gradient.

    Both terms are exchange-symmetric, so the result is symmetric up to
    roundoff for any (mu, gamma).
    """
    if mu <= 0:
        raise ValueError(f"shear modulus must be positive, got {mu}")
    E2, R = elastic_parts(space, reduced=reduced)
    return (mu * E2 - gamma * R).tocsr()


def elastic_parts(space: MixedSpace, reduced: bool = True):
    """The two gamma-independent pieces of the elastic block.

    Returns (E2, R) with assemble_elastic(mu, gamma) = mu*E2 - gamma*R;
    E2 carries 2*eps:eps and R the r-weighted transposed-gradient term.
    Scans over load factors reuse these instead of reassembling.
    """
    rule, vals, grads, det, xy = _basis_data(space)
    w = rule.weights

    # Pd[e,a,b,i,j] = int d_i phi_a d_j phi_b ; Pr adds the weight r
    Pd = np.einsum("q,eaqi,ebqj->eabij", w, grads, grads) * det[:, None, None, None, None]
    r_at = pressure_profile_slope(xy[..., 0], xy[..., 1])
    Pr = np.einsum("eq,eaqi,ebqj->eabij", w * r_at, grads, grads) * det[:, None, None, None, None]
    Kg = np.einsum("eabii->eab", Pd)

    E2_parts = [[Kg + Pd[..., 0, 0], Pd[..., 1, 0]],
                [Pd[..., 0, 1], Kg + Pd[..., 1, 1]]]
    R_parts = [[Pr[..., 0, 0], Pr[..., 1, 0]],
               [Pr[..., 0, 1], Pr[..., 1, 1]]]
    E2 = _scatter_square(_vector_block(E2_parts, space), space.elem_dofs, space.n_u)
    R = _scatter_square(_vector_block(R_parts, space), space.elem_dofs, space.n_u)
    return _reduce(E2, space, reduced), _reduce(R, space, reduced)


def assemble_divdiv(space: MixedSpace, reduced: bool = True) -> sp.csr_matrix:
    """Stabilization matrix S with v^T S v = ||div v_h||^2 in L2."""
    rule, vals, grads, det, _ = _basis_data(space)
    Pd = np.einsum("q,eaqi,ebqj->eabij", rule.weights, grads, grads) \
        * det[:, None, None, None, None]
    parts = [[Pd[..., 0, 0], Pd[..., 0, 1]],
             [Pd[..., 1, 0], Pd[..., 1, 1]]]
    S = _scatter_square(_vector_block(parts, space), space.elem_dofs, space.n_u)
    return _reduce(S, space, reduced)


def assemble_coupling(space: MixedSpace, reduced: bool = True) -> sp.csr_matrix:
    """Pressure-displacement coupling (B v)_q = int q_h div v_h."""
    rule, vals, grads, det, _ = _basis_data(space)
    hat_vals = vals[:3]
    blk = np.einsum("q,pq,eaqc->epac", rule.weights, hat_vals, grads) \
        * det[:, None, None, None]
    e, _, k, _ = blk.shape
    local = np.zeros((e, 3, 2 * k))
    local[:, :, 0::2] = blk[..., 0]
    local[:, :, 1::2] = blk[..., 1]

    rows = np.repeat(space.mesh.triangles, 2 * k, axis=1).ravel()
    cols = np.tile(space.elem_dofs, (1, 3)).ravel()
    B = sp.coo_matrix((local.reshape(e, -1).ravel(), (rows, cols)),
                      shape=(space.n_p, space.n_u)).tocsr()
    return B[:, space.free_dofs] if reduced else B


def assemble_load(space: MixedSpace, f, scale: float = 1.0,
                  degree: int = 10, reduced: bool = True) -> np.ndarray:
    """Load vector with entries scale * int f . phi_i.

    f(x, y) must be vectorized and return shape (..., 2).  A high-degree
    rule is the default because the model loads are not polynomial.
    """
    rule, vals, grads, det, xy = _basis_data(space, degree=degree)
    fv = np.asarray(f(xy[..., 0], xy[..., 1]), dtype=float)
    if fv.shape != xy.shape:
        raise ValueError(f"load field returned shape {fv.shape}, expected {xy.shape}")
    blk = np.einsum("q,eqc,aq->eac", rule.weights, fv, vals) * det[:, None, None]
    e, k, _ = blk.shape
    local = np.zeros((e, 2 * k))
    local[:, 0::2] = blk[..., 0]
    local[:, 1::2] = blk[..., 1]

    F = np.zeros(space.n_u)
    np.add.at(F, space.elem_dofs.ravel(), local.ravel())
    F *= scale
    return F[space.free_dofs] if reduced else F


def assemble_pressure_mass(space: MixedSpace) -> sp.csr_matrix:
    """L2 mass matrix of the continuous P1 pressure space."""
    rule, vals, grads, det, _ = _basis_data(space)
    hat_vals = vals[:3]
    local = np.einsum("q,pq,rq->pr", rule.weights, hat_vals, hat_vals)
    local = local[None, :, :] * det[:, None, None]
    return _scatter_square(local, space.mesh.triangles, space.n_p)


def assemble_h1_gram(space: MixedSpace, reduced: bool = True) -> sp.csr_matrix:
    """Full H1 inner product int grad w : grad v + int w . v."""
    rule, vals, grads, det, _ = _basis_data(space)
    Kg = np.einsum("q,eaqi,ebqi->eab", rule.weights, grads, grads) * det[:, None, None]
    Ms = np.einsum("q,aq,bq->ab", rule.weights, vals, vals)
    Ms = Ms[None, :, :] * det[:, None, None]
    zero = np.zeros_like(Kg)
    parts = [[Kg + Ms, zero], [zero, Kg + Ms]]
    K = _scatter_square(_vector_block(parts, space), space.elem_dofs, space.n_u)
    return _reduce(K, space, reduced)


def p1_scalar_stiffness(vertices) -> np.ndarray:
    """Scalar P1 stiffness of a single triangle (gradient-pipeline probe)."""
    verts = np.asarray(vertices, dtype=float)
    d1, d2 = verts[1] - verts[0], verts[2] - verts[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    invJT = np.array([[d2[1], -d1[1]], [-d2[0], d1[0]]]) / det
    grads = (invJT @ np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]).T).T
    return 0.5 * det * grads @ grads.T


@dataclass(frozen=True)
class AssembledSystem:
    """All operators of one stabilized problem instance on free dofs."""

    space: MixedSpace
    A_elastic: sp.csr_matrix
    S_divdiv: sp.csr_matrix
    B_coupling: sp.csr_matrix
    M_pressure: sp.csr_matrix
    K_V: sp.csr_matrix
    load_u: np.ndarray
    load_p: np.ndarray


def assemble_system(space: MixedSpace, mu: float, gamma: float, f,
                    scale: float = 1.0) -> AssembledSystem:
    """Assemble every block needed by the solvers and estimators."""
    return AssembledSystem(
        space=space,
        A_elastic=assemble_elastic(space, mu, gamma),
        S_divdiv=assemble_divdiv(space),
        B_coupling=assemble_coupling(space),
        M_pressure=assemble_pressure_mass(space),
        K_V=assemble_h1_gram(space),
        load_u=assemble_load(space, f, scale=scale),
        load_p=np.zeros(space.n_p),
    )


def export_coo(A) -> str:
    """Coordinate text dump "row col value", one entry per line."""
    coo = sp.coo_matrix(A)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}" for i in order]
    return "\n".join(lines) + "\n"
