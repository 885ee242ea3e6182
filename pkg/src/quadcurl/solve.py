"""Assembly and solution of the discrete quad-curl problem.

The bilinear form is (curl curl u, curl curl v) + (u, v); element matrices
are formed in the pushed reference basis and congruence-transformed by the
element coefficient matrix, so the quadrature tables over the reference rule
points are shared by all elements.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .elements import ElementContext
from .interpolate import DiscreteField
from .mesh import DofMap, MeshComplex
from .polyspace import monomial_values
from .quadrature import rule_for
from .reference import ReferenceBasis
from .transform import element_basis


class SolverFailure(Exception):
    pass


DIRECT_LIMIT = 60000  # unknowns; above this CG takes over


class _RefTables:
    """Reference-basis values/curl-jacobians at the rule points (shared)."""

    def __init__(self, ref: ReferenceBasis, degree):
        rule = rule_for(3, degree)
        self.rule = rule
        pts = rule.points
        coeffs, curl, curljac, _ = ref.tables(np.float64)
        self.val = np.einsum("nm,jcm->njc", monomial_values(pts, 7), coeffs)
        self.curl = np.einsum("nm,jcm->njc", monomial_values(pts, 6), curl)
        self.curljac = np.einsum("nm,jcdm->njcd", monomial_values(pts, 5),
                                 curljac)


_TABLE_CACHE = {}


def _tables(ref, degree):
    key = (id(ref), degree)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = _RefTables(ref, degree)
    return _TABLE_CACHE[key]


def _element_pushed_tables(tables: _RefTables, ctx: ElementContext):
    """Physical values and curl-curls of the pushed basis at the rule points."""
    B = ctx.amap.B
    Binv = ctx.amap.Binv
    det = ctx.amap.det
    val = tables.val @ Binv
    jac = np.einsum("cr,njrs,sd->njcd", B / det, tables.curljac, Binv,
                    optimize=True)
    cc = np.stack([jac[..., 2, 1] - jac[..., 1, 2],
                   jac[..., 0, 2] - jac[..., 2, 0],
                   jac[..., 1, 0] - jac[..., 0, 1]], axis=-1)
    return val, cc


class SparseSystem:
    """Symmetric system with its boundary (constrained) index set."""

    def __init__(self, matrix, rhs, boundary):
        self.matrix = matrix.tocsr()
        self.rhs = rhs
        self.boundary = np.asarray(boundary, dtype=np.int64)
        self.constrained = False


def assemble(mesh: MeshComplex, dofmap: DofMap, f_oracle,
             ref: ReferenceBasis, quad_degree=14,
             chunk=64) -> SparseSystem:
    """Galerkin matrix and load vector of the quad-curl form."""
    tables = _tables(ref, quad_degree)
    w = tables.rule.weights
    xhat = tables.rule.points
    n = dofmap.n_dofs
    rhs = np.zeros(n)
    acc = None
    rows, cols, vals = [], [], []
    for t in range(mesh.n_tets):
        ctx = ElementContext(mesh.element_vertices(t))
        eb = element_basis(ctx, ref)
        val, cc = _element_pushed_tables(tables, ctx)
        wts = abs(ctx.amap.det) * w
        X = np.concatenate([val, cc], axis=2)       # [g, 315, 6]
        Y = np.ascontiguousarray(X.transpose(1, 0, 2).reshape(315, -1))
        Wt = np.ascontiguousarray((X * wts[:, None, None])
                                  .transpose(1, 0, 2).reshape(315, -1))
        a_loc = eb.C.T @ (Y @ Wt.T) @ eb.C
        gi = dofmap.gather(t)
        fx = np.asarray(f_oracle.u(ctx.amap.apply(xhat)))
        b_hat = np.einsum("gc,gkc,g->k", fx, val, wts)
        rhs[gi] += eb.C.T @ b_hat
        rows.append(np.repeat(gi, 315))
        cols.append(np.tile(gi, 315))
        vals.append(a_loc.ravel())
        if len(rows) >= chunk:
            acc = _merge(acc, rows, cols, vals, n)
            rows, cols, vals = [], [], []
    acc = _merge(acc, rows, cols, vals, n)
    return SparseSystem(acc, rhs, dofmap.boundary_dofs)


def _merge(acc, rows, cols, vals, n):
    if not rows:
        return acc if acc is not None else sparse.csr_matrix((n, n))
    coo = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    return coo if acc is None else acc + coo


def apply_boundary_conditions(system: SparseSystem) -> SparseSystem:
    """Symmetric elimination: unit diagonal rows/cols, zero right-hand side."""
    n = system.matrix.shape[0]
    keep = np.ones(n, dtype=bool)
    keep[system.boundary] = False
    d = sparse.diags(keep.astype(float))
    eye_b = sparse.diags((~keep).astype(float))
    system.matrix = (d @ system.matrix @ d + eye_b).tocsr()
    system.rhs = system.rhs * keep
    system.constrained = True
    system.free = np.nonzero(keep)[0]
    return system


def solve(system: SparseSystem, tol=1e-10) -> np.ndarray:
    """Solve the constrained system to a relative residual of tol.

    Sparse direct factorization below DIRECT_LIMIT unknowns, preconditioned
    CG above; the contract is the residual, not the method.
    """
    if not system.constrained:
        raise SolverFailure("apply_boundary_conditions first")
    A = system.matrix
    b = system.rhs
    if not np.any(b):
        return np.zeros_like(b)
    free = system.free
    Ared = A[free][:, free].tocsc()
    bred = b[free]
    bnorm = np.linalg.norm(bred)
    if len(free) <= DIRECT_LIMIT:
        lu = spla.splu(Ared)
        x = lu.solve(bred)
        for _ in range(4):  # iterative refinement against the residual
            r = bred - Ared @ x
            if np.linalg.norm(r) / bnorm <= tol / 10:
                break
            x = x + lu.solve(r)
    else:
        ilu = spla.spilu(Ared, drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(Ared.shape, ilu.solve)
        x, info = spla.cg(Ared, bred, rtol=tol / 10, maxiter=5000, M=M)
        if info != 0:
            raise SolverFailure(f"CG did not converge (info={info})")
    resid = np.linalg.norm(Ared @ x - bred) / bnorm
    if resid > tol:
        raise SolverFailure(f"relative residual {resid:.3e} > {tol:.1e}")
    out = np.zeros(A.shape[0])
    out[free] = x
    return out


def manufactured_rhs(oracle):
    """Source oracle (curl^4 + identity) for a symbolic exact solution."""
    return oracle.quad_curl_rhs()


def solve_quad_curl(mesh: MeshComplex, dofmap: DofMap, f_oracle,
                    ref: ReferenceBasis, quad_degree=14,
                    tol=1e-10) -> DiscreteField:
    """Assemble, constrain, and solve; returns the discrete solution field."""
    system = assemble(mesh, dofmap, f_oracle, ref, quad_degree=quad_degree)
    apply_boundary_conditions(system)
    x = solve(system, tol=tol)
    return DiscreteField(mesh, dofmap, ref, coeffs=x)
