"""General-element basis via the two-matrix functional transformation.

The pullbacks of the 315 reference functionals through an element map are
expanded block-diagonally (matrix Dm, 315x383) over an enlarged functional
set; the enlarged set is in turn expressed in the element's own canonical
functionals (matrix Em, 383x315) using exact polynomial identities:

* curl components restricted to an edge are degree-6 polynomials, so their
  tangential derivatives at the tripartite points follow from a 7-condition
  Hermite-type reconstruction (endpoint values/first/second derivatives plus
  the midpoint value);
* the divergence-free property of the curl supplies the vertex derivative
  components excluded from the DOF set, and the frame trace identity
  d(w.tau)/dtau + d(w.n)/dn + d(w.m)/dm = 0 supplies the (m,m) derivative;
* the constant normal moment of the curl on a face equals the oriented sum
  of the lowest tangential edge moments around the face boundary.

The element basis coefficient matrix is then C = Dm @ Em, with the direct
extended-precision Vandermonde solve kept as a permanent oracle/fallback.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import dofs as D
from .elements import (REFERENCE_CONTEXT, BasisField, ElementContext,
                       PushedBasis, apply_dofs)
from .geometry import EDGE_VERTICES, FACE_EDGES, TRIPARTITE


class ConsistencyFailure(Exception):
    pass


N_DOFS = 315
N_STAR = 383

# L* column layout
_S_VCURL = 0          # 12
_S_VGRAD = 12         # 4 * 9
_S_VHESS = 48         # 4 * 18
_S_EMID = 120         # 18
_S_EDERIV = 138       # 6 * 2 * 9
_S_FCURL = 246        # 4 * 3 (t1, t2, nu)
_S_TAIL = 258         # 125 identical to the L tail

# L row layout (enumerate_dofs order)
_L_VCURL = 0
_L_VGRAD = 12
_L_VHESS = 44
_L_EMID = 104
_L_EDERIV = 122
_L_FCURL = 182
_L_EMOM = 190
_L_FMOM = 232
_L_IMOM = 292
_L_ICURL = 312

SIG_INDEX = {s: i for i, s in enumerate(D.SIG_ORDER)}

# excluded first derivative (comp, dvar) -> divergence partners
_GRAD_SUBS = {(2, 2): ((0, 0), (1, 1))}
# excluded pure second derivatives -> partners (comp, sig)
_HESS_SUBS = {
    (0, (0, 0)): ((1, (0, 1)), (2, (0, 2))),
    (1, (1, 1)): ((0, (0, 1)), (2, (1, 2))),
    (2, (2, 2)): ((0, (0, 2)), (1, (1, 2))),
}


def _l_vcurl(v, comp):
    return _L_VCURL + 3 * v + comp


def _l_vgrad(v, comp, dvar):
    off = sum(len(D.GRAD_DERIVS[c]) for c in range(comp))
    return _L_VGRAD + 8 * v + off + D.GRAD_DERIVS[comp].index(dvar)


def _l_vhess(v, comp, sig):
    off = sum(len(D.HESS_SIGS[c]) for c in range(comp))
    return _L_VHESS + 15 * v + off + D.HESS_SIGS[comp].index(sig)


def _l_emid(e, comp):
    return _L_EMID + 3 * e + comp


def _l_ederiv(e, node, pair):
    return _L_EDERIV + 10 * e + 5 * node + D.DERIV_PAIRS.index(pair)


def _l_emom(e, test):
    return _L_EMOM + 7 * e + test


def _grad_cols(v, comp, dvar):
    """L-columns with signs realizing d_dvar (curl)_comp at a vertex."""
    if dvar in D.GRAD_DERIVS[comp]:
        return ((_l_vgrad(v, comp, dvar), 1.0),)
    (c1, d1), (c2, d2) = _GRAD_SUBS[(comp, dvar)]
    return ((_l_vgrad(v, c1, d1), -1.0), (_l_vgrad(v, c2, d2), -1.0))


def _hess_cols(v, comp, sig):
    if sig in D.HESS_SIGS[comp]:
        return ((_l_vhess(v, comp, sig), 1.0),)
    (c1, s1), (c2, s2) = _HESS_SUBS[(comp, sig)]
    return ((_l_vhess(v, c1, s1), -1.0), (_l_vhess(v, c2, s2), -1.0))


@lru_cache(maxsize=None)
def _reconstruction_weights():
    """Rows r_t with phi'(t) = r_t . (phi(0), phi(1), phi'(0), phi'(1),
    phi''(0), phi''(1), phi(1/2)) for every phi in P6, t in {1/3, 2/3}."""
    n = 7
    M = []
    M.append([Fraction(1 if j == 0 else 0) for j in range(n)])       # val 0
    M.append([Fraction(1) for _ in range(n)])                        # val 1
    M.append([Fraction(1 if j == 1 else 0) for j in range(n)])       # d 0
    M.append([Fraction(j) for j in range(n)])                        # d 1
    M.append([Fraction(2 if j == 2 else 0) for j in range(n)])       # dd 0
    M.append([Fraction(j * (j - 1)) for j in range(n)])              # dd 1
    M.append([Fraction(1, 2 ** j) for j in range(n)])                # val 1/2
    out = []
    for t in TRIPARTITE:
        t = Fraction(int(t.numerator), int(t.denominator))
        d = [Fraction(0), Fraction(1)] + [j * t ** (j - 1) for j in range(2, n)]
        # solve M^T r = d
        A = [[M[i][j] for i in range(n)] + [d[j]] for j in range(n)]
        for c in range(n):
            p = next(i for i in range(c, n) if A[i][c] != 0)
            A[c], A[p] = A[p], A[c]
            piv = A[c][c]
            A[c] = [x / piv for x in A[c]]
            for i in range(n):
                if i != c and A[i][c] != 0:
                    f = A[i][c]
                    A[i] = [x - f * y for x, y in zip(A[i], A[c])]
        out.append(tuple(float(A[i][n]) for i in range(n)))
    return tuple(out)


def _edge_restriction_rows(ctx: ElementContext, e, comp):
    """Sparse L-rows of the 7 reconstruction data for (curl u)_comp on edge e.

    Order: value(p), value(q), d/dt(p), d/dt(q), d2/dt2(p), d2/dt2(q),
    value(midpoint), with t the [0,1] parameter from the lower vertex.
    """
    p, q = EDGE_VERTICES[e]
    delta = ctx.edge_dirs[e]
    rows = []
    rows.append(((_l_vcurl(p, comp), 1.0),))
    rows.append(((_l_vcurl(q, comp), 1.0),))
    for v in (p, q):
        row = {}
        for o in range(3):
            if delta[o] == 0.0:
                continue
            for col, s in _grad_cols(v, comp, o):
                row[col] = row.get(col, 0.0) + s * delta[o]
        rows.append(tuple(row.items()))
    for v in (p, q):
        row = {}
        for o1, o2 in D.SIG_ORDER:
            w = delta[o1] * delta[o2] * (1.0 if o1 == o2 else 2.0)
            if w == 0.0:
                continue
            for col, s in _hess_cols(v, comp, (o1, o2)):
                row[col] = row.get(col, 0.0) + s * w
        rows.append(tuple(row.items()))
    rows.append(((_l_emid(e, comp), 1.0),))
    return rows


def build_E(ctx: ElementContext, dtype=np.float64) -> np.ndarray:
    """383x315 expansion of the enlarged functional set in the canonical one."""
    E = np.zeros((N_STAR, N_DOFS), dtype=dtype)
    r = 0
    for v in range(4):
        for comp in range(3):
            E[r, _l_vcurl(v, comp)] = 1.0
            r += 1
    assert r == _S_VGRAD
    for v in range(4):
        for comp in range(3):
            for dvar in range(3):
                for col, s in _grad_cols(v, comp, dvar):
                    E[r, col] += s
                r += 1
    assert r == _S_VHESS
    for v in range(4):
        for comp in range(3):
            for sig in D.SIG_ORDER:
                for col, s in _hess_cols(v, comp, sig):
                    E[r, col] += s
                r += 1
    assert r == _S_EMID
    for e in range(6):
        for comp in range(3):
            E[r, _l_emid(e, comp)] = 1.0
            r += 1
    assert r == _S_EDERIV
    rec_w = _reconstruction_weights()
    for e in range(6):
        units = ctx.edge_frames[e].units
        inv_len = 1.0 / ctx.edge_lengths[e]
        data = [_edge_restriction_rows(ctx, e, comp) for comp in range(3)]
        for node in range(2):
            tang_rows = []
            for a_idx in range(3):
                row = {}
                a = units[a_idx]
                for comp in range(3):
                    if a[comp] == 0.0:
                        continue
                    for w, drow in zip(rec_w[node], data[comp]):
                        if w == 0.0:
                            continue
                        for col, s in drow:
                            row[col] = row.get(col, 0.0) + inv_len * a[comp] * w * s
                tang_rows.append(row)
            for b_idx in range(3):
                for a_idx in range(3):
                    if b_idx == 0:
                        for col, s in tang_rows[a_idx].items():
                            E[r, col] += s
                    elif (a_idx, b_idx) == (2, 2):
                        # trace of the curl Jacobian in the edge frame is zero
                        for col, s in tang_rows[0].items():
                            E[r, col] -= s
                        E[r, _l_ederiv(e, node, (1, 1))] -= 1.0
                    else:
                        E[r, _l_ederiv(e, node, (a_idx, b_idx))] = 1.0
                    r += 1
    assert r == _S_FCURL
    for f in range(4):
        for t in range(2):
            E[r, _L_FCURL + 2 * f + t] = 1.0
            r += 1
        for eloc, sign in FACE_EDGES[f]:
            E[r, _l_emom(eloc, 0)] += sign
        r += 1
    assert r == _S_TAIL
    for i in range(125):
        E[r, _L_EMOM + i] = 1.0
        r += 1
    assert r == N_STAR
    return E


def build_D(ctx: ElementContext, dtype=np.float64) -> np.ndarray:
    """315x383 block expansion of the pulled-back reference functionals."""
    ref = REFERENCE_CONTEXT
    amap = ctx.amap
    B = amap.B.astype(dtype)
    Binv = amap.Binv.astype(dtype)
    det = dtype(amap.det)
    J2 = det * Binv
    Dm = np.zeros((N_DOFS, N_STAR), dtype=dtype)

    for v in range(4):
        Dm[_L_VCURL + 3 * v:_L_VCURL + 3 * v + 3,
           _S_VCURL + 3 * v:_S_VCURL + 3 * v + 3] = J2

    # first derivatives: rows (i,o) allowed, cols (l,p) full
    W = np.zeros((8, 9), dtype=dtype)
    rr = 0
    for i in range(3):
        for o in D.GRAD_DERIVS[i]:
            for l in range(3):
                for p in range(3):
                    W[rr, 3 * l + p] = J2[i, l] * B[p, o]
            rr += 1
    for v in range(4):
        Dm[_L_VGRAD + 8 * v:_L_VGRAD + 8 * v + 8,
           _S_VGRAD + 9 * v:_S_VGRAD + 9 * v + 9] = W

    # second derivatives through the quadratic change of variables
    H = np.zeros((6, 6), dtype=dtype)
    for si, (o, p) in enumerate(D.SIG_ORDER):
        for sj, (qd, rd) in enumerate(D.SIG_ORDER):
            if qd == rd:
                H[si, sj] = B[qd, o] * B[qd, p]
            else:
                H[si, sj] = B[qd, o] * B[rd, p] + B[rd, o] * B[qd, p]
    V = np.zeros((15, 18), dtype=dtype)
    rr = 0
    for i in range(3):
        for sig in D.HESS_SIGS[i]:
            si = SIG_INDEX[sig]
            for l in range(3):
                V[rr, 6 * l:6 * l + 6] = J2[i, l] * H[si]
            rr += 1
    for v in range(4):
        Dm[_L_VHESS + 15 * v:_L_VHESS + 15 * v + 15,
           _S_VHESS + 18 * v:_S_VHESS + 18 * v + 18] = V

    for e in range(6):
        Dm[_L_EMID + 3 * e:_L_EMID + 3 * e + 3,
           _S_EMID + 3 * e:_S_EMID + 3 * e + 3] = J2

    for e in range(6):
        ref_units = ref.edge_frames[e].units.astype(dtype)
        phys_units = ctx.edge_frames[e].units.astype(dtype)
        ca = phys_units @ (Binv.T @ ref_units.T)   # [phys a, ref ahat]
        cb = phys_units @ (B @ ref_units.T)        # [phys b, ref bhat]
        G = np.zeros((5, 9), dtype=dtype)
        for rr, (ah, bh) in enumerate(D.DERIV_PAIRS):
            for cc, (a, b) in enumerate(D.DERIV_PAIRS_FULL):
                G[rr, cc] = det * ca[a, ah] * cb[b, bh]
        for node in range(2):
            Dm[_L_EDERIV + 10 * e + 5 * node:_L_EDERIV + 10 * e + 5 * node + 5,
               _S_EDERIV + 18 * e + 9 * node:_S_EDERIV + 18 * e + 9 * node + 9] = G

    for f in range(4):
        ref_t = ref.face_frames[f].units[:2].astype(dtype)
        phys = ctx.face_frames[f].units.astype(dtype)
        area = dtype(ctx.face_frames[f].area)
        coef = phys @ (Binv.T @ ref_t.T)           # [phys (t1,t2,nu), ref t_i]
        for i in range(2):
            row = _L_FCURL + 2 * f + i
            Dm[row, _S_FCURL + 3 * f + 0] = det * coef[0, i]
            Dm[row, _S_FCURL + 3 * f + 1] = det * coef[1, i]
            Dm[row, _S_FCURL + 3 * f + 2] = det * coef[2, i] / area
    for i in range(125):
        Dm[_L_EMOM + i, _S_TAIL + i] = 1.0
    return Dm


class ElementBasis:
    """Coefficients of the element dual basis over the pushed reference basis."""

    def __init__(self, ctx, C, pushed, method):
        self.ctx = ctx
        self.C = C
        self.pushed = pushed
        self.method = method


def direct_solve_basis(ctx: ElementContext, ref_basis, dtype=np.longdouble):
    """Oracle path: invert the element Vandermonde in extended precision."""
    pb = PushedBasis(ref_basis, ctx.amap, dtype=dtype)
    A = apply_dofs(ctx, BasisField(pb), dtype=dtype)
    C = _gauss_solve(A, np.eye(N_DOFS, dtype=dtype))
    return ElementBasis(ctx, C, pb, "direct")


def _gauss_solve(A, Bm):
    """Partial-pivot Gaussian elimination, dtype-generic (incl. longdouble)."""
    A = A.copy()
    X = Bm.copy()
    n = A.shape[0]
    for c in range(n):
        p = c + int(np.argmax(np.abs(A[c:, c])))
        if A[p, c] == 0:
            raise ConsistencyFailure("singular element Vandermonde")
        if p != c:
            A[[c, p]] = A[[p, c]]
            X[[c, p]] = X[[p, c]]
        inv = 1.0 / A[c, c]
        A[c] *= inv
        X[c] *= inv
        f = A[:, c].copy()
        f[c] = 0.0
        A -= np.outer(f, A[c])
        X -= np.outer(f, X[c])
    return X


def element_basis(ctx: ElementContext, ref_basis, dtype=np.float64,
                  check=False, check_tol=1e-6) -> ElementBasis:
    """Element dual basis via C = Dm @ Em (transposed to coefficient form).

    With check=True the duality residual is measured and the direct solve is
    used as a fallback beyond check_tol.
    """
    Dm = build_D(ctx, dtype=dtype)
    Em = build_E(ctx, dtype=dtype)
    C = Dm @ Em
    pb = PushedBasis(ref_basis, ctx.amap, dtype=dtype)
    basis = ElementBasis(ctx, C, pb, "transform")
    if check:
        A = apply_dofs(ctx, BasisField(pb), dtype=dtype)
        resid = float(np.abs(A @ C - np.eye(N_DOFS, dtype=dtype)).max())
        if resid > check_tol:
            direct = direct_solve_basis(ctx, ref_basis, dtype=np.longdouble)
            direct.C = direct.C.astype(dtype)
            direct.pushed = pb
            direct.diagnostics = {"transform_residual": resid}
            return direct
        basis.diagnostics = {"transform_residual": resid}
    return basis
