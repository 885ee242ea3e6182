"""Per-element machinery: entity frames, pushed reference basis, DOF action.

An ElementContext caches the canonical frames of the element's entities.
Element vertex tuples are ascending in global vertex id, so local entity
data computed from coordinates coincides with the global (shared) entity
data, and no per-element sign or orientation flips exist anywhere.
"""

from __future__ import annotations

import numpy as np

from . import dofs as D
from .geometry import (EDGE_VERTICES, FACE_VERTICES, REF_VERTICES, TRIPARTITE,
                       AffineMap, affine_from_vertices, canonical_edge_frame,
                       canonical_face_frame)
from .polyspace import monomial_values, monomials
from .quadrature import rule_for
from .reference import ReferenceBasis


class ElementContext:
    """Geometry and canonical frames for one tetrahedron (vertices ascending)."""

    def __init__(self, verts):
        self.verts = np.asarray(verts, dtype=float)
        self.amap = affine_from_vertices(self.verts)
        self.edge_frames = []
        self.edge_lengths = []
        self.edge_dirs = []
        for a, b in EDGE_VERTICES:
            fr = canonical_edge_frame(tuple(self.verts[a]), tuple(self.verts[b]))
            self.edge_frames.append(fr)
            self.edge_dirs.append(self.verts[b] - self.verts[a])
            self.edge_lengths.append(float(np.linalg.norm(self.edge_dirs[-1])))
        self.face_frames = [canonical_face_frame(tuple(self.verts[p]),
                                                 tuple(self.verts[q]),
                                                 tuple(self.verts[r]))
                            for p, q, r in FACE_VERTICES]

    def edge_points(self, ts):
        """Physical points at parameters ts on each edge; [6, len(ts), 3]."""
        out = np.empty((6, len(ts), 3))
        for e, (a, b) in enumerate(EDGE_VERTICES):
            for j, t in enumerate(ts):
                out[e, j] = self.verts[a] + float(t) * (self.verts[b] - self.verts[a])
        return out

    def face_chart_points(self, params):
        """Physical points of chart parameters [m,2] on each face; [4, m, 3]."""
        out = np.empty((4, len(params), 3))
        for f, (p, q, r) in enumerate(FACE_VERTICES):
            d1 = self.verts[q] - self.verts[p]
            d2 = self.verts[r] - self.verts[p]
            out[f] = (self.verts[p][None, :] + params[:, :1] * d1[None, :]
                      + params[:, 1:2] * d2[None, :])
        return out


REFERENCE_CONTEXT = ElementContext(REF_VERTICES)


class PushedBasis:
    """The covariant pushforward of the reference dual basis to one element.

    Evaluation happens at reference coordinates; all returned quantities are
    physical (values, curls, curl Jacobians/Hessians, curl-curls).
    """

    def __init__(self, ref: ReferenceBasis, amap: AffineMap, dtype=np.float64):
        self.ref = ref
        self.amap = amap
        self.dtype = dtype
        self.B = amap.B.astype(dtype)
        self.Binv = amap.Binv.astype(dtype)
        self.det = dtype(amap.det)
        (self._coeffs, self._curl, self._curl_jac,
         self._curl_hess) = ref.tables(dtype)

    def _mono(self, xhat, k):
        pts = np.asarray(xhat, dtype=self.dtype)
        monos = monomials(k)
        pw = np.ones((3, k + 1, len(pts)), dtype=self.dtype)
        for i in range(3):
            for a in range(1, k + 1):
                pw[i, a] = pw[i, a - 1] * pts[:, i]
        out = np.empty((len(pts), len(monos)), dtype=self.dtype)
        for j, (a, b, c) in enumerate(monos):
            out[:, j] = pw[0, a] * pw[1, b] * pw[2, c]
        return out

    def values(self, xhat):
        """[n, 315, 3] physical field values."""
        tab = np.einsum("nm,jcm->njc", self._mono(xhat, 7), self._coeffs)
        return tab @ self.Binv  # row form of B^{-T} uhat

    def curls(self, xhat):
        tab = np.einsum("nm,jcm->njc", self._mono(xhat, 6), self._curl)
        return tab @ (self.B.T / self.det)

    def curl_jacs(self, xhat):
        """[n, 315, 3, 3]; entry [c, d] = d(curl u)_c / dx_d."""
        tab = np.einsum("nm,jcdm->njcd", self._mono(xhat, 5), self._curl_jac)
        return np.einsum("cr,njrs,sd->njcd", self.B / self.det, tab, self.Binv)

    def curl_hess(self, xhat):
        """[n, 315, 3, 3, 3]; entry [c, d, e] = d2(curl u)_c / dx_d dx_e."""
        tab = np.einsum("nm,jcdem->njcde", self._mono(xhat, 4), self._curl_hess)
        return np.einsum("cr,njrst,sd,te->njcde",
                         self.B / self.det, tab, self.Binv, self.Binv)

    def curl_curls(self, xhat):
        jac = self.curl_jacs(xhat)
        return np.stack([jac[..., 2, 1] - jac[..., 1, 2],
                         jac[..., 0, 2] - jac[..., 2, 0],
                         jac[..., 1, 0] - jac[..., 0, 1]], axis=-1)


class BasisField:
    """Adapter exposing a PushedBasis as a batch-315 field."""

    def __init__(self, pb: PushedBasis):
        self.pb = pb

    def u_at(self, x, xhat):
        return self.pb.values(xhat)

    def curl_at(self, x, xhat):
        return self.pb.curls(xhat)

    def curljac_at(self, x, xhat):
        return self.pb.curl_jacs(xhat)

    def curlhess_at(self, x, xhat):
        return self.pb.curl_hess(xhat)


class OracleField:
    """Adapter exposing a FieldOracle as a batch-1 field."""

    def __init__(self, oracle):
        self.oracle = oracle

    def u_at(self, x, xhat):
        return np.asarray(self.oracle.u(x))[:, None, :]

    def curl_at(self, x, xhat):
        return np.asarray(self.oracle.curl(x))[:, None, :]

    def curljac_at(self, x, xhat):
        return np.asarray(self.oracle.curl_jac(x))[:, None, :, :]

    def curlhess_at(self, x, xhat):
        return np.asarray(self.oracle.curl_hess(x))[:, None, :, :, :]


def _legendre_values(ts, kmax, dtype):
    out = np.empty((kmax + 1, len(ts)), dtype=dtype)
    for n in range(kmax + 1):
        coef = D.shifted_legendre(n)
        vals = np.zeros(len(ts), dtype=dtype)
        tp = np.ones(len(ts), dtype=dtype)
        for c in coef:
            vals += dtype(float(c)) * tp
            tp = tp * ts
        out[n] = vals
    return out


def apply_dofs(ctx: ElementContext, field, quad_degree=14, dtype=np.float64):
    """Matrix of all 315 canonical functionals applied to a batched field.

    Returns [315, batch].
    """
    amap = ctx.amap
    dofs = D.enumerate_dofs(7)

    # vertex data
    vx = ctx.verts.astype(dtype)
    vh = amap.pull(ctx.verts).astype(dtype)
    v_curl = field.curl_at(vx, vh)
    v_jac = field.curljac_at(vx, vh)
    v_hess = field.curlhess_at(vx, vh)
    batch = v_curl.shape[1]

    # edge point data
    mids = ctx.edge_points([0.5]).reshape(6, 3)
    m_curl = field.curl_at(mids.astype(dtype), amap.pull(mids).astype(dtype))
    tris = ctx.edge_points([float(t) for t in TRIPARTITE])  # [6,2,3]
    t_jac = field.curljac_at(tris.reshape(-1, 3).astype(dtype),
                             amap.pull(tris.reshape(-1, 3)).astype(dtype))
    t_jac = t_jac.reshape(6, 2, batch, 3, 3)

    # edge moments
    r1 = rule_for(1, quad_degree)
    ts = r1.points[:, 0].astype(dtype)
    ws = r1.weights.astype(dtype)
    epts = ctx.edge_points(ts)  # [6, g, 3]
    leg = _legendre_values(ts, 6, dtype)  # [7, g]
    e_u = field.u_at(epts.reshape(-1, 3).astype(dtype),
                     amap.pull(epts.reshape(-1, 3)).astype(dtype))
    e_u = e_u.reshape(6, len(ts), batch, 3)
    tau_r = np.stack(ctx.edge_dirs).astype(dtype)  # unnormalized, = |e| tau
    # moments[e, i, batch]
    e_mom = np.einsum("egbc,ec,g,ig->eib", e_u, tau_r, ws, leg)

    # face data
    r2 = rule_for(2, quad_degree)
    fp = r2.points.astype(dtype)
    fw = r2.weights.astype(dtype)
    fpts = ctx.face_chart_points(r2.points)  # [4, m, 3]
    fpts_flat = fpts.reshape(-1, 3)
    f_u = field.u_at(fpts_flat.astype(dtype), amap.pull(fpts_flat).astype(dtype))
    f_u = f_u.reshape(4, len(fp), batch, 3)
    f_curl = field.curl_at(fpts_flat.astype(dtype),
                           amap.pull(fpts_flat).astype(dtype))
    f_curl = f_curl.reshape(4, len(fp), batch, 3)
    f_tang = np.stack([fr.units[:2] for fr in ctx.face_frames]).astype(dtype)
    # curl moments[f, t, batch]
    f_cm = 2.0 * np.einsum("fgbc,ftc,g->ftb", f_curl, f_tang, fw)
    # face moments: radial field and scalar monomials on chart coords
    f2m = D.face_scalar_monomials(7)
    smono = np.empty((len(f2m), len(fp)), dtype=dtype)
    for i, (a, b) in enumerate(f2m):
        smono[i] = fp[:, 0] ** a * fp[:, 1] ** b
    centers = np.stack([np.asarray(fr.center) for fr in ctx.face_frames]).astype(dtype)
    radial = fpts.astype(dtype) - centers[:, None, :]  # [4, m, 3]
    f_mom = 2.0 * np.einsum("fgbc,fgc,g,ig->fib", f_u, radial, fw, smono)

    # interior data
    r3 = rule_for(3, quad_degree)
    xh3 = r3.points.astype(dtype)
    w3 = r3.weights.astype(dtype)
    x3 = amap.apply(r3.points).astype(dtype)
    i_u = field.u_at(x3, xh3)
    i_curl = field.curl_at(x3, xh3)
    mono3 = monomial_values(r3.points, 3).astype(dtype).T  # [20, g]
    B = amap.B.astype(dtype)
    Binv = amap.Binv.astype(dtype)
    det = dtype(amap.det)
    # first kind: sum_g w (B^T u).(mono_i xhat) = sum_g w u.(B xhat) mono_i
    Bx = xh3 @ B.T  # [g, 3]
    i_mom = np.einsum("gbc,gc,g,ig->ib", i_u, Bx, w3, mono3)
    # second kind: det * sum_g w curl.(B^{-T}(xhat cross e_i))
    xcross = np.stack([
        np.stack([np.zeros(len(xh3), dtype=dtype), xh3[:, 2], -xh3[:, 1]], axis=1),
        np.stack([-xh3[:, 2], np.zeros(len(xh3), dtype=dtype), xh3[:, 0]], axis=1),
        np.stack([xh3[:, 1], -xh3[:, 0], np.zeros(len(xh3), dtype=dtype)], axis=1),
    ])  # [3, g, 3]
    qphys = np.einsum("igc,cd->igd", xcross, Binv)  # B^{-T} q, row form
    i_cm = det * np.einsum("gbc,igc,g->ib", i_curl, qphys, w3)

    out = np.empty((len(dofs), batch), dtype=dtype)
    eunits = np.stack([fr.units for fr in ctx.edge_frames]).astype(dtype)
    for idx, dof in enumerate(dofs):
        k = dof.kind
        if k == D.VERTEX_CURL:
            out[idx] = v_curl[dof.entity, :, dof.comp]
        elif k == D.VERTEX_CURL_GRAD:
            out[idx] = v_jac[dof.entity, :, dof.comp, dof.deriv[0]]
        elif k == D.VERTEX_CURL_HESS:
            out[idx] = v_hess[dof.entity, :, dof.comp, dof.deriv[0], dof.deriv[1]]
        elif k == D.EDGE_CURL_VALUE:
            out[idx] = m_curl[dof.entity, :, dof.comp]
        elif k == D.EDGE_CURL_DERIV:
            a = eunits[dof.entity, dof.pair[0]]
            b = eunits[dof.entity, dof.pair[1]]
            out[idx] = np.einsum("bcd,c,d->b",
                                 t_jac[dof.entity, dof.node], a, b)
        elif k == D.FACE_CURL_TANG:
            out[idx] = f_cm[dof.entity, dof.comp]
        elif k == D.EDGE_TANG_MOMENT:
            out[idx] = e_mom[dof.entity, dof.test]
        elif k == D.FACE_U_MOMENT:
            out[idx] = f_mom[dof.entity, dof.test]
        elif k == D.INTERIOR_U_MOMENT:
            out[idx] = i_mom[dof.test]
        elif k == D.INTERIOR_CURL_MOMENT:
            out[idx] = i_cm[dof.test]
        else:
            raise ValueError(f"unhandled dof kind {k}")
    return out
