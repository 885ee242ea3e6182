import numpy as np
import pytest

import quadcurl.dofs as D
from conftest import random_tet_vertices
from quadcurl.elements import (REFERENCE_CONTEXT, BasisField, ElementContext,
                               OracleField, apply_dofs)
from quadcurl.geometry import EDGE_VERTICES, FACE_VERTICES, TRIPARTITE
from quadcurl.quadrature import rule_for
from quadcurl.transform import (_reconstruction_weights, build_D, build_E,
                                direct_solve_basis, element_basis)


def test_reconstruction_weights_match_benchmark_identity():
    w13, w23 = _reconstruction_weights()
    assert np.allclose(w13, [-248 / 81, -8 / 81, -40 / 81, 1 / 81, -2 / 81,
                             0.0, 256 / 81], atol=1e-14)
    assert np.allclose(w23, [8 / 81, 248 / 81, 1 / 81, -40 / 81, 0.0, 2 / 81,
                             -256 / 81], atol=1e-14)


def test_reconstruction_exact_on_monomials():
    w13, w23 = _reconstruction_weights()
    for t, w in ((1 / 3, w13), (2 / 3, w23)):
        for j in range(7):
            data = [1.0 if j == 0 else 0.0, 1.0, 1.0 if j == 1 else 0.0,
                    float(j), 2.0 if j == 2 else 0.0, float(j * (j - 1)),
                    0.5 ** j]
            expect = 0.0 if j == 0 else j * t ** (j - 1)
            assert abs(float(np.dot(w, data)) - expect) < 1e-13


def test_identity_on_reference(ref):
    eb = element_basis(REFERENCE_CONTEXT, ref)
    assert np.abs(eb.C - np.eye(315)).max() < 1e-12


def test_translation_gives_identity(ref):
    verts = np.array(REFERENCE_CONTEXT.verts) + np.array([0.3, -0.7, 2.0])
    eb = element_basis(ElementContext(verts), ref)
    assert np.abs(eb.C - np.eye(315)).max() < 1e-12


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_scaling_covariance_of_edge_moment_duals(ref, s):
    """Edge tangential moments are invariant under the covariant map, so the
    corresponding columns of C are unit vectors under pure scaling."""
    eb = element_basis(ElementContext(s * np.array(REFERENCE_CONTEXT.verts)),
                       ref)
    dofs = D.enumerate_dofs(7)
    for j, dof in enumerate(dofs):
        if dof.kind == D.EDGE_TANG_MOMENT:
            col = eb.C[:, j].copy()
            col[j] -= 1.0
            assert np.abs(col).max() < 1e-11


def test_transform_matches_direct_solve(ref, rng):
    worst_dual = worst_val = 0.0
    for _ in range(10):
        verts = random_tet_vertices(rng)
        ctx = ElementContext(verts)
        eb = element_basis(ctx, ref, dtype=np.longdouble)
        A = apply_dofs(ctx, BasisField(eb.pushed), dtype=np.longdouble)
        worst_dual = max(worst_dual, float(
            np.abs(A @ eb.C - np.eye(315, dtype=np.longdouble)).max()))
        db = direct_solve_basis(ctx, ref)
        bc = rng.dirichlet(np.ones(4), 20)
        xhat = ctx.amap.pull(bc @ verts)
        f1 = np.einsum("njc,jk->nkc", eb.pushed.values(xhat), eb.C)
        f2 = np.einsum("njc,jk->nkc", db.pushed.values(xhat), db.C)
        worst_val = max(worst_val,
                        float(np.abs(f1 - f2).max() / np.abs(f2).max()))
    assert worst_dual <= 1e-7
    assert worst_val <= 1e-6


def _apply_star_row(ctx, oracle, row, dof_vals):
    """Direct evaluation of the enlarged functional with a given L* index."""
    # layout mirrors transform.py
    amap = ctx.amap
    if row < 12:
        v, comp = divmod(row, 3)
        return oracle.curl(ctx.verts[v][None])[0, comp]
    row -= 12
    if row < 36:
        v, rest = divmod(row, 9)
        comp, dvar = divmod(rest, 3)
        return oracle.curl_jac(ctx.verts[v][None])[0, comp, dvar]
    row -= 36
    if row < 72:
        v, rest = divmod(row, 18)
        comp, sig = divmod(rest, 6)
        d1, d2 = D.SIG_ORDER[sig]
        return oracle.curl_hess(ctx.verts[v][None])[0, comp, d1, d2]
    row -= 72
    if row < 18:
        e, comp = divmod(row, 3)
        mid = ctx.edge_points([0.5])[e, 0]
        return oracle.curl(mid[None])[0, comp]
    row -= 18
    if row < 108:
        e, rest = divmod(row, 18)
        node, pair = divmod(rest, 9)
        a_idx, b_idx = D.DERIV_PAIRS_FULL[pair]
        pt = ctx.edge_points([float(t) for t in TRIPARTITE])[e, node]
        J = oracle.curl_jac(pt[None])[0]
        u = ctx.edge_frames[e].units
        return float(u[a_idx] @ J @ u[b_idx])
    row -= 108
    if row < 12:
        f, which = divmod(row, 3)
        r2 = rule_for(2, 14)
        p, q, r = FACE_VERTICES[f]
        vv = ctx.verts[[p, q, r]]
        pts = (vv[0] + np.outer(r2.points[:, 0], vv[1] - vv[0])
               + np.outer(r2.points[:, 1], vv[2] - vv[0]))
        cvals = oracle.curl(pts)
        fr = ctx.face_frames[f]
        if which < 2:
            return 2.0 * float(r2.weights @ (cvals @ fr.units[which]))
        # unnormalized normal moment over the physical face
        return 2.0 * fr.area * float(r2.weights @ (cvals @ fr.units[2]))
    row -= 12
    # tail: identical to the canonical functionals
    return dof_vals[190 + row]


def test_E_rows_reproduce_star_functionals(ref, rng):
    from quadcurl.interpolate import PolyOracle
    from quadcurl.polyspace import build_Rk, vector_poly_to_array
    members = build_Rk(7).members
    verts = random_tet_vertices(rng)
    ctx = ElementContext(verts)
    Em = build_E(ctx)
    # rows covering every nontrivial class plus representative unit rows
    rows = [14, 20, 47, 48, 55, 62, 119, 130, 138, 139, 140, 141, 146,
            155, 175, 230, 245, 246, 248, 251, 257, 258, 300, 382]
    for trial in range(20):
        w = rng.normal(size=315)
        arr = np.zeros((3, 120))
        for i, m in enumerate(members):
            arr += w[i] * vector_poly_to_array(m, 7)
        oracle = PolyOracle(arr, 7)
        dof_vals = apply_dofs(ctx, OracleField(oracle))[:, 0]
        for row in rows:
            direct = _apply_star_row(ctx, oracle, row, dof_vals)
            via_E = float(Em[row] @ dof_vals)
            scale = max(abs(direct), np.abs(dof_vals).max())
            assert abs(via_E - direct) <= 1e-9 * scale, (trial, row)


def test_perturbed_E_detected(ref, rng):
    """Negative control: corrupting one E row breaks the duality residual."""
    verts = random_tet_vertices(rng)
    ctx = ElementContext(verts)
    Dm = build_D(ctx)
    Em = build_E(ctx)
    Em[140] *= 1.01  # a reconstruction row
    C = Dm @ Em
    A = apply_dofs(ctx, BasisField(element_basis(ctx, ref).pushed))
    resid = np.abs(A @ C - np.eye(315)).max()
    assert resid > 1e-6


def test_element_basis_check_mode(ref, rng):
    verts = random_tet_vertices(rng)
    eb = element_basis(ElementContext(verts), ref, check=True)
    assert eb.method == "transform"
    assert eb.diagnostics["transform_residual"] <= 1e-6
