import numpy as np
import pytest

import quadcurl.dofs as D
from quadcurl.elements import (REFERENCE_CONTEXT, BasisField, PushedBasis,
                               apply_dofs)
from quadcurl.exactla import QQ
from quadcurl.polyspace import (Poly, VectorPoly, build_Rk, curl, dim_Rk,
                                grad, monomials, vector_poly_to_array)
from quadcurl.reference import (_prepare_member, apply_dof_exact, dof_scale,
                                load_artifact, save_artifact)


def test_dof_counts_k7():
    c = D.dof_counts(7)
    assert c == {"vertex": 104, "edge": 120, "face": 68, "interior": 23,
                 "total": 315}
    dofs = D.enumerate_dofs(7)
    assert len(dofs) == 315
    per_dim = {0: 0, 1: 0, 2: 0, 3: 0}
    for d in dofs:
        per_dim[d.entity_dim] += 1
    assert per_dim == {0: 104, 1: 120, 2: 68, 3: 23}


@pytest.mark.parametrize("k", [7, 8, 9, 10])
def test_dof_counts_match_space_dimension(k):
    c = D.dof_counts(k)
    assert c["total"] == dim_Rk(k)
    assert len(D.enumerate_dofs(k)) == c["total"]


def test_enumerate_rejects_low_order():
    with pytest.raises(D.BadOrder):
        D.enumerate_dofs(6)


def test_vertex_curl_on_gradient_field(rng):
    q = Poly()
    for e in monomials(8):
        if rng.random() < 0.3:
            q.c[e] = QQ(int(rng.integers(-5, 6)))
    md = _prepare_member(grad(q))
    for dof in D.enumerate_dofs(7):
        if dof.kind in (D.VERTEX_CURL, D.EDGE_CURL_VALUE,
                        D.FACE_CURL_TANG, D.INTERIOR_CURL_MOMENT):
            assert apply_dof_exact(dof, md) == 0


def test_edge_moment_constant_field():
    const = VectorPoly([Poly.const(QQ(1)), Poly(), Poly()])
    md = _prepare_member(const)
    dof = next(d for d in D.enumerate_dofs(7)
               if d.kind == D.EDGE_TANG_MOMENT and d.entity == 0 and d.test == 0)
    # reference edge 0 runs along +x with unnormalized tangent (1,0,0)
    assert apply_dof_exact(dof, md) == 1


def test_interior_moment_exact_value():
    xhat = VectorPoly([Poly.variable(0), Poly.variable(1), Poly.variable(2)])
    md = _prepare_member(xhat)
    dof = next(d for d in D.enumerate_dofs(7)
               if d.kind == D.INTERIOR_U_MOMENT and d.test == 0)
    # integral of |x|^2 over the reference tetrahedron
    assert apply_dof_exact(dof, md) == QQ(1, 20)


def test_exclusion_divergence_identities(rng):
    """Excluded vertex derivatives equal minus their divergence partners."""
    for _ in range(20):
        comps = []
        for _c in range(3):
            p = Poly()
            for e in monomials(7):
                if rng.random() < 0.3:
                    p.c[e] = QQ(int(rng.integers(-7, 8)))
            comps.append(p)
        w = curl(VectorPoly(comps))
        jac = [[w.comps[c].diff(d) for d in range(3)] for c in range(3)]
        for v in range(4):
            vert = tuple(QQ(c) for c in
                         ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))[v])
            assert jac[2][2].eval(vert) == \
                -(jac[0][0].eval(vert) + jac[1][1].eval(vert))
            hxx = jac[0][0].diff(0).eval(vert)
            assert hxx == -(jac[1][1].diff(0).eval(vert)
                            + jac[2][2].diff(0).eval(vert))


def test_reference_duality_longdouble(ref):
    pb = PushedBasis(ref, REFERENCE_CONTEXT.amap, dtype=np.longdouble)
    A = apply_dofs(REFERENCE_CONTEXT, BasisField(pb), dtype=np.longdouble)
    resid = float(np.abs(A - np.eye(315, dtype=np.longdouble)).max())
    assert resid <= 1e-8


def test_reference_interpolation_identity(ref, rng):
    """DOF-weighted dual combination reproduces a random member of R_7."""
    members = build_Rk(7).members
    w = rng.normal(size=315)
    arr = np.zeros((3, 120))
    for i, m in enumerate(members):
        arr += w[i] * vector_poly_to_array(m, 7)
    from quadcurl.interpolate import PolyOracle
    from quadcurl.elements import OracleField
    vals = apply_dofs(REFERENCE_CONTEXT, OracleField(PolyOracle(arr, 7)),
                      dtype=np.longdouble)[:, 0]
    recon = np.einsum("j,jcm->cm", vals, ref.coeffs).astype(float)
    scale = np.abs(arr).max()
    assert np.abs(recon - arr).max() <= 1e-7 * scale


def test_artifact_roundtrip(ref, tmp_path):
    p = save_artifact(ref, tmp_path / "rb.npz")
    loaded = load_artifact(p)
    assert loaded.content_hash == ref.content_hash
    assert np.array_equal(loaded.coeffs, ref.coeffs)


def test_artifact_hash_guard(ref, tmp_path):
    p = save_artifact(ref, tmp_path / "rb.npz")
    data = dict(np.load(p, allow_pickle=False))
    data["coeffs"] = data["coeffs"] + 1e-3
    np.savez_compressed(p, **data)
    with pytest.raises(ValueError):
        load_artifact(p)


def test_dof_scales(ref):
    dofs = D.enumerate_dofs(7)
    for dof in dofs:
        s = dof_scale(dof)
        if dof.kind in (D.EDGE_CURL_DERIV, D.FACE_CURL_TANG):
            assert s > 0
        else:
            assert s == 1.0
