import numpy as np
import pytest
import sympy as sp

from quadcurl.elements import OracleField, apply_dofs, ElementContext
from quadcurl.interpolate import (DiscreteOracle, NegativeDifference,
                                  PolyOracle, SymbolicOracle, ZeroOracle,
                                  energy_norm, energy_norm_difference,
                                  error_norms, field_norms, interpolate)
from quadcurl.mesh import build_dof_map, cube_mesh
from quadcurl.polyspace import build_Rk, vector_poly_to_array, monomials


def random_r7_array(rng):
    members = build_Rk(7).members
    w = rng.normal(size=315)
    arr = np.zeros((3, 120))
    for i, m in enumerate(members):
        arr += w[i] * vector_poly_to_array(m, 7)
    return arr


def test_projection_property(ref, rng):
    mesh = cube_mesh(1)
    dm = build_dof_map(mesh)
    arr = random_r7_array(rng)
    oracle = PolyOracle(arr, 7)
    fh = interpolate(oracle, mesh, dm, ref)
    errs = error_norms(fh, oracle)
    scale = np.abs(arr).max()
    assert all(e <= 1e-6 * scale for e in errs)
    # idempotency at the coefficient level
    fh2 = interpolate(DiscreteOracle(fh, 1), mesh, dm, ref)
    cscale = np.abs(fh.coeffs).max()
    assert np.abs(fh2.coeffs - fh.coeffs).max() <= 1e-7 * cscale


def test_gradient_field_kills_curl_dofs(rng):
    """All curl-type DOFs vanish on a gradient field."""
    import quadcurl.dofs as D
    x, y, z = sp.symbols("x y z")
    q = sum(sp.Rational(int(rng.integers(-5, 6)), 3)
            * x ** a * y ** b * z ** c
            for (a, b, c) in monomials(8) if rng.random() < 0.3)
    oracle = SymbolicOracle([sp.diff(q, x), sp.diff(q, y), sp.diff(q, z)])
    ctx = ElementContext(cube_mesh(1).element_vertices(0))
    vals = apply_dofs(ctx, OracleField(oracle))[:, 0]
    curl_kinds = {D.VERTEX_CURL, D.VERTEX_CURL_GRAD, D.VERTEX_CURL_HESS,
                  D.EDGE_CURL_VALUE, D.EDGE_CURL_DERIV, D.FACE_CURL_TANG,
                  D.INTERIOR_CURL_MOMENT}
    scale = max(np.abs(vals).max(), 1.0)
    for i, dof in enumerate(D.enumerate_dofs(7)):
        if dof.kind in curl_kinds:
            assert abs(vals[i]) <= 1e-10 * scale


def test_error_norms_zero():
    mesh = cube_mesh(1)
    dm = build_dof_map(mesh)
    from quadcurl.reference import reference_basis
    from quadcurl.interpolate import DiscreteField
    fh = DiscreteField(mesh, dm, reference_basis())
    assert error_norms(fh, ZeroOracle()) == (0.0, 0.0, 0.0)


def test_error_norms_deterministic(ref, rng):
    mesh = cube_mesh(1)
    dm = build_dof_map(mesh)
    oracle = PolyOracle(random_r7_array(rng), 7)
    fh = interpolate(oracle, mesh, dm, ref)
    a = error_norms(fh, oracle)
    b = error_norms(fh, oracle)
    assert a == b


def test_energy_norm_difference():
    assert energy_norm_difference(1.0, 1.0) == 0.0
    assert energy_norm_difference(3.0, 5.0) == pytest.approx(4.0)
    with pytest.raises(NegativeDifference):
        energy_norm_difference(2.0, 1.0)


def test_discrete_oracle_locate(ref, rng):
    mesh = cube_mesh(2)
    dm = build_dof_map(mesh)
    oracle = PolyOracle(random_r7_array(rng) * 0.01, 7)
    fh = interpolate(oracle, mesh, dm, ref)
    do = DiscreteOracle(fh, 2)
    pts = rng.random((40, 3))
    assert np.abs(do.u(pts) - oracle.u(pts)).max() <= 1e-8


def test_oracle_sanity_check(ref):
    from quadcurl.interpolate import check_oracle

    class BadOracle:
        def curl_jac(self, x):
            n = len(np.atleast_2d(x))
            out = np.zeros((n, 3, 3))
            out[:, 0, 0] = 1.0  # nonzero divergence of the claimed curl
            return out

    with pytest.raises(ValueError):
        check_oracle(BadOracle(), cube_mesh(1))
