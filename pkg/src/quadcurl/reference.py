"""Reference dual basis: exact Vandermonde, unisolvence certificate, artifact.

The 315x315 generalized Vandermonde on the reference tetrahedron is severely
ill-conditioned, so it is assembled and inverted in exact rational
arithmetic.  Frames and test fields in this exact path use unnormalized
rational direction vectors; each functional then equals a positive scalar
times its normalized (solve-mode) counterpart, and the dual basis is mapped
to the normalized convention by one exact diagonal rescale before the single
rational-to-float conversion.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import dofs as D
from .exactla import QQ, det_and_inverse
from .geometry import (EDGE_VERTICES, FACE_VERTICES, REF_VERTICES, TRIPARTITE,
                       canonical_edge_frame, canonical_face_frame)
from .polyspace import (Poly, VectorPoly, build_Rk, curl, monomial_index,
                        monomials)
from .quadrature import exact_monomial_integral

ARTIFACT_VERSION = "quadcurl-refbasis-1"
_ARTIFACT_NAME = "reference_basis_k7.npz"


class SingularVandermonde(Exception):
    """The reference Vandermonde came out singular: fatal implementation bug."""


# ---------------------------------------------------------------------------
# exact reference geometry

@lru_cache(maxsize=None)
def _ref_exact():
    verts = tuple(tuple(QQ(c) for c in v) for v in REF_VERTICES)
    edges = []
    for p, q in EDGE_VERTICES:
        edges.append(canonical_edge_frame(verts[p], verts[q]))
    faces = [canonical_face_frame(verts[p], verts[q], verts[r])
             for p, q, r in FACE_VERTICES]
    return verts, tuple(edges), tuple(faces)


@lru_cache(maxsize=None)
def _mono_on_edge(edge, expo):
    """x^expo composed with the [0,1] parameterization of a reference edge."""
    verts, _, _ = _ref_exact()
    p = verts[EDGE_VERTICES[edge][0]]
    q = verts[EDGE_VERTICES[edge][1]]
    d = tuple(b - a for a, b in zip(p, q))
    return Poly({expo: QQ(1)}).compose_affine(p, [d])


@lru_cache(maxsize=None)
def _mono_on_face(face, expo):
    """x^expo composed with the sorted chart of a reference face."""
    verts, _, _ = _ref_exact()
    p, q, r = (verts[i] for i in FACE_VERTICES[face])
    d1 = tuple(b - a for a, b in zip(p, q))
    d2 = tuple(b - a for a, b in zip(p, r))
    return Poly({expo: QQ(1)}).compose_affine(p, [d1, d2])


def _poly_on_edge(poly, edge):
    out = Poly(nvars=1)
    for e, v in poly.c.items():
        out = out + _mono_on_edge(edge, e) * v
    return out


def _poly_on_face(poly, face):
    out = Poly(nvars=2)
    for e, v in poly.c.items():
        out = out + _mono_on_face(face, e) * v
    return out


def _integrate_1d(poly):
    return sum(v * QQ(1, e[0] + 1) for e, v in poly.c.items())


def _integrate_tri(poly):
    return sum(v * exact_monomial_integral("triangle", e)
               for e, v in poly.c.items())


def _integrate_tet(poly):
    return sum(v * exact_monomial_integral("tet", e)
               for e, v in poly.c.items())


def _edge_point(edge, t):
    verts, _, _ = _ref_exact()
    p = verts[EDGE_VERTICES[edge][0]]
    q = verts[EDGE_VERTICES[edge][1]]
    return tuple(a + t * (b - a) for a, b in zip(p, q))


_X_CROSS_E = (
    VectorPoly([Poly(), Poly.variable(2), Poly.variable(1) * QQ(-1)]),
    VectorPoly([Poly.variable(2) * QQ(-1), Poly(), Poly.variable(0)]),
    VectorPoly([Poly.variable(1), Poly.variable(0) * QQ(-1), Poly()]),
)


@dataclass
class _MemberData:
    vp: VectorPoly
    cu: VectorPoly
    jac: list      # jac[c][d] = d(curl_c)/dx_d
    hess: dict     # hess[(c, (d1, d2))] with d1 <= d2


def _prepare_member(vp):
    cu = curl(vp)
    jac = [[cu.comps[c].diff(d) for d in range(3)] for c in range(3)]
    hess = {}
    for c in range(3):
        for d1, d2 in D.SIG_ORDER:
            hess[(c, (d1, d2))] = jac[c][d1].diff(d2)
    return _MemberData(vp, cu, jac, hess)


def apply_dof_exact(dof: D.DofDescriptor, md: _MemberData):
    """Exact value of a (scaled) reference functional on a polynomial field."""
    verts, eframes, fframes = _ref_exact()
    kind = dof.kind
    if kind == D.VERTEX_CURL:
        return md.cu.comps[dof.comp].eval(verts[dof.entity])
    if kind == D.VERTEX_CURL_GRAD:
        return md.jac[dof.comp][dof.deriv[0]].eval(verts[dof.entity])
    if kind == D.VERTEX_CURL_HESS:
        return md.hess[(dof.comp, dof.deriv)].eval(verts[dof.entity])
    if kind == D.EDGE_CURL_VALUE:
        pt = _edge_point(dof.entity, QQ(dof.node + 1, 2))
        return md.cu.comps[dof.comp].eval(pt)
    if kind == D.EDGE_CURL_DERIV:
        fr = eframes[dof.entity]
        a = (fr.tau_r, fr.n_r, fr.m_r)[dof.pair[0]]
        b = (fr.tau_r, fr.n_r, fr.m_r)[dof.pair[1]]
        pt = _edge_point(dof.entity, TRIPARTITE[dof.node])
        total = QQ(0)
        for c in range(3):
            if a[c] == 0:
                continue
            for d in range(3):
                if b[d] == 0:
                    continue
                total += a[c] * b[d] * md.jac[c][d].eval(pt)
        return total
    if kind == D.FACE_CURL_TANG:
        fr = fframes[dof.entity]
        t = (fr.t1_r, fr.t2_r)[dof.comp]
        acc = Poly(nvars=2)
        for c in range(3):
            if t[c] != 0:
                acc = acc + _poly_on_face(md.cu.comps[c], dof.entity) * t[c]
        return 2 * _integrate_tri(acc)
    if kind == D.EDGE_TANG_MOMENT:
        fr = eframes[dof.entity]
        acc = Poly(nvars=1)
        for c in range(3):
            if fr.tau_r[c] != 0:
                acc = acc + _poly_on_edge(md.vp.comps[c], dof.entity) * fr.tau_r[c]
        return _integrate_1d(acc * D.legendre_poly_1v(dof.test))
    if kind == D.FACE_U_MOMENT:
        verts3 = [verts[i] for i in FACE_VERTICES[dof.entity]]
        d1 = tuple(b - a for a, b in zip(verts3[0], verts3[1]))
        d2 = tuple(b - a for a, b in zip(verts3[0], verts3[2]))
        s, t = Poly.variable(0, nvars=2), Poly.variable(1, nvars=2)
        acc = Poly(nvars=2)
        for c in range(3):
            radial_c = s * d1[c] + t * d2[c]
            acc = acc + _poly_on_face(md.vp.comps[c], dof.entity) * radial_c
        a, b = D.face_scalar_monomials(7)[dof.test]
        mono = Poly({(a, b): QQ(1)}, nvars=2)
        return 2 * _integrate_tri(acc * mono)
    if kind == D.INTERIOR_U_MOMENT:
        expo = monomials(3)[dof.test]
        mono = Poly({expo: QQ(1)})
        x = [Poly.variable(i) for i in range(3)]
        acc = Poly()
        for c in range(3):
            acc = acc + md.vp.comps[c] * x[c]
        return _integrate_tet(acc * mono)
    if kind == D.INTERIOR_CURL_MOMENT:
        q = _X_CROSS_E[dof.test]
        acc = Poly()
        for c in range(3):
            acc = acc + md.cu.comps[c] * q.comps[c]
        return _integrate_tet(acc)
    raise ValueError(f"unsupported dof kind {kind}")


def dof_scale(dof: D.DofDescriptor):
    """Positive factor: exact (unnormalized) functional / normalized one."""
    _, eframes, fframes = _ref_exact()
    if dof.kind == D.EDGE_CURL_DERIV:
        fr = eframes[dof.entity]
        na, nn, nm = fr.norms
        norms = (na, nn, nm)
        return norms[dof.pair[0]] * norms[dof.pair[1]]
    if dof.kind == D.FACE_CURL_TANG:
        fr = fframes[dof.entity]
        return fr.norms[dof.comp]
    return 1.0


def build_vandermonde_exact(members):
    dof_list = D.enumerate_dofs(7)
    mds = [_prepare_member(vp) for vp in members]
    rows = []
    for dof in dof_list:
        rows.append([apply_dof_exact(dof, md) for md in mds])
    return rows


# ---------------------------------------------------------------------------
# float reference basis

@lru_cache(maxsize=None)
def _diff_matrix(k, var):
    src = monomials(k)
    dst_index = monomial_index(k - 1)
    out = np.zeros((len(src), len(dst_index)))
    for i, e in enumerate(src):
        if e[var] == 0:
            continue
        e2 = list(e)
        e2[var] -= 1
        out[i, dst_index[tuple(e2)]] = e[var]
    return out


class ReferenceBasis:
    """Float dual basis on the reference tetrahedron plus derivative tables.

    coeffs[j, c, m] holds the coefficient of graded-lex monomial m in
    component c of the j-th dual function.
    """

    def __init__(self, coeffs, det_sign, det_log10, content_hash):
        self.k = 7
        self.coeffs = coeffs
        self.det_sign = det_sign
        self.det_log10 = det_log10
        self.content_hash = content_hash
        self.dofs = D.enumerate_dofs(7)
        dx, dy, dz = (_diff_matrix(7, v) for v in range(3))
        c = coeffs
        self.curl = np.stack([
            c[:, 2] @ dy - c[:, 1] @ dz,
            c[:, 0] @ dz - c[:, 2] @ dx,
            c[:, 1] @ dx - c[:, 0] @ dy,
        ], axis=1)  # [315, 3, M6]
        d6 = [_diff_matrix(6, v) for v in range(3)]
        self.curl_jac = np.stack(
            [np.stack([self.curl[:, c] @ d6[d] for d in range(3)], axis=1)
             for c in range(3)], axis=1)  # [315, 3(comp), 3(deriv), M5]
        d5 = [_diff_matrix(5, v) for v in range(3)]
        self.curl_hess = np.stack(
            [np.stack([np.stack([self.curl_jac[:, c, d] @ d5[e]
                                 for e in range(3)], axis=1)
                       for d in range(3)], axis=1)
             for c in range(3)], axis=1)  # [315, 3, 3, 3, M4]

    @property
    def n(self):
        return self.coeffs.shape[0]

    def tables(self, dtype):
        """Shared dtype-cast coefficient tables (one copy per dtype)."""
        key = np.dtype(dtype).name
        cache = getattr(self, "_tables", None)
        if cache is None:
            cache = self._tables = {}
        if key not in cache:
            cache[key] = tuple(a.astype(dtype) for a in
                               (self.coeffs, self.curl, self.curl_jac,
                                self.curl_hess))
        return cache[key]


def rational_to_longdouble(x):
    q = QQ(x)
    return np.longdouble(int(q.numerator)) / np.longdouble(int(q.denominator))


def _float_coeff_arrays(members, Cexact, scales):
    """Exact accumulation of dual coefficients, one float conversion.

    The conversion target is extended precision: the dual coefficients reach
    ~1e10 with heavy cancellation, and double rounding here would spoil the
    1e-8 duality budget downstream.
    """
    idx = monomial_index(7)
    n = len(members)
    coeffs = np.zeros((n, 3, len(idx)), dtype=np.longdouble)
    for j in range(n):
        acc = [dict(), dict(), dict()]
        for p in range(n):
            w = Cexact[p][j]
            if w == 0:
                continue
            for c, poly in enumerate(members[p].comps):
                bucket = acc[c]
                for e, v in poly.c.items():
                    bucket[e] = bucket.get(e, QQ(0)) + w * v
        s = np.longdouble(scales[j])
        for c in range(3):
            for e, v in acc[c].items():
                coeffs[j, c, idx[e]] = rational_to_longdouble(v) * s
    return coeffs


def compute_reference_basis(return_exact=False):
    """Assemble and exactly invert the reference Vandermonde.

    Returns the float ReferenceBasis; with return_exact=True also the exact
    (V, det, C, members, scales) tuple for certification tests.
    """
    space = build_Rk(7)
    members = space.members
    V = build_vandermonde_exact(members)
    det, C = det_and_inverse(V)
    if det == 0 or C is None:
        raise SingularVandermonde("reference Vandermonde is singular")
    scales = [dof_scale(dof) for dof in D.enumerate_dofs(7)]
    coeffs = _float_coeff_arrays(members, C, scales)
    det_sign = 1.0 if det > 0 else -1.0
    num, den = abs(QQ(det).numerator), QQ(det).denominator
    det_log10 = (len(str(num)) - len(str(den))) * 1.0
    content_hash = hashlib.sha256(coeffs.tobytes()).hexdigest()
    basis = ReferenceBasis(coeffs, det_sign, det_log10, content_hash)
    if return_exact:
        return basis, (V, det, C, members, scales)
    return basis


def _artifact_path() -> Path:
    return Path(resources.files("quadcurl") / "data" / _ARTIFACT_NAME)


def save_artifact(basis: ReferenceBasis, path=None):
    path = Path(path) if path else _artifact_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        path, coeffs=basis.coeffs,
        det_sign=np.array([basis.det_sign]),
        det_log10=np.array([basis.det_log10]),
        version=np.array([ARTIFACT_VERSION]),
        content_hash=np.array([basis.content_hash]))
    return path


def load_artifact(path=None) -> ReferenceBasis:
    path = Path(path) if path else _artifact_path()
    with np.load(path, allow_pickle=False) as z:
        version = str(z["version"][0])
        if version != ARTIFACT_VERSION:
            raise ValueError(f"artifact version {version!r} != {ARTIFACT_VERSION!r}")
        coeffs = z["coeffs"]
        stored = str(z["content_hash"][0])
        actual = hashlib.sha256(coeffs.tobytes()).hexdigest()
        if stored != actual:
            raise ValueError("reference-basis artifact hash mismatch")
        return ReferenceBasis(coeffs, float(z["det_sign"][0]),
                              float(z["det_log10"][0]), stored)


_CACHED = None


def reference_basis(rebuild=False) -> ReferenceBasis:
    """Load the serialized reference basis, computing it if missing."""
    global _CACHED
    if _CACHED is not None and not rebuild:
        return _CACHED
    if not rebuild:
        try:
            _CACHED = load_artifact()
            return _CACHED
        except (FileNotFoundError, ValueError):
            pass
    _CACHED = compute_reference_basis()
    try:
        save_artifact(_CACHED)
    except OSError:
        pass
    return _CACHED
