"""Degree-of-freedom descriptors for the 315-DOF tetrahedral element.

The local ordering of the 315 functionals is fixed library-wide:
vertex curl values, vertex curl first derivatives, vertex curl second
derivatives, edge-midpoint curl values, edge tripartite directional
derivatives, face tangential curl moments, edge tangential moments, face
moments, interior moments, interior curl moments.  Entity-local orderings
inside each class are deterministic and shared by every element touching the
entity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .exactla import QQ
from .polyspace import Poly, dim_P, monomials

# kinds
VERTEX_CURL = "VertexCurl"
VERTEX_CURL_GRAD = "VertexCurlGrad"
VERTEX_CURL_HESS = "VertexCurlHess"
EDGE_CURL_VALUE = "EdgeCurlValue"
EDGE_CURL_DERIV = "EdgeCurlDirDeriv"
FACE_CURL_TANG = "FaceCurlTangMoment"
FACE_CURL_NORM = "FaceCurlNormMoment"
EDGE_TANG_MOMENT = "EdgeTangMoment"
FACE_U_MOMENT = "FaceUMoment"
INTERIOR_U_MOMENT = "InteriorUMoment"
INTERIOR_CURL_MOMENT = "InteriorCurlMoment"

# allowed first derivatives per curl component: missing (comp 2, d/dz)
GRAD_DERIVS = ((0, 1, 2), (0, 1, 2), (0, 1))
# second-derivative multi-index frame, paper order xx,yy,zz,xz,xy,yz
SIG_ORDER = ((0, 0), (1, 1), (2, 2), (0, 2), (0, 1), (1, 2))
# allowed second derivatives per component: missing xx / yy / zz respectively
HESS_SIGS = (
    ((1, 1), (2, 2), (0, 2), (0, 1), (1, 2)),
    ((0, 0), (2, 2), (0, 2), (0, 1), (1, 2)),
    ((0, 0), (1, 1), (0, 2), (0, 1), (1, 2)),
)
# tripartite derivative pairs (a, b): d(curl.a)/db with frame 0=tau, 1=n, 2=m
DERIV_PAIRS = ((0, 1), (1, 1), (2, 1), (0, 2), (1, 2))
# full pair list used by the expanded functional set of the transform
DERIV_PAIRS_FULL = tuple((a, b) for b in range(3) for a in range(3))


class BadOrder(Exception):
    pass


@dataclass(frozen=True)
class DofDescriptor:
    kind: str
    entity_dim: int          # 0 vertex, 1 edge, 2 face, 3 cell
    entity: int              # local entity index
    comp: int = -1           # curl component for pointwise kinds
    deriv: tuple = ()        # derivative multi-index (first or second order)
    node: int = -1           # node index on the entity
    pair: tuple = ()         # (a_idx, b_idx) frame pair for edge derivatives
    test: int = -1           # test-function index for moment kinds


def edge_nodes_e0(k):
    """Interior nodes of the uniform (k-5)-subdivision; k-6 points."""
    return tuple(QQ(i, k - 5) for i in range(1, k - 5))


def edge_nodes_e1(k):
    """Interior nodes of the uniform (k-4)-subdivision; k-5 points."""
    return tuple(QQ(i, k - 4) for i in range(1, k - 4))


def face_scalar_monomials(k):
    """Graded-lex exponents of the 2-D scalar multipliers P_{k-3}."""
    return monomials(k - 3, nvars=2)


@lru_cache(maxsize=None)
def shifted_legendre(n):
    """Coefficient list (ascending powers of t) of P_n(2t - 1), exact."""
    if n == 0:
        return (QQ(1),)
    if n == 1:
        return (QQ(-1), QQ(2))
    pm2, pm1 = shifted_legendre(n - 2), shifted_legendre(n - 1)
    x = [QQ(0), QQ(-1 * (2 * n - 1), n), QQ(2 * (2 * n - 1), n)]  # (2n-1)/n*(2t-1)
    out = [QQ(0)] * (n + 1)
    for i, c in enumerate(pm1):
        out[i] += x[1] * c
        out[i + 1] += x[2] * c
    for i, c in enumerate(pm2):
        out[i] -= QQ(n - 1, n) * c
    return tuple(out)


def legendre_poly_1v(n):
    return Poly({(i,): c for i, c in enumerate(shifted_legendre(n)) if c != 0},
                nvars=1)


def dof_counts(k):
    """Per-entity-class DOF counts (vertex, edge, face, interior)."""
    if k < 7:
        raise BadOrder(f"element requires k >= 7, got {k}")
    vertex = 26 * 4
    edge = 6 * k + 18 * (k - 6) + 30 * (k - 5)
    face = 2 * (k - 2) * (k - 1) + 6 * (k - 6) * (k - 5) - 4
    interior = ((k - 3) * (k - 2) * (k - 1) // 6
                + (k - 5) * (k - 4) * (k - 3) // 2
                - (k - 4) * (k - 3) * (k - 2) // 6 + 1)
    return {"vertex": vertex, "edge": edge, "face": face,
            "interior": interior, "total": vertex + edge + face + interior}


def dim_x_cross_P(m):
    """dim(x cross P_m^3) = dim P_{m+1}^3 - dim P_{m+2} + 1."""
    if m < 0:
        return 0
    return 3 * dim_P(m + 1) - dim_P(m + 2) + 1


@lru_cache(maxsize=None)
def enumerate_dofs(k=7):
    """All local DOF descriptors in the canonical library-wide order."""
    if k < 7:
        raise BadOrder(f"element requires k >= 7, got {k}")
    dofs = []
    for v in range(4):
        for comp in range(3):
            dofs.append(DofDescriptor(VERTEX_CURL, 0, v, comp=comp))
    for v in range(4):
        for comp in range(3):
            for d in GRAD_DERIVS[comp]:
                dofs.append(DofDescriptor(VERTEX_CURL_GRAD, 0, v, comp=comp,
                                          deriv=(d,)))
    for v in range(4):
        for comp in range(3):
            for sig in HESS_SIGS[comp]:
                dofs.append(DofDescriptor(VERTEX_CURL_HESS, 0, v, comp=comp,
                                          deriv=sig))
    for e in range(6):
        for j in range(k - 6):
            for comp in range(3):
                dofs.append(DofDescriptor(EDGE_CURL_VALUE, 1, e, comp=comp,
                                          node=j))
    for e in range(6):
        for j in range(k - 5):
            for pair in DERIV_PAIRS:
                dofs.append(DofDescriptor(EDGE_CURL_DERIV, 1, e, node=j,
                                          pair=pair))
    nf = dim_P(k - 7, nvars=2)
    for f in range(4):
        for t in range(2):
            for q in range(nf):
                dofs.append(DofDescriptor(FACE_CURL_TANG, 2, f, comp=t, test=q))
        for q in range(1, nf):
            dofs.append(DofDescriptor(FACE_CURL_NORM, 2, f, test=q))
    for e in range(6):
        for i in range(k):
            dofs.append(DofDescriptor(EDGE_TANG_MOMENT, 1, e, test=i))
    for f in range(4):
        for i in range(dim_P(k - 3, nvars=2)):
            dofs.append(DofDescriptor(FACE_U_MOMENT, 2, f, test=i))
    for i in range(dim_P(k - 4)):
        dofs.append(DofDescriptor(INTERIOR_U_MOMENT, 3, 0, test=i))
    for i in range(dim_x_cross_P(k - 7)):
        dofs.append(DofDescriptor(INTERIOR_CURL_MOMENT, 3, 0, test=i))

    counts = dof_counts(k)
    assert len(dofs) == counts["total"], (len(dofs), counts)
    return tuple(dofs)


# per-entity DOF layout used by the global numbering (k = 7)
VERTEX_BLOCK = 26   # 3 curl + 8 grad + 15 hess
EDGE_BLOCK = 20     # 3 midpoint + 10 tripartite + 7 moments
FACE_BLOCK = 17     # 2 curl moments + 15 moments
CELL_BLOCK = 23     # 20 moments + 3 curl moments


def local_entity_slot(dof: DofDescriptor, k=7):
    """(entity_dim, local_entity, slot) with slot the entity-block offset."""
    kind = dof.kind
    if kind == VERTEX_CURL:
        return 0, dof.entity, dof.comp
    if kind == VERTEX_CURL_GRAD:
        off = sum(len(GRAD_DERIVS[c]) for c in range(dof.comp))
        return 0, dof.entity, 3 + off + GRAD_DERIVS[dof.comp].index(dof.deriv[0])
    if kind == VERTEX_CURL_HESS:
        off = sum(len(HESS_SIGS[c]) for c in range(dof.comp))
        return 0, dof.entity, 11 + off + HESS_SIGS[dof.comp].index(dof.deriv)
    if kind == EDGE_CURL_VALUE:
        return 1, dof.entity, 3 * dof.node + dof.comp
    if kind == EDGE_CURL_DERIV:
        return 1, dof.entity, 3 + 5 * dof.node + DERIV_PAIRS.index(dof.pair)
    if kind == EDGE_TANG_MOMENT:
        return 1, dof.entity, 13 + dof.test
    if kind == FACE_CURL_TANG:
        return 2, dof.entity, dof.comp
    if kind == FACE_U_MOMENT:
        return 2, dof.entity, 2 + dof.test
    if kind == INTERIOR_U_MOMENT:
        return 3, 0, dof.test
    if kind == INTERIOR_CURL_MOMENT:
        return 3, 0, 20 + dof.test
    raise ValueError(f"unexpected dof kind {kind} at k={k}")
