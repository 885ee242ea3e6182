"""Reference tetrahedron, affine element maps, and canonical entity frames.

Frames attached to edges and faces are functions of the entity's vertex
coordinates in sorted-vertex order only, so two elements sharing an entity
always see identical frames.  Each frame has an exact unnormalized rational
form (verify mode) and a normalized float form (solve mode); the two differ
by the positive norms of the direction vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exactla import QQ, to_float


class DegenerateElement(Exception):
    pass


# local entity numbering, fixed library-wide
REF_VERTICES = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))
EDGE_VERTICES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
FACE_VERTICES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
# local edges of each local face, with orientation sign of the p->q->r->p
# boundary loop relative to the sorted edge direction
FACE_EDGES = tuple(
    tuple((EDGE_VERTICES.index((f[a], f[b])), s)
          for a, b, s in ((0, 1, +1), (1, 2, +1), (0, 2, -1)))
    for f in FACE_VERTICES
)

TRIPARTITE = (QQ(1, 3), QQ(2, 3))


def _cross(u, v):
    return (u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0])


def _sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


@dataclass(frozen=True)
class EdgeFrame:
    """Edge frame in exact form: tangent and two normals, unnormalized.

    tau_r = q - p for endpoints p < q; n_r = tau_r x axis; m_r = tau_r x n_r.
    Unit float vectors and their norms are derived attributes.
    """
    tau_r: tuple
    n_r: tuple
    m_r: tuple

    @property
    def norms(self):
        return tuple(float(np.linalg.norm([to_float(c) for c in v]))
                     for v in (self.tau_r, self.n_r, self.m_r))

    @property
    def units(self):
        vs = []
        for v in (self.tau_r, self.n_r, self.m_r):
            a = np.array([to_float(c) for c in v])
            vs.append(a / np.linalg.norm(a))
        return np.stack(vs)  # rows tau, n, m


def canonical_edge_frame(p, q) -> EdgeFrame:
    """Frame for the edge from p to q (vertex-id order p < q).

    The auxiliary axis is the coordinate axis least aligned with the tangent,
    ties broken by axis index.
    """
    tau = _sub(q, p)
    t2 = _dot(tau, tau)
    if t2 == 0:
        raise DegenerateElement("zero-length edge")
    scores = [tau[i] * tau[i] for i in range(3)]
    axis = min(range(3), key=lambda i: (scores[i], i))
    e = [0, 0, 0]
    e[axis] = 1
    n = _cross(tau, tuple(e))
    m = _cross(tau, n)
    return EdgeFrame(tau, n, m)


@dataclass(frozen=True)
class FaceFrame:
    """Face frame from the sorted vertex triple (p, q, r).

    t1_r = q - p, nu_r = t1_r x (r - p), t2_r = nu_r x t1_r, all exact and
    unnormalized; the float property gives the orthonormal (t1, t2, nu).
    The radial-field center of the face moment test fields is p.
    """
    t1_r: tuple
    t2_r: tuple
    nu_r: tuple
    center: tuple

    @property
    def norms(self):
        return tuple(float(np.linalg.norm([to_float(c) for c in v]))
                     for v in (self.t1_r, self.t2_r, self.nu_r))

    @property
    def units(self):
        vs = []
        for v in (self.t1_r, self.t2_r, self.nu_r):
            a = np.array([to_float(c) for c in v])
            vs.append(a / np.linalg.norm(a))
        return np.stack(vs)  # rows t1, t2, nu

    @property
    def area(self):
        return 0.5 * float(np.linalg.norm([to_float(c) for c in self.nu_r]))


def canonical_face_frame(p, q, r) -> FaceFrame:
    t1 = _sub(q, p)
    nu = _cross(t1, _sub(r, p))
    if all(c == 0 for c in nu):
        raise DegenerateElement("degenerate face")
    t2 = _cross(nu, t1)
    return FaceFrame(t1, t2, nu, tuple(p))


@dataclass(frozen=True)
class AffineMap:
    """x = B xhat + b with det and inverse cached."""
    B: np.ndarray
    b: np.ndarray
    det: float
    Binv: np.ndarray

    def apply(self, xhat):
        return np.asarray(xhat) @ self.B.T + self.b

    def pull(self, x):
        return (np.asarray(x) - self.b) @ self.Binv.T


def affine_from_vertices(verts) -> AffineMap:
    v = np.asarray(verts, dtype=float)
    B = np.column_stack([v[1] - v[0], v[2] - v[0], v[3] - v[0]])
    det = float(np.linalg.det(B))
    hmax = max(np.linalg.norm(v[i] - v[j]) for i in range(4) for j in range(i))
    if abs(det) < 1e-14 * hmax ** 3:
        raise DegenerateElement(f"|det B| = {abs(det):.3e} too small")
    return AffineMap(B, v[0].copy(), det, np.linalg.inv(B))


def map_normal(amap: AffineMap, nhat):
    v = amap.Binv.T @ np.asarray(nhat, dtype=float)
    return v / np.linalg.norm(v)


def map_tangent(amap: AffineMap, that):
    v = amap.B @ np.asarray(that, dtype=float)
    return v / np.linalg.norm(v)


def piola_covariant(amap: AffineMap, uhat_eval):
    """Field x -> B^{-T} uhat(F^{-1} x) for a callable reference field."""
    def u(x):
        return np.asarray(uhat_eval(amap.pull(x))) @ amap.Binv
    return u
