"""Structured tetrahedral meshes and the global DOF numbering.

Meshes store each tetrahedron as an ascending 4-tuple of global vertex ids.
Every local entity of an element is then automatically in canonical (sorted)
order, so entity frames, edge parameterizations, and face charts computed
from local data coincide with the global ones shared between neighbors.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import dofs as D
from .dofs import CELL_BLOCK, EDGE_BLOCK, FACE_BLOCK, VERTEX_BLOCK
from .geometry import EDGE_VERTICES, FACE_VERTICES


class OddSubdivision(Exception):
    pass


# the six axis permutations of the unit-cube subdivision along the main
# diagonal; vertex paths are ascending in the grid numbering
_KUHN_PERMS = tuple(itertools.permutations((0, 1, 2)))


class MeshComplex:
    def __init__(self, vertices, tets):
        self.vertices = np.asarray(vertices, dtype=float)
        self.tets = np.asarray(tets, dtype=np.int64)
        assert np.all(np.diff(self.tets, axis=1) > 0), "tets must be ascending"
        self._build_entities()

    def _build_entities(self):
        edge_ids = {}
        face_ids = {}
        self.tet_edges = np.empty((len(self.tets), 6), dtype=np.int64)
        self.tet_faces = np.empty((len(self.tets), 4), dtype=np.int64)
        face_tets = []
        for t, tet in enumerate(self.tets):
            for j, (a, b) in enumerate(EDGE_VERTICES):
                key = (tet[a], tet[b])
                self.tet_edges[t, j] = edge_ids.setdefault(key, len(edge_ids))
            for j, (a, b, c) in enumerate(FACE_VERTICES):
                key = (tet[a], tet[b], tet[c])
                fid = face_ids.setdefault(key, len(face_ids))
                self.tet_faces[t, j] = fid
                if fid == len(face_tets):
                    face_tets.append([])
                face_tets[fid].append((t, j))
        self.edges = np.array(sorted(edge_ids, key=edge_ids.get), dtype=np.int64)
        self.faces = np.array(sorted(face_ids, key=face_ids.get), dtype=np.int64)
        self.face_tets = face_tets
        counts = np.array([len(ft) for ft in face_tets])
        assert np.all((counts == 1) | (counts == 2))
        self.boundary_faces = np.nonzero(counts == 1)[0]
        bface_set = set(self.boundary_faces.tolist())
        bvert = set()
        bedge = set()
        edge_id_of = {tuple(e): i for i, e in enumerate(self.edges)}
        for f in self.boundary_faces:
            p, q, r = self.faces[f]
            bvert.update((p, q, r))
            for a, b in ((p, q), (q, r), (p, r)):
                bedge.add(edge_id_of[(a, b)])
        self.boundary_vertices = np.array(sorted(bvert), dtype=np.int64)
        self.boundary_edges = np.array(sorted(bedge), dtype=np.int64)
        self.boundary_face_set = bface_set

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_tets(self):
        return len(self.tets)

    def euler_characteristic(self):
        return (self.n_vertices - self.n_edges + self.n_faces - self.n_tets)

    def element_vertices(self, t):
        return self.vertices[self.tets[t]]

    def interior_faces(self):
        return [f for f in range(self.n_faces) if len(self.face_tets[f]) == 2]

    def dump(self, path):
        """Plain-text dump: 'tetmesh v1 <nv> <nt>', vertices, then tets."""
        with open(path, "w") as fh:
            fh.write(f"tetmesh v1 {self.n_vertices} {self.n_tets}\n")
            for v in self.vertices:
                fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for t in self.tets:
                fh.write(f"{t[0]} {t[1]} {t[2]} {t[3]}\n")


def _cube_cells(N, keep=None):
    nv = N + 1

    def vid(i, j, k):
        return i + nv * j + nv * nv * k

    used = np.zeros(nv ** 3, dtype=bool)
    tets = []
    for k in range(N):
        for j in range(N):
            for i in range(N):
                if keep is not None and not keep(i, j, k):
                    continue
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    path = [base.copy()]
                    for axis in reversed(perm):
                        nxt = path[-1].copy()
                        nxt[axis] += 1
                        path.append(nxt)
                    ids = sorted(vid(*p) for p in path)
                    tets.append(ids)
                    used[ids] = True
    remap = -np.ones(nv ** 3, dtype=np.int64)
    remap[used] = np.arange(used.sum())
    coords = np.empty((nv ** 3, 3))
    for k in range(nv):
        for j in range(nv):
            for i in range(nv):
                coords[vid(i, j, k)] = (i / N, j / N, k / N)
    vertices = coords[used]
    tets = remap[np.array(tets, dtype=np.int64)]
    return MeshComplex(vertices, tets)


def cube_mesh(N) -> MeshComplex:
    """Unit cube split into N^3 subcubes of 6 congruent tetrahedra each."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return _cube_cells(N)


def lshape_mesh(N) -> MeshComplex:
    """L-shaped domain: unit cube minus the quarter x > 1/2, y < 1/2.

    N must be even so the reentrant edge lies on mesh planes.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N % 2 == 1:
        raise OddSubdivision(f"L-shape mesh needs even N, got {N}")

    def keep(i, j, k):
        cx = (i + 0.5) / N
        cy = (j + 0.5) / N
        return not (cx > 0.5 and cy < 0.5)

    return _cube_cells(N, keep=keep)


def two_tet_mesh() -> MeshComplex:
    """Reference tetrahedron glued to a second one across its oblique face."""
    verts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]
    return MeshComplex(np.array(verts, dtype=float),
                       np.array([[0, 1, 2, 3], [1, 2, 3, 4]]))


def _plane_key(normal):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    for c in n:
        if abs(c) > 1e-12:
            if c < 0:
                n = -n
            break
    return tuple(np.round(n, 12))


def _tangent_basis(normal):
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    a = np.eye(3)[int(np.argmin(np.abs(n)))]
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def _nullspace_basis(rows, ncols, tol=1e-9):
    if not rows:
        return np.eye(ncols)
    A = np.array(rows, dtype=float)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    rank = int((s > tol * max(s[0], 1.0)).sum())
    return vt[rank:]


def _free_jacobians(normals):
    """Basis of curl Jacobians allowed at a point of the given planes.

    Constraints: in-plane directional derivatives of the (vanishing) curl are
    zero, and the Jacobian is trace-free.
    """
    rows = []
    for nrm in normals:
        for t in _tangent_basis(nrm):
            for c in range(3):
                row = np.zeros(9)
                row[3 * c:3 * c + 3] = t
                rows.append(row)
    trace = np.zeros(9)
    trace[[0, 4, 8]] = 1.0
    rows.append(trace)
    return _nullspace_basis(rows, 9).reshape(-1, 3, 3)


_SYM6 = D.SIG_ORDER


def _free_hessians(normals):
    """Basis of curl component Hessian triples allowed at a vertex.

    Variables: 3 components x 6 symmetric second derivatives.  Constraints:
    in-plane/in-plane second derivatives vanish per component, and the three
    differentiated divergence-free relations hold.
    """
    def col(c, d1, d2):
        sig = (min(d1, d2), max(d1, d2))
        return 6 * c + _SYM6.index(sig)

    rows = []
    for nrm in normals:
        t1, t2 = _tangent_basis(nrm)
        for c in range(3):
            for u, v in ((t1, t1), (t2, t2), (t1, t2)):
                row = np.zeros(18)
                for d1 in range(3):
                    for d2 in range(3):
                        row[col(c, d1, d2)] += u[d1] * v[d2]
                rows.append(row)
    for dvar in range(3):
        row = np.zeros(18)
        for c in range(3):
            row[col(c, dvar, c)] += 1.0
        rows.append(row)
    return _nullspace_basis(rows, 18).reshape(-1, 3, 6)


class DofMap:
    """Global DOF numbering: vertex block, edge block, face block, cell block.

    Within each entity the DOFs follow the canonical entity-local ordering,
    so two elements sharing an entity gather identical global indices.

    bc_mode selects the boundary DOF set: "minimal" zeroes exactly the DOFs
    forced by the essential conditions u x n = 0 and curl u = 0 on the
    boundary (derivative DOFs in directions leaving the boundary planes stay
    free); "all" zeroes every DOF attached to a boundary entity, which
    over-constrains the space.
    """

    def __init__(self, mesh: MeshComplex, k=7, bc_mode="minimal"):
        if k != 7:
            raise D.BadOrder("runtime DOF maps are fixed at k = 7")
        if bc_mode not in ("minimal", "all"):
            raise ValueError(f"unknown bc_mode {bc_mode!r}")
        self.mesh = mesh
        self.k = k
        self.bc_mode = bc_mode
        nv, ne, nf, nt = (mesh.n_vertices, mesh.n_edges, mesh.n_faces,
                          mesh.n_tets)
        self.vertex_offset = 0
        self.edge_offset = nv * VERTEX_BLOCK
        self.face_offset = self.edge_offset + ne * EDGE_BLOCK
        self.cell_offset = self.face_offset + nf * FACE_BLOCK
        self.n_dofs = self.cell_offset + nt * CELL_BLOCK
        self._gather = np.empty((nt, 315), dtype=np.int64)
        dofs = D.enumerate_dofs(7)
        slots = [D.local_entity_slot(d) for d in dofs]
        for t in range(nt):
            tet = mesh.tets[t]
            for i, (dim, ent, slot) in enumerate(slots):
                if dim == 0:
                    g = self.vertex_offset + VERTEX_BLOCK * tet[ent] + slot
                elif dim == 1:
                    g = self.edge_offset + EDGE_BLOCK * mesh.tet_edges[t, ent] + slot
                elif dim == 2:
                    g = self.face_offset + FACE_BLOCK * mesh.tet_faces[t, ent] + slot
                else:
                    g = self.cell_offset + CELL_BLOCK * t + slot
                self._gather[t, i] = g
        for t in range(nt):
            assert len(set(self._gather[t])) == 315
        self.boundary_dofs = self._boundary_set()

    def gather(self, t):
        return self._gather[t]

    def _entity_planes(self):
        """Distinct boundary plane normals through every boundary vertex/edge."""
        mesh = self.mesh
        vplanes = {int(v): {} for v in mesh.boundary_vertices}
        edge_id_of = {tuple(e): i for i, e in enumerate(mesh.edges)}
        eplanes = {int(e): {} for e in mesh.boundary_edges}
        for f in mesh.boundary_faces:
            p, q, r = mesh.faces[f]
            vv = mesh.vertices[[p, q, r]]
            nrm = np.cross(vv[1] - vv[0], vv[2] - vv[0])
            key = _plane_key(nrm)
            for v in (p, q, r):
                vplanes[int(v)][key] = nrm
            for a, b in ((p, q), (q, r), (p, r)):
                eplanes[edge_id_of[(int(a), int(b))]][key] = nrm
        return vplanes, eplanes

    def _boundary_set(self):
        idx = []
        for f in self.mesh.boundary_faces:
            idx.extend(range(self.face_offset + FACE_BLOCK * f,
                             self.face_offset + FACE_BLOCK * (f + 1)))
        if self.bc_mode == "all":
            for v in self.mesh.boundary_vertices:
                idx.extend(range(self.vertex_offset + VERTEX_BLOCK * v,
                                 self.vertex_offset + VERTEX_BLOCK * (v + 1)))
            for e in self.mesh.boundary_edges:
                idx.extend(range(self.edge_offset + EDGE_BLOCK * e,
                                 self.edge_offset + EDGE_BLOCK * (e + 1)))
            return np.array(sorted(idx), dtype=np.int64)

        vplanes, eplanes = self._entity_planes()
        from .geometry import canonical_edge_frame  # local import, no cycle

        for v in self.mesh.boundary_vertices:
            base = self.vertex_offset + VERTEX_BLOCK * int(v)
            idx.extend(range(base, base + 3))  # curl values
            normals = list(vplanes[int(v)].values())
            freeJ = _free_jacobians(normals)
            slot = 3
            for comp in range(3):
                for dvar in D.GRAD_DERIVS[comp]:
                    if np.abs(freeJ[:, comp, dvar]).max(initial=0.0) < 1e-9:
                        idx.append(base + slot)
                    slot += 1
            freeH = _free_hessians(normals)
            for comp in range(3):
                for sig in D.HESS_SIGS[comp]:
                    si = _SYM6.index(sig)
                    if np.abs(freeH[:, comp, si]).max(initial=0.0) < 1e-9:
                        idx.append(base + slot)
                    slot += 1
            assert slot == VERTEX_BLOCK
        for e in self.mesh.boundary_edges:
            base = self.edge_offset + EDGE_BLOCK * int(e)
            idx.extend(range(base, base + 3))          # midpoint curl values
            idx.extend(range(base + 13, base + 20))    # tangential moments
            p, q = self.mesh.edges[e]
            frame = canonical_edge_frame(tuple(self.mesh.vertices[p]),
                                         tuple(self.mesh.vertices[q]))
            units = frame.units
            freeJ = _free_jacobians(list(eplanes[int(e)].values()))
            for node in range(2):
                for pi, (a_idx, b_idx) in enumerate(D.DERIV_PAIRS):
                    val = np.einsum("kcd,c,d->k", freeJ,
                                    units[a_idx], units[b_idx])
                    if np.abs(val).max(initial=0.0) < 1e-9:
                        idx.append(base + 3 + 5 * node + pi)
        return np.array(sorted(idx), dtype=np.int64)


def build_dof_map(mesh, k=7, bc_mode="minimal") -> DofMap:
    return DofMap(mesh, k=k, bc_mode=bc_mode)
