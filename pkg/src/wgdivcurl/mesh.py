"""Polyhedral partitions of a bounded connected 3D domain.

Cells are star-shaped polyhedra with planar polygonal faces.  Every face
stores one unit normal together with a designated owner cell; cells
reference faces through orientation signs (+1 when the stored normal points
out of the cell).  Boundary faces carry a connected-component tag: component
0 is the exterior boundary, components 1..m bound interior cavities.

Meshes are immutable once built; all geometry (centroids, volumes, areas,
diameters) is precomputed by the builder.  Construction is lenient about
geometric defects so that ``validate`` can report them; the structured
generators and the file loader always return validated meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh topology, geometry, or file contents."""


def frame_from_normal(n: np.ndarray):
    """Deterministic right-handed orthonormal frame (n, t1, t2).

    t1 is the normalized in-plane projection of the global axis least
    aligned with n (ties broken by axis order), t2 = n x t1.
    """
    n = np.asarray(n, dtype=float)
    axis = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[axis] = 1.0
    t1 = e - np.dot(n, e) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return n, t1, t2


@dataclass
class PolyMesh:
    """Polyhedral partition with boundary-component labels.

    Face loops are stored counterclockwise as seen from the tip of the
    stored normal; the normal is outward for the owner cell.
    """

    vertices: np.ndarray            # (nv, 3)
    face_vertices: list             # per face: vertex index loop (np.ndarray)
    face_tags: np.ndarray           # (nf,) -1 interior, else component id
    cell_faces: list                # per cell: face indices (np.ndarray)
    cell_signs: list                # per cell: +-1 per face (np.ndarray)

    # derived, filled by _finalize
    face_normals: np.ndarray = field(default=None, repr=False)
    face_owner: np.ndarray = field(default=None, repr=False)
    face_cells: np.ndarray = field(default=None, repr=False)     # (nf, 2), -1 if none
    face_areas: np.ndarray = field(default=None, repr=False)
    face_centroids: np.ndarray = field(default=None, repr=False)
    face_diameters: np.ndarray = field(default=None, repr=False)
    cell_volumes: np.ndarray = field(default=None, repr=False)
    cell_centroids: np.ndarray = field(default=None, repr=False)
    cell_diameters: np.ndarray = field(default=None, repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.cell_faces)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def n_components(self) -> int:
        """Number of boundary components (m + 1)."""
        return int(self.face_tags.max()) + 1

    @property
    def h(self) -> float:
        """Mesh size: max cell diameter."""
        return float(self.cell_diameters.max())

    def boundary_faces(self, component=None) -> np.ndarray:
        if component is None:
            return np.flatnonzero(self.face_tags >= 0)
        return np.flatnonzero(self.face_tags == component)

    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_tags < 0)

    def face_frame(self, f: int):
        """Orthonormal triple (n, t1, t2) of face f; deterministic."""
        return frame_from_normal(self.face_normals[f])

    def cell_vertex_ids(self, c: int) -> np.ndarray:
        ids = np.concatenate([self.face_vertices[f] for f in self.cell_faces[c]])
        return np.unique(ids)

    def _finalize(self):
        nf, nc = self.n_faces, len(self.cell_faces)
        verts = self.vertices

        self.face_normals = np.zeros((nf, 3))
        self.face_areas = np.zeros(nf)
        self.face_centroids = np.zeros((nf, 3))
        self.face_diameters = np.zeros(nf)
        self.face_owner = np.full(nf, -1, dtype=int)
        self.face_cells = np.full((nf, 2), -1, dtype=int)

        for c in range(nc):
            for f, s in zip(self.cell_faces[c], self.cell_signs[c]):
                if s > 0:
                    if self.face_owner[f] >= 0:
                        raise MeshError(f"face {f} has two positive orientations")
                    self.face_owner[f] = c
                    self.face_cells[f, 0] = c
                else:
                    if self.face_cells[f, 1] >= 0:
                        raise MeshError(f"nonmanifold face {f}")
                    self.face_cells[f, 1] = c
        if np.any(self.face_owner < 0):
            raise MeshError("face without owner (no +1 orientation)")

        for f in range(nf):
            loop = verts[self.face_vertices[f]]
            # Newell area vector follows the loop orientation
            vec = 0.5 * np.sum(np.cross(loop, np.roll(loop, -1, axis=0)), axis=0)
            area = np.linalg.norm(vec)
            self.face_areas[f] = area
            n = vec / area if area > 0 else np.array([0.0, 0.0, 1.0])
            self.face_normals[f] = n
            # area centroid via signed triangle fan around the vertex mean
            vbar = loop.mean(axis=0)
            a = loop - vbar
            b = np.roll(loop, -1, axis=0) - vbar
            tri_a = 0.5 * np.cross(a, b) @ n
            tri_c = (vbar + loop + np.roll(loop, -1, axis=0)) / 3.0
            if abs(tri_a.sum()) > 0:
                self.face_centroids[f] = (tri_a[:, None] * tri_c).sum(axis=0) / tri_a.sum()
            else:
                self.face_centroids[f] = vbar
            d = loop[:, None, :] - loop[None, :, :]
            self.face_diameters[f] = np.sqrt((d * d).sum(axis=2)).max()

        self.cell_volumes = np.zeros(nc)
        self.cell_centroids = np.zeros((nc, 3))
        self.cell_diameters = np.zeros(nc)
        for c in range(nc):
            ids = self.cell_vertex_ids(c)
            pts = verts[ids]
            d = pts[:, None, :] - pts[None, :, :]
            self.cell_diameters[c] = np.sqrt((d * d).sum(axis=2)).max()
            apex = pts.mean(axis=0)
            vol = 0.0
            mom = np.zeros(3)
            for f, s in zip(self.cell_faces[c], self.cell_signs[c]):
                for a, b, cc in _face_fan_triangles(self, f, s):
                    v = np.dot(a - apex, np.cross(b - apex, cc - apex)) / 6.0
                    vol += v
                    mom += v * (apex + a + b + cc) / 4.0
            self.cell_volumes[c] = vol
            # signed fan sums give the exact centroid for any valid cell;
            # fall back to the vertex mean when the cell is degenerate
            self.cell_centroids[c] = mom / vol if abs(vol) > 1e-300 else apex
        return self


def _face_fan_triangles(mesh: PolyMesh, f: int, sign: int):
    """Triangles fanning face f from its centroid, oriented so the
    right-hand normal equals sign * stored normal."""
    loop = mesh.vertices[mesh.face_vertices[f]]
    c = mesh.face_centroids[f]
    tris = []
    for i in range(len(loop)):
        a, b = loop[i], loop[(i + 1) % len(loop)]
        tris.append((c, a, b) if sign > 0 else (c, b, a))
    return tris


def _component_labels(vertices, face_vertices, bfaces):
    """Flood-fill the boundary faces `bfaces` into edge-connected components.

    Returns (labels dict face->component, n_components) with component 0 the
    one whose bounding box contains all others.
    """
    edge_to_faces = {}
    for f in bfaces:
        loop = face_vertices[f]
        for i in range(len(loop)):
            e = (min(loop[i], loop[(i + 1) % len(loop)]),
                 max(loop[i], loop[(i + 1) % len(loop)]))
            edge_to_faces.setdefault(e, []).append(f)

    comp = {int(f): -1 for f in bfaces}
    n_comp = 0
    for f in bfaces:
        if comp[int(f)] >= 0:
            continue
        stack = [int(f)]
        comp[int(f)] = n_comp
        while stack:
            cur = stack.pop()
            loop = face_vertices[cur]
            for i in range(len(loop)):
                e = (min(loop[i], loop[(i + 1) % len(loop)]),
                     max(loop[i], loop[(i + 1) % len(loop)]))
                for g in edge_to_faces[e]:
                    if comp[int(g)] < 0:
                        comp[int(g)] = n_comp
                        stack.append(int(g))
        n_comp += 1

    if n_comp == 0:
        raise MeshError("mesh has no boundary faces")

    los = np.full((n_comp, 3), np.inf)
    his = np.full((n_comp, 3), -np.inf)
    for f in bfaces:
        pts = vertices[face_vertices[f]]
        c = comp[int(f)]
        los[c] = np.minimum(los[c], pts.min(axis=0))
        his[c] = np.maximum(his[c], pts.max(axis=0))
    extent = (his - los).max(axis=1)
    order = sorted(range(n_comp), key=lambda i: (-extent[i], i))
    outer = order[0]
    for i in order[1:]:
        if np.any(los[i] < los[outer]) or np.any(his[i] > his[outer]):
            raise MeshError("no boundary component encloses all others")
    relabel = {old: new for new, old in enumerate(order)}
    return {f: relabel[c] for f, c in comp.items()}, n_comp


def mesh_from_cells(vertices, cells_as_loops) -> PolyMesh:
    """Build a PolyMesh from per-cell outward-oriented face loops.

    Shared faces are identified by their vertex set; the first referencing
    cell becomes the owner and fixes the stored orientation.  Boundary
    components are labeled by edge-connectivity flood fill with the
    enclosing component tagged 0.
    """
    vertices = np.asarray(vertices, dtype=float)
    face_index = {}
    face_vertices = []
    ref_count = []
    cell_faces, cell_signs = [], []
    for loops in cells_as_loops:
        fids, sgns = [], []
        for loop in loops:
            loop = np.asarray(loop, dtype=int)
            key = tuple(sorted(loop.tolist()))
            if key not in face_index:
                face_index[key] = len(face_vertices)
                face_vertices.append(loop)
                ref_count.append(0)
                sgns.append(1)
            else:
                sgns.append(-1)
            fids.append(face_index[key])
            ref_count[face_index[key]] += 1
        cell_faces.append(np.array(fids, dtype=int))
        cell_signs.append(np.array(sgns, dtype=int))

    ref_count = np.array(ref_count)
    if np.any(ref_count > 2):
        raise MeshError("nonmanifold face (referenced by more than two cells)")
    tags = np.where(ref_count == 1, 0, -1)

    bfaces = np.flatnonzero(tags >= 0)
    labels, _ = _component_labels(vertices, face_vertices, bfaces)
    for f in bfaces:
        tags[f] = labels[int(f)]
    return PolyMesh(vertices, face_vertices, tags, cell_faces, cell_signs)._finalize()


# ---------------------------------------------------------------------------
# structured generators

_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def build_cube_tet_mesh(n: int) -> PolyMesh:
    """Uniform tetrahedral partition of [0,1]^3 with 6*n^3 cells.

    Each of the n^3 sub-cubes is split into 6 tetrahedra around its main
    diagonal, which makes the triangulation conforming across sub-cubes.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = lambda i, j, k: (i * (n + 1) + j) * (n + 1) + k
    grid = np.linspace(0.0, 1.0, n + 1)
    vertices = np.array([[grid[i], grid[j], grid[k]]
                         for i in range(n + 1) for j in range(n + 1) for k in range(n + 1)])
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    corners = [base.copy()]
                    cur = base.copy()
                    for ax in perm:
                        cur = cur.copy()
                        cur[ax] += 1
                        corners.append(cur)
                    vids = [idx(*c) for c in corners]
                    cells.append(_tet_face_loops(vertices, vids))
    return mesh_from_cells(vertices, cells)


def _tet_face_loops(vertices, vids):
    """Outward-oriented triangular faces of the tetrahedron vids."""
    centroid = vertices[vids].mean(axis=0)
    loops = []
    for skip in range(4):
        tri = [vids[i] for i in range(4) if i != skip]
        a, b, c = (vertices[t] for t in tri)
        if np.dot(np.cross(b - a, c - a), (a + b + c) / 3.0 - centroid) < 0:
            tri = [tri[0], tri[2], tri[1]]
        loops.append(tri)
    return loops


def build_cube_hex_mesh(n: int, cavity=None) -> PolyMesh:
    """Axis-aligned hexahedral partition of [0,1]^3, optionally hollowed.

    Parameters
    ----------
    n : subdivisions per axis.
    cavity : optional pair of cell-index triples (lo, hi) removing the
        half-open index box lo <= (i,j,k) < hi.  The box must be nonempty
        and strictly interior, so the hole boundary (tagged component 1)
        stays disjoint from the outer boundary (component 0).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    removed = np.zeros((n, n, n), dtype=bool)
    if cavity is not None:
        lo, hi = (np.asarray(c, dtype=int) for c in cavity)
        if np.any(hi <= lo):
            raise ValueError("cavity box is empty")
        if np.any(lo < 1) or np.any(hi > n - 1):
            raise MeshError("cavity touches the outer boundary")
        removed[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True

    idx = lambda i, j, k: (i * (n + 1) + j) * (n + 1) + k
    grid = np.linspace(0.0, 1.0, n + 1)
    vertices = np.array([[grid[i], grid[j], grid[k]]
                         for i in range(n + 1) for j in range(n + 1) for k in range(n + 1)])
    cells = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if removed[i, j, k]:
                    continue
                cells.append(_hex_face_loops(idx, i, j, k))
    return mesh_from_cells(vertices, cells)


def _hex_face_loops(idx, i, j, k):
    # outward loops of the unit-index hexahedron at (i, j, k)
    return [
        [idx(i, j, k), idx(i, j, k + 1), idx(i, j + 1, k + 1), idx(i, j + 1, k)],          # x = lo
        [idx(i + 1, j, k), idx(i + 1, j + 1, k), idx(i + 1, j + 1, k + 1), idx(i + 1, j, k + 1)],  # x = hi
        [idx(i, j, k), idx(i + 1, j, k), idx(i + 1, j, k + 1), idx(i, j, k + 1)],          # y = lo
        [idx(i, j + 1, k), idx(i, j + 1, k + 1), idx(i + 1, j + 1, k + 1), idx(i + 1, j + 1, k)],  # y = hi
        [idx(i, j, k), idx(i, j + 1, k), idx(i + 1, j + 1, k), idx(i + 1, j, k)],          # z = lo
        [idx(i, j, k + 1), idx(i + 1, j, k + 1), idx(i + 1, j + 1, k + 1), idx(i, j + 1, k + 1)],  # z = hi
    ]


# ---------------------------------------------------------------------------
# text format: "wgmesh 1"

def save_mesh(mesh: PolyMesh, path):
    """Write the mesh in the 'wgmesh 1' whitespace-delimited text format.

    Cell lines hold signed 0-origin face indices; a negatively oriented
    reference to face 0 is written as the token "-0".
    """
    with open(path, "w") as fh:
        fh.write("wgmesh 1\n")
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        fh.write(f"faces {mesh.n_faces}\n")
        for f in range(mesh.n_faces):
            loop = " ".join(str(int(v)) for v in mesh.face_vertices[f])
            fh.write(f"{len(mesh.face_vertices[f])} {loop} {int(mesh.face_tags[f])}\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for c in range(mesh.n_cells):
            toks = []
            for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
                toks.append(str(int(f)) if s > 0 else f"-{int(f)}")
            fh.write(f"{len(toks)} {' '.join(toks)}\n")


def load_mesh(path) -> PolyMesh:
    """Read a 'wgmesh 1' file; raises MeshError with a line number on bad input."""
    with open(path) as fh:
        lines = fh.read().splitlines()

    pos = 0

    def next_tokens():
        nonlocal pos
        while pos < len(lines):
            toks = lines[pos].split()
            pos += 1
            if toks:
                return pos, toks
        raise MeshError(f"line {len(lines)}: unexpected end of file")

    ln, toks = next_tokens()
    if toks != ["wgmesh", "1"]:
        raise MeshError(f"line {ln}: expected header 'wgmesh 1'")

    def section(name):
        ln, toks = next_tokens()
        if len(toks) != 2 or toks[0] != name:
            raise MeshError(f"line {ln}: expected section '{name} N'")
        try:
            return int(toks[1])
        except ValueError:
            raise MeshError(f"line {ln}: bad count in section '{name}'")

    nv = section("vertices")
    vertices = np.zeros((nv, 3))
    for i in range(nv):
        ln, toks = next_tokens()
        if len(toks) != 3:
            raise MeshError(f"line {ln}: vertex needs 3 coordinates")
        try:
            vertices[i] = [float(t) for t in toks]
        except ValueError:
            raise MeshError(f"line {ln}: bad vertex coordinate")

    nf = section("faces")
    face_vertices, tags = [], np.zeros(nf, dtype=int)
    for i in range(nf):
        ln, toks = next_tokens()
        try:
            k = int(toks[0])
            if len(toks) != k + 2:
                raise ValueError
            loop = np.array([int(t) for t in toks[1:1 + k]], dtype=int)
            tags[i] = int(toks[1 + k])
        except (ValueError, IndexError):
            raise MeshError(f"line {ln}: malformed face line")
        if k < 3:
            raise MeshError(f"line {ln}: face with fewer than 3 vertices")
        if np.any(loop < 0) or np.any(loop >= nv):
            raise MeshError(f"line {ln}: vertex index out of range")
        face_vertices.append(loop)

    nc = section("cells")
    cell_faces, cell_signs = [], []
    for i in range(nc):
        ln, toks = next_tokens()
        try:
            k = int(toks[0])
            if len(toks) != k + 1:
                raise ValueError
            fids, sgns = [], []
            for t in toks[1:]:
                # sign read from the token text so "-0" keeps its orientation
                sgn = -1 if t.startswith("-") else 1
                fids.append(int(t.lstrip("+-")))
                sgns.append(sgn)
        except (ValueError, IndexError):
            raise MeshError(f"line {ln}: malformed cell line")
        fids = np.array(fids, dtype=int)
        if np.any(fids < 0) or np.any(fids >= nf):
            raise MeshError(f"line {ln}: face index out of range")
        cell_faces.append(fids)
        cell_signs.append(np.array(sgns, dtype=int))

    counts = np.zeros(nf, dtype=int)
    for fids in cell_faces:
        counts[fids] += 1
    if np.any(counts > 2):
        raise MeshError("nonmanifold face (referenced by more than two cells)")
    if np.any(counts == 0):
        raise MeshError("face referenced by no cell")

    mesh = PolyMesh(vertices, face_vertices, tags, cell_faces, cell_signs)._finalize()
    report = validate(mesh)
    if report.violations:
        raise MeshError("invalid mesh: " + "; ".join(report.violations))
    return mesh


# ---------------------------------------------------------------------------
# validation

@dataclass
class MeshReport:
    violations: list
    metrics: dict

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(mesh: PolyMesh) -> MeshReport:
    """Check all mesh invariants; returns violations instead of raising.

    Also reports shape-regularity metrics (no hard threshold is enforced).
    """
    bad = []
    verts = mesh.vertices

    counts = np.zeros(mesh.n_faces, dtype=int)
    pos_counts = np.zeros(mesh.n_faces, dtype=int)
    for c in range(mesh.n_cells):
        for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
            counts[f] += 1
            if s > 0:
                pos_counts[f] += 1
    for f in range(mesh.n_faces):
        if counts[f] == 1:
            if mesh.face_tags[f] < 0:
                bad.append(f"face {f}: boundary face tagged interior")
            if pos_counts[f] != 1:
                bad.append(f"face {f}: boundary face with inward orientation")
        elif counts[f] == 2:
            if mesh.face_tags[f] >= 0:
                bad.append(f"face {f}: interior face carries boundary tag")
            if pos_counts[f] != 1:
                bad.append(f"face {f}: interior face lacks opposite orientations")
        else:
            bad.append(f"face {f}: nonmanifold ({counts[f]} references)")

    for f in range(mesh.n_faces):
        h_own = mesh.cell_diameters[mesh.face_owner[f]]
        if mesh.face_areas[f] <= 1e-14 * h_own ** 2:
            bad.append(f"face {f}: degenerate (area {mesh.face_areas[f]:.2e})")
            continue
        n = mesh.face_normals[f]
        if abs(np.linalg.norm(n) - 1.0) > 1e-14:
            bad.append(f"face {f}: stored normal not unit length")
        loop = verts[mesh.face_vertices[f]]
        off = np.abs((loop - mesh.face_centroids[f]) @ n).max()
        if off > 1e-12 * h_own:
            bad.append(f"face {f}: vertices not coplanar (offset {off:.2e})")

    # star-shapedness w.r.t. the cell centroid and outward owner normals
    min_tet = np.inf
    for c in range(mesh.n_cells):
        if mesh.cell_volumes[c] <= 0:
            bad.append(f"cell {c}: nonpositive volume {mesh.cell_volumes[c]!r}")
            continue
        apex = mesh.cell_centroids[c]
        flagged = False
        for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
            for a, b, cc in _face_fan_triangles(mesh, f, s):
                v = np.dot(a - apex, np.cross(b - apex, cc - apex)) / 6.0
                min_tet = min(min_tet, v / mesh.cell_volumes[c])
                if v <= 0.0 and not flagged:
                    bad.append(f"cell {c}: normal not outward or not star-shaped "
                               f"(face {f})")
                    flagged = True

    # volume closure: sum of cells vs divergence theorem over the boundary
    vol_cells = mesh.cell_volumes.sum()
    vol_bdry = 0.0
    for f in mesh.boundary_faces():
        vol_bdry += mesh.face_areas[f] * np.dot(mesh.face_centroids[f],
                                                mesh.face_normals[f]) / 3.0
    if abs(vol_cells - vol_bdry) > 1e-10 * abs(vol_bdry):
        bad.append(f"volume mismatch: cells {vol_cells!r} vs boundary {vol_bdry!r}")

    # boundary component labels must match an edge-connectivity flood fill
    bfaces = [f for f in range(mesh.n_faces) if counts[f] == 1]
    try:
        labels, n_comp = _component_labels(verts, mesh.face_vertices, bfaces)
        expect = np.array([labels[f] for f in bfaces])
        actual = mesh.face_tags[bfaces]
        if not np.array_equal(expect, actual):
            bad.append("boundary component tags disagree with flood fill")
    except MeshError as exc:
        bad.append(f"boundary labeling failed: {exc}")
        n_comp = 0

    hT = mesh.cell_diameters
    vol_safe = np.maximum(mesh.cell_volumes, 1e-300)
    metrics = {
        "min_face_area_ratio": float(min(
            mesh.face_areas[f] / hT[mesh.face_owner[f]] ** 2
            for f in range(mesh.n_faces))),
        "min_cell_volume_ratio": float((mesh.cell_volumes / hT ** 3).min()),
        # 3 V / A is a lower estimate of the inscribed-ball radius
        "max_aspect": float(max(
            hT[c] * sum(mesh.face_areas[f] for f in mesh.cell_faces[c])
            / (3.0 * vol_safe[c])
            for c in range(mesh.n_cells))),
        "min_fan_tet_fraction": float(min_tet),
        "h": mesh.h,
        "n_cells": mesh.n_cells,
        "n_faces": mesh.n_faces,
        "n_components": n_comp,
    }
    return MeshReport(bad, metrics)
