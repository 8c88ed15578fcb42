"""Global weak Galerkin space: DoF layout, per-cell caches, projections.

A `WGSpace` bundles a mesh, the polynomial degree k >= 1, the per-cell
coefficient tensors mu and kappa, and all precomputed bases, quadrature
rules, and local operator matrices.  A `WeakFunction` stores the flat DoF
vector of a field {v_0, v_b}: interior coefficient blocks cell by cell,
then face blocks face by face; each face block holds one set of 2D
polynomial coefficients along each frame direction (n, t1, t2), shared by
the two adjacent cells.  Pressures live in P_{k-1} per cell.

Everything here is immutable after construction and safe for concurrent
reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import weakops
from .mesh import PolyMesh
from .polybasis import (CellBasis, FaceBasis, cell_quadrature, face_quadrature,
                        n_monomials)


def _per_cell_tensor(value, mesh: PolyMesh) -> np.ndarray:
    """Normalize a coefficient spec to an (n_cells, 3, 3) array.

    Accepts None (identity), a single 3x3 array, an (n_cells, 3, 3) array,
    or a callable mapping one point (cell centroid) to a 3x3 array.
    """
    nc = mesh.n_cells
    if value is None:
        return np.broadcast_to(np.eye(3), (nc, 3, 3)).copy()
    if callable(value):
        return np.stack([np.asarray(value(c), dtype=float)
                         for c in mesh.cell_centroids])
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3, 3):
        return np.broadcast_to(arr, (nc, 3, 3)).copy()
    if arr.shape == (nc, 3, 3):
        return arr.copy()
    raise ValueError("coefficient must be None, 3x3, (n_cells,3,3), or callable")


class WGSpace:
    """Weak Galerkin discretization of degree k on a polyhedral mesh."""

    def __init__(self, mesh: PolyMesh, k: int, mu=None, kappa=None,
                 data_degree: int | None = None):
        if k < 1:
            raise ValueError("degree k must be >= 1")
        self.mesh = mesh
        self.k = k
        self.mu = _per_cell_tensor(mu, mesh)
        self.kappa = _per_cell_tensor(kappa, mesh)
        self.op_degree = 2 * k
        self.data_degree = data_degree if data_degree is not None else 2 * k + 3

        self.nib = n_monomials(3, k)       # interior scalar modes per component
        self.nfb = n_monomials(2, k)       # face scalar modes per direction
        self.npb = n_monomials(3, k - 1)   # pressure modes per cell
        nc, nf = mesh.n_cells, mesh.n_faces
        self.n_interior = nc * 3 * self.nib
        self.n_face = nf * 3 * self.nfb
        self.n_u = self.n_interior + self.n_face
        self.n_p = nc * self.npb
        self.n_multipliers = mesh.n_components - 1

        # face caches
        self.face_basis = []
        self.face_quad_op = []
        self.face_quad_data = []
        for f in range(nf):
            q_op = face_quadrature(mesh, f, self.op_degree)
            self.face_basis.append(FaceBasis(
                k, mesh.face_centroids[f], mesh.face_normals[f],
                mesh.face_diameters[f], q_op))
            self.face_quad_op.append(q_op)
            self.face_quad_data.append(face_quadrature(mesh, f, self.data_degree))

        # cell caches
        self.cell_basis = []
        self.cell_quad_op = []
        self.cell_quad_data = []
        self.cell_ops = []
        self._cell_dofs = []
        for c in range(nc):
            q_op = cell_quadrature(mesh, c, self.op_degree)
            basis = CellBasis(k, mesh.cell_centroids[c], mesh.cell_diameters[c], q_op)
            faces = [(self.face_basis[f], self.face_quad_op[f], int(s))
                     for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c])]
            ops = weakops.build_local_operators(
                k, mesh.cell_diameters[c], self.mu[c], self.kappa[c],
                basis, q_op, faces)
            self.cell_basis.append(basis)
            self.cell_quad_op.append(q_op)
            self.cell_quad_data.append(cell_quadrature(mesh, c, self.data_degree))
            self.cell_ops.append(ops)
            self._cell_dofs.append(self._build_cell_dofs(c))

    # ---- DoF layout -----------------------------------------------------

    def interior_slice(self, c: int) -> slice:
        w = 3 * self.nib
        return slice(c * w, (c + 1) * w)

    def face_slice(self, f: int) -> slice:
        w = 3 * self.nfb
        return slice(self.n_interior + f * w, self.n_interior + (f + 1) * w)

    def _build_cell_dofs(self, c: int) -> np.ndarray:
        parts = [np.arange(self.interior_slice(c).start, self.interior_slice(c).stop)]
        for f in self.mesh.cell_faces[c]:
            s = self.face_slice(f)
            parts.append(np.arange(s.start, s.stop))
        return np.concatenate(parts)

    def cell_dofs(self, c: int) -> np.ndarray:
        """Global velocity-DoF indices of cell c in local operator order."""
        return self._cell_dofs[c]

    def face_dof_blocks(self, f: int):
        """(normal, t1, t2) global index arrays of face f."""
        s = self.face_slice(f)
        base = np.arange(s.start, s.stop)
        return base[:self.nfb], base[self.nfb:2 * self.nfb], base[2 * self.nfb:]

    # ---- projections ----------------------------------------------------

    def project_field(self, u) -> "WeakFunction":
        """Projection of a smooth vector field into the weak space.

        Interior blocks are componentwise L2 projections onto [P_k(T)]^3.
        The face block carries Q(mu u . n) along n plus the projected
        tangential components; mu is taken from the face's owner cell.
        """
        v = WeakFunction.zeros(self)
        for c in range(self.mesh.n_cells):
            quad = self.cell_quad_data[c]
            v.interior(c)[:] = self.cell_basis[c].project(u(quad.points), quad)
        for f in range(self.mesh.n_faces):
            quad = self.face_quad_data[f]
            vals = np.asarray(u(quad.points), dtype=float)
            mu = self.mu[self.mesh.face_owner[f]]
            n, t1, t2 = self.face_basis[f].frame
            comp = np.column_stack([(vals @ mu) @ n, vals @ t1, vals @ t2])
            v.face(f)[:] = self.face_basis[f].project(comp, quad)
        return v

    def project_pressure(self, p) -> "PressureFunction":
        """Cellwise L2 projection of a scalar field onto P_{k-1}."""
        q = PressureFunction.zeros(self)
        for c in range(self.mesh.n_cells):
            quad = self.cell_quad_data[c]
            q.cell(c)[:] = self.cell_basis[c].project(
                p(quad.points), quad, degree=self.k - 1)
        return q

    def project_cell_vector(self, field, c: int) -> np.ndarray:
        """L2 projection of a vector field onto [P_{k-1}(T)]^3, shape (3, np)."""
        quad = self.cell_quad_data[c]
        return self.cell_basis[c].project(field(quad.points), quad,
                                          degree=self.k - 1)


@dataclass
class WeakFunction:
    """DoF vector of a weak field {v_0, v_b} on a WGSpace."""
    space: WGSpace
    data: np.ndarray

    @classmethod
    def zeros(cls, space: WGSpace) -> "WeakFunction":
        return cls(space, np.zeros(space.n_u))

    @classmethod
    def random(cls, space: WGSpace, rng) -> "WeakFunction":
        return cls(space, rng.standard_normal(space.n_u))

    def interior(self, c: int) -> np.ndarray:
        """Interior coefficients of cell c as a (3, nib) view."""
        return self.data[self.space.interior_slice(c)].reshape(3, self.space.nib)

    def face(self, f: int) -> np.ndarray:
        """Face coefficients of face f as a (3, nfb) view; rows n, t1, t2."""
        return self.data[self.space.face_slice(f)].reshape(3, self.space.nfb)

    def local(self, c: int) -> np.ndarray:
        return self.data[self.space.cell_dofs(c)]

    def copy(self) -> "WeakFunction":
        return WeakFunction(self.space, self.data.copy())

    def __add__(self, other):
        return WeakFunction(self.space, self.data + other.data)

    def __sub__(self, other):
        return WeakFunction(self.space, self.data - other.data)

    def __mul__(self, a):
        return WeakFunction(self.space, self.data * a)

    __rmul__ = __mul__


@dataclass
class PressureFunction:
    """Piecewise P_{k-1} scalar, one coefficient block per cell."""
    space: WGSpace
    data: np.ndarray

    @classmethod
    def zeros(cls, space: WGSpace) -> "PressureFunction":
        return cls(space, np.zeros(space.n_p))

    @classmethod
    def random(cls, space: WGSpace, rng) -> "PressureFunction":
        return cls(space, rng.standard_normal(space.n_p))

    def cell(self, c: int) -> np.ndarray:
        return self.data[c * self.space.npb:(c + 1) * self.space.npb]

    def copy(self) -> "PressureFunction":
        return PressureFunction(self.space, self.data.copy())

    def __add__(self, other):
        return PressureFunction(self.space, self.data + other.data)

    def __sub__(self, other):
        return PressureFunction(self.space, self.data - other.data)

    def __mul__(self, a):
        return PressureFunction(self.space, self.data * a)

    __rmul__ = __mul__
