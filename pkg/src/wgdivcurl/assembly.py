"""Bilinear forms and the global saddle-point system.

The discrete problem couples the weak field u_h, the pressure-like
multiplier p_h, and one scalar flux multiplier per cavity boundary
component:

    a(u_h, v) + b(v, p_h) + sum_i <v_b . n_i, lam_i>  = (g, v_0)
    b(u_h, w)                                         = (f, w)
    <u_b . n_i, 1>                                    = beta_i

with a(v, w) the kappa-weighted weak-curl energy plus the stabilizer and
b(v, q) the weak-divergence pairing.  The essential condition fixing the
tangential face blocks on the boundary to the projected data is imposed by
symmetric elimination, so the assembled matrix stays exactly symmetric.

Full DoF ordering: interior blocks cell by cell, face blocks face by face,
pressures, multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .space import PressureFunction, WGSpace, WeakFunction


class AssemblyError(Exception):
    pass


def _check_same_space(*fns):
    s = fns[0].space
    for g in fns[1:]:
        if g.space is not s:
            raise AssemblyError("functions live on different spaces")
    return s


def _face_mismatch(space, c, f, v):
    """Point values of (mu v_0 - v_b) . n and (v_0 - v_b) x n on face f of
    cell c at the operator quadrature (orientation signs square away)."""
    quad = space.face_quad_op[f]
    n, t1, t2 = space.face_basis[f].frame
    v0 = space.cell_basis[c].eval(quad.points) @ v.interior(c).T
    fc = space.face_basis[f].eval(quad.points) @ v.face(f).T
    vb = fc[:, 0:1] * n + fc[:, 1:2] * t1 + fc[:, 2:3] * t2
    dn = (v0 @ space.mu[c] - vb) @ n
    dt = np.cross(v0 - vb, n)
    return quad.weights, dn, dt


def cell_stabilizer(space, c: int, v: WeakFunction, w: WeakFunction) -> float:
    """Stabilizer contribution of one cell, evaluated from the pointwise
    trace mismatches (cancellations are exact, unlike the assembled
    quadratic form)."""
    total = 0.0
    for f in space.mesh.cell_faces[c]:
        wq, dn_v, dt_v = _face_mismatch(space, c, f, v)
        if w is v:
            dn_w, dt_w = dn_v, dt_v
        else:
            _, dn_w, dt_w = _face_mismatch(space, c, f, w)
        total += wq @ (dn_v * dn_w) + np.einsum("q,qa,qa->", wq, dt_v, dt_w)
    return total / space.mesh.cell_diameters[c]


def stabilizer(v: WeakFunction, w: WeakFunction) -> float:
    """Face penalty s(v, w); symmetric in its arguments."""
    space = _check_same_space(v, w)
    return float(sum(cell_stabilizer(space, c, v, w)
                     for c in range(space.mesh.n_cells)))


def apply_a(v: WeakFunction, w: WeakFunction) -> float:
    """Matrix-free evaluation of a(v, w) = (kappa curl_w v, curl_w w) + s(v, w)."""
    space = _check_same_space(v, w)
    total = 0.0
    for c in range(space.mesh.n_cells):
        ops = space.cell_ops[c]
        total += v.local(c) @ (ops.curl_energy + ops.stab) @ w.local(c)
    return float(total)


def apply_b(v: WeakFunction, q: PressureFunction) -> float:
    """Matrix-free evaluation of b(v, q) = (div_w(mu v), q)."""
    space = _check_same_space(v, q)
    total = 0.0
    for c in range(space.mesh.n_cells):
        total += q.cell(c) @ (space.cell_ops[c].div_moments @ v.local(c))
    return float(total)


@dataclass
class SaddleSystem:
    """Reduced symmetric indefinite system plus the elimination map."""
    space: WGSpace
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray          # reduced index -> full index
    full_to_red: np.ndarray   # full index -> reduced index or -1
    fixed: np.ndarray         # fixed full indices (boundary tangential blocks)
    fixed_values: np.ndarray
    n_u_free: int
    n_p: int
    n_multipliers: int

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    def dump(self, path_prefix: str):
        """Write the sparse system as 'i j value' triples plus a block-layout
        sidecar describing the DoF ordering."""
        coo = self.matrix.tocoo()
        with open(path_prefix + ".mtx.txt", "w") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {float(v)!r}\n")
        with open(path_prefix + ".layout.txt", "w") as fh:
            fh.write(f"n_unknowns {self.n_unknowns}\n")
            fh.write(f"u_free {self.n_u_free}\n")
            fh.write(f"pressure {self.n_p}\n")
            fh.write(f"multipliers {self.n_multipliers}\n")
            fh.write(f"eliminated {len(self.fixed)}\n")
            fh.write("order interior-cells faces pressures multipliers\n")


def assemble(space: WGSpace, g=None, f=None, xi=None, beta=None) -> SaddleSystem:
    """Build the saddle system for data (g, f, xi, beta).

    g and f are callables (points -> values) or None for zero; xi is the
    boundary field whose tangential part constrains u_b x n (None for
    homogeneous); beta lists the prescribed fluxes through the cavity
    components 1..m.
    """
    mesh = space.mesh
    m = space.n_multipliers
    beta = np.zeros(m) if beta is None else np.asarray(beta, dtype=float)
    if beta.shape != (m,):
        raise AssemblyError(f"beta must have length {m}")
    for i in range(1, m + 1):
        faces = mesh.boundary_faces(i)
        if len(faces) == 0 or mesh.face_areas[faces].sum() <= 0.0:
            raise AssemblyError(f"boundary component {i} has zero measure")

    N_u, N_p = space.n_u, space.n_p
    N = N_u + N_p + m
    p_base = N_u
    lam_base = N_u + N_p

    rhs_full = np.zeros(N)
    rows, cols, vals = [], [], []

    for c in range(mesh.n_cells):
        ops = space.cell_ops[c]
        gdofs = space.cell_dofs(c)
        A_loc = ops.curl_energy + ops.stab
        rows.append(np.repeat(gdofs, ops.ndof))
        cols.append(np.tile(gdofs, ops.ndof))
        vals.append(A_loc.ravel())

        prow = p_base + c * space.npb + np.arange(space.npb)
        rows.append(np.repeat(prow, ops.ndof))
        cols.append(np.tile(gdofs, space.npb))
        vals.append(ops.div_moments.ravel())
        rows.append(np.tile(gdofs, space.npb))
        cols.append(np.repeat(prow, ops.ndof))
        vals.append(ops.div_moments.ravel())

        if g is not None:
            quad = space.cell_quad_data[c]
            gv = np.asarray(g(quad.points), dtype=float)          # (nq, 3)
            V = space.cell_basis[c].eval(quad.points)             # (nq, nib)
            mom = (gv * quad.weights[:, None]).T @ V              # (3, nib)
            rhs_full[space.interior_slice(c)] = mom.ravel()
        if f is not None:
            quad = space.cell_quad_data[c]
            fv = np.asarray(f(quad.points), dtype=float)
            Vp = space.cell_basis[c].eval(quad.points)[:, :space.npb]
            rhs_full[prow] = (fv * quad.weights) @ Vp

    for i in range(1, m + 1):
        lam = lam_base + (i - 1)
        for fc in mesh.boundary_faces(i):
            ndofs = space.face_dof_blocks(fc)[0]
            ints = space.face_basis[fc].integrals
            rows.append(np.full(space.nfb, lam))
            cols.append(ndofs)
            vals.append(ints)
            rows.append(ndofs)
            cols.append(np.full(space.nfb, lam))
            vals.append(ints)
        rhs_full[lam] = beta[i - 1]

    # essential condition: tangential face blocks on the boundary are fixed
    # to the projected data (only the tangential content of xi is used)
    fixed_idx, fixed_val = [], []
    for fc in mesh.boundary_faces():
        _, t1d, t2d = space.face_dof_blocks(fc)
        if xi is None:
            c1 = np.zeros(space.nfb)
            c2 = np.zeros(space.nfb)
        else:
            quad = space.face_quad_data[fc]
            vals_x = np.asarray(xi(quad.points), dtype=float)
            _, t1, t2 = space.face_basis[fc].frame
            comp = np.column_stack([vals_x @ t1, vals_x @ t2])
            cc = space.face_basis[fc].project(comp, quad)
            c1, c2 = cc[0], cc[1]
        fixed_idx.append(t1d)
        fixed_val.append(c1)
        fixed_idx.append(t2d)
        fixed_val.append(c2)
    fixed_idx = np.concatenate(fixed_idx) if fixed_idx else np.zeros(0, dtype=int)
    fixed_val = np.concatenate(fixed_val) if fixed_val else np.zeros(0)

    is_fixed = np.zeros(N, dtype=bool)
    is_fixed[fixed_idx] = True
    x_fix = np.zeros(N)
    x_fix[fixed_idx] = fixed_val
    full_to_red = np.cumsum(~is_fixed) - 1
    full_to_red[is_fixed] = -1
    free = np.flatnonzero(~is_fixed)

    I = np.concatenate(rows)
    J = np.concatenate(cols)
    V = np.concatenate(vals)
    row_free = ~is_fixed[I]
    col_free = ~is_fixed[J]

    keep = row_free & col_free
    Mred = sp.coo_matrix(
        (V[keep], (full_to_red[I[keep]], full_to_red[J[keep]])),
        shape=(len(free), len(free))).tocsr()

    rhs = rhs_full[free]
    move = row_free & ~col_free
    np.add.at(rhs, full_to_red[I[move]], -V[move] * x_fix[J[move]])

    n_u_free = int(np.sum(~is_fixed[:N_u]))
    return SaddleSystem(space=space, matrix=Mred, rhs=rhs, free=free,
                        full_to_red=full_to_red, fixed=fixed_idx,
                        fixed_values=fixed_val, n_u_free=n_u_free,
                        n_p=N_p, n_multipliers=m)
