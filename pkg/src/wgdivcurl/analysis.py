"""Discrete norms, consistency functionals, inf-sup test function, rates.

All quantities reduce to quadratic forms in the cached per-cell operator
matrices, so evaluation is exact for the discrete fields (quadrature is
exact for the polynomial integrands involved).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import apply_a, cell_stabilizer, stabilizer
from .space import PressureFunction, WGSpace, WeakFunction


# ---------------------------------------------------------------------------
# norms on weak functions

def norm_divcurl(v: WeakFunction) -> float:
    """Discrete H(curl) ∩ H(div)-type norm: weak curl + weak divergence
    L2 terms plus the h^{-1}-weighted face mismatch terms."""
    space = v.space
    total = 0.0
    for c in range(space.mesh.n_cells):
        ops = space.cell_ops[c]
        loc = v.local(c)
        d = ops.div_op @ loc
        w = ops.curl_op @ loc
        total += d @ ops.mass_sub @ d
        total += np.einsum("ai,ij,aj->", w, ops.mass_sub, w)
        total += cell_stabilizer(space, c, v, v)
    return float(np.sqrt(total))


def norm_energy(v: WeakFunction) -> float:
    """Energy norm: sqrt(a(v, v))."""
    return float(np.sqrt(max(apply_a(v, v), 0.0)))


def seminorm_jump(v: WeakFunction) -> float:
    """Face-mismatch seminorm; its square equals the stabilizer s(v, v)."""
    return float(np.sqrt(max(stabilizer(v, v), 0.0)))


def norm_face_l2(v: WeakFunction) -> float:
    """h_T-weighted L2 norm of the face variable over all cell boundaries."""
    space = v.space
    total = 0.0
    for c in range(space.mesh.n_cells):
        h_T = space.mesh.cell_diameters[c]
        for f in space.mesh.cell_faces[c]:
            coeff = v.face(f)
            M = space.face_basis[f].mass
            total += h_T * np.einsum("ai,ij,aj->", coeff, M, coeff)
    return float(np.sqrt(total))


def norm_interior_l2(v: WeakFunction) -> float:
    """L2 norm of the interior part v_0."""
    space = v.space
    total = 0.0
    for c in range(space.mesh.n_cells):
        coeff = v.interior(c)
        M = space.cell_basis[c].mass
        total += np.einsum("ai,ij,aj->", coeff, M, coeff)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# pressure norm

def _pressure_face_trace(space: WGSpace, q: PressureFunction, c: int, f: int,
                         pts) -> np.ndarray:
    V = space.cell_basis[c].eval(pts)[:, :space.npb]
    return V @ q.cell(c)


def boundary_means(space: WGSpace, q: PressureFunction) -> np.ndarray:
    """Mean of q over each boundary component; component 0 pinned to zero."""
    nc = space.mesh.n_components
    sums = np.zeros(nc)
    areas = np.zeros(nc)
    for f in space.mesh.boundary_faces():
        i = space.mesh.face_tags[f]
        quad = space.face_quad_op[f]
        tr = _pressure_face_trace(space, q, space.mesh.face_owner[f], f, quad.points)
        sums[i] += quad.weights @ tr
        areas[i] += space.mesh.face_areas[f]
    means = sums / areas
    means[0] = 0.0
    return means


def norm_pressure(q: PressureFunction) -> float:
    """Mesh-dependent pressure norm: h^2-weighted broken gradient, h-weighted
    interior jumps, and h-weighted boundary deviation from the component
    means (zero on the exterior component)."""
    space = q.space
    mesh = space.mesh
    h = mesh.h
    total = 0.0

    if space.k > 1:  # broken gradient vanishes for piecewise constants
        for c in range(mesh.n_cells):
            quad = space.cell_quad_op[c]
            G = space.cell_basis[c].grad(quad.points)[:, :space.npb]
            gq = np.einsum("qid,i->qd", G, q.cell(c))
            total += h * h * (quad.weights @ (gq * gq).sum(axis=1))

    for f in mesh.interior_faces():
        own, nb = space.mesh.face_cells[f]
        quad = space.face_quad_op[f]
        jump = (_pressure_face_trace(space, q, own, f, quad.points)
                - _pressure_face_trace(space, q, nb, f, quad.points))
        total += h * (quad.weights @ jump ** 2)

    means = boundary_means(space, q)
    for f in mesh.boundary_faces():
        i = mesh.face_tags[f]
        quad = space.face_quad_op[f]
        tr = _pressure_face_trace(space, q, mesh.face_owner[f], f, quad.points)
        total += h * (quad.weights @ (tr - means[i]) ** 2)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# inf-sup test function

def infsup_function(q: PressureFunction) -> WeakFunction:
    """Weak function built from pressure gradients, jumps, and boundary
    deviations; pairing it with q through the b-form returns exactly the
    h-weighted squares of those three contributions.

    It lies in the homogeneous test space: the face part is parallel to the
    face normals, and its flux through every cavity component vanishes
    because the component mean is subtracted there.
    """
    space = q.space
    mesh = space.mesh
    h = mesh.h
    v = WeakFunction.zeros(space)

    for c in range(mesh.n_cells):
        quad = space.cell_quad_op[c]
        G = space.cell_basis[c].grad(quad.points)[:, :space.npb]
        gq = np.einsum("qid,i->qd", G, q.cell(c))
        v.interior(c)[:] = -h * h * space.cell_basis[c].project(gq, quad)

    for f in mesh.interior_faces():
        own, nb = mesh.face_cells[f]
        quad = space.face_quad_op[f]
        jump = (_pressure_face_trace(space, q, own, f, quad.points)
                - _pressure_face_trace(space, q, nb, f, quad.points))
        v.face(f)[0] = h * space.face_basis[f].project(jump, quad)

    means = boundary_means(space, q)
    for f in mesh.boundary_faces():
        i = mesh.face_tags[f]
        quad = space.face_quad_op[f]
        tr = _pressure_face_trace(space, q, mesh.face_owner[f], f, quad.points)
        v.face(f)[0] = h * space.face_basis[f].project(tr - means[i], quad)
    return v


def infsup_pairing_reference(q: PressureFunction) -> float:
    """Independent evaluation of the value b(v_q, q) must take:
    h^2 * sum_T (mu grad q, grad q) + h * (interior jump and boundary
    deviation L2 squares)."""
    space = q.space
    mesh = space.mesh
    h = mesh.h
    total = 0.0
    for c in range(mesh.n_cells):
        quad = space.cell_quad_op[c]
        G = space.cell_basis[c].grad(quad.points)[:, :space.npb]
        gq = np.einsum("qid,i->qd", G, q.cell(c))
        mu_gq = gq @ space.mu[c]
        total += h * h * (quad.weights @ (mu_gq * gq).sum(axis=1))
    for f in mesh.interior_faces():
        own, nb = mesh.face_cells[f]
        quad = space.face_quad_op[f]
        jump = (_pressure_face_trace(space, q, own, f, quad.points)
                - _pressure_face_trace(space, q, nb, f, quad.points))
        total += h * (quad.weights @ jump ** 2)
    means = boundary_means(space, q)
    for f in mesh.boundary_faces():
        i = mesh.face_tags[f]
        quad = space.face_quad_op[f]
        tr = _pressure_face_trace(space, q, mesh.face_owner[f], f, quad.points)
        total += h * (quad.weights @ (tr - means[i]) ** 2)
    return float(total)


# ---------------------------------------------------------------------------
# consistency functionals of a manufactured solution

def residual_functionals(space: WGSpace, kcurl_u, p_exact, v: WeakFunction,
                         u_exact=None):
    """Consistency residual functionals of the exact pair against a discrete
    test function v.

    kcurl_u maps points to kappa * curl u (the flux whose projection gap
    drives the curl-side term); p_exact is the scalar multiplier.  Returns
    (l, theta, phi) where phi adds the stabilizer applied to the projection
    of u_exact (required unless u_exact is None, in which case phi is None).
    """
    mesh = space.mesh
    l_val = 0.0
    th_val = 0.0
    for c in range(mesh.n_cells):
        basis = space.cell_basis[c]
        proj_flux = space.project_cell_vector(kcurl_u, c)        # (3, np)
        proj_p = basis.project(p_exact(space.cell_quad_data[c].points),
                               space.cell_quad_data[c], degree=space.k - 1)
        mu = space.mu[c]
        nb = space.nib
        v0 = v.interior(c)
        for f, s in zip(mesh.cell_faces[c], mesh.cell_signs[c]):
            quad = space.face_quad_data[f]
            pts, w = quad.points, quad.weights
            n, t1, t2 = space.face_basis[f].frame
            nT = s * n
            Vc = basis.eval(pts)
            F = space.face_basis[f].eval(pts)
            vb = v.face(f)

            v0_vals = Vc @ v0.T                                  # (nq, 3)
            vb_vals = (np.outer(F @ vb[0], n) + np.outer(F @ vb[1], t1)
                       + np.outer(F @ vb[2], t2))

            flux = np.asarray(kcurl_u(pts), dtype=float)
            gap = Vc[:, :space.npb] @ proj_flux.T - flux         # (nq, 3)
            tang = np.cross(v0_vals - vb_vals, nT)
            l_val += w @ (gap * tang).sum(axis=1)

            pgap = np.asarray(p_exact(pts), dtype=float) - Vc[:, :space.npb] @ proj_p
            normal = (v0_vals @ mu - vb_vals) @ nT
            th_val += w @ (pgap * normal)

    phi = None
    if u_exact is not None:
        phi = l_val + th_val + stabilizer(space.project_field(u_exact), v)
    return float(l_val), float(th_val), phi


# ---------------------------------------------------------------------------
# convergence rates and error reports

def convergence_rate(pairs) -> float:
    """Least-squares slope of log(error) against log(h)."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (h, error) pairs")
    h = np.array([p[0] for p in pairs], dtype=float)
    e = np.array([p[1] for p in pairs], dtype=float)
    if np.any(e <= 0.0) or np.any(h <= 0.0):
        raise ValueError("h and error values must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


@dataclass
class ErrorReport:
    """Errors of one solve against the projected exact solution."""
    h: float
    n_dofs: int
    err_divcurl: float    # |||Q_h u - u_h|||_1
    err_energy: float     # |||Q_h u - u_h|||
    err_pressure: float   # ||Q_h p - p_h||_{W_h}
    err_l2: float         # ||Q_0 u - u_0||
    err_face: float       # face-variable error in the E_h norm
    err_jump: float       # |e_h|_{1,h}

    CSV_HEADER = "h,ndof,err_bar1,err_bar,err_wh,err_l2,err_eh,err_1h"

    def csv_row(self) -> str:
        return (f"{self.h!r},{self.n_dofs},{self.err_divcurl!r},"
                f"{self.err_energy!r},{self.err_pressure!r},{self.err_l2!r},"
                f"{self.err_face!r},{self.err_jump!r}")


def error_report(space: WGSpace, solution, u_exact, p_exact) -> ErrorReport:
    """Measure a solution against the projections of the exact fields."""
    e = space.project_field(u_exact) - solution.u
    eps = space.project_pressure(p_exact) - solution.p
    return ErrorReport(
        h=space.mesh.h,
        n_dofs=solution.n_unknowns,
        err_divcurl=norm_divcurl(e),
        err_energy=norm_energy(e),
        err_pressure=norm_pressure(eps),
        err_l2=norm_interior_l2(e),
        err_face=norm_face_l2(e),
        err_jump=seminorm_jump(e),
    )
